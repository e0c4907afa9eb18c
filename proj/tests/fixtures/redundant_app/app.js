// Entry point.
var labels = titles.map(shout);
var stamps = [];

// Spins for a while to "warm" a cache that does not exist.
function warm(n) {
  let acc = 1;
  for (let i = 0; i < n; i++) {
    acc = (acc * 17 + i) % 4093;
  }
  stamps.push(acc);
  return acc;
}

// Walks down a long chain and throws the answer away.
function settle(depth, seed) {
  if (depth == 0) {
    return seed;
  }
  return settle(depth - 1, (seed * 7 + depth) % 1009);
}

function list(slot) {
  labels.forEach(row);
}

function tick(n, i) {
  fillRect(90, 10 + i * 4, 3, 2, 0, 0, 255);
}

function ticker(slot) {
  nextBatch().forEach(tick);
}

function finish() {
  writeText('status', 'rows ' + labels.length);
  markLoaded();
}

function boot() {
  register(header);
  register(list);
  register(footer);
  schedule(ticker);
  schedule(finish);
  /*REDUNDANT*/ settle(9, 1);
  mount();
  /*REDUNDANT*/ warm(5000);
  defer(flush);
}

boot();
