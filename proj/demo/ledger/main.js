// Entry point: a chart, a list, and a status line written from a deferred
// callback once everything is on screen.
var entries = [12, 40, 25, 60, 33, 48];
var labels = entries.map(function (v, i) { return 'entry ' + i + ': ' + v; });

function drawChart() {
  let ctx = el('chart').getContext('2d');
  entries.forEach(function (v, i) { bar(ctx, i, v); });
  /*REDUNDANT*/ churn(400000);
}

function fillList() {
  labels.forEach(addRow);
}

function done() {
  el('status').textContent = 'ledger ready';
}

function start() {
  drawChart();
  later(fillList);
  /*REDUNDANT*/ echo('start', queue.length);
  later(done);
}

start();
