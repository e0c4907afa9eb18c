// Small helpers over the DOM. Some of them do work nobody looks at.
var queue = [];
var trail = [];

function el(id) {
  return document.getElementById(id);
}

function later(fn) {
  queue.push(fn);
  setTimeout(function () { fn(); }, 0);
}

function churn(n) {
  let h = 7;
  for (let i = 0; i < n; i++) {
    h = (h * 31 + i) % 1000003;
  }
  trail.push(h);
  return h;
}

function echo(kind, n) {
  for (let i = 0; i < 20; i++) {
    console.debug(kind, n + i);
  }
}

function bar(ctx, i, v) {
  ctx.fillStyle = 'rgb(40, 90, ' + (100 + i * 30) + ')';
  ctx.fillRect(10 + i * 40, 70 - v, 30, v);
  /*REDUNDANT*/ echo('bar', i);
}

function addRow(text) {
  let li = document.createElement('li');
  li.textContent = text;
  el('rows').appendChild(li);
  /*REDUNDANT*/ churn(200000);
}
