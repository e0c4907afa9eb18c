// Renders the greeting twice through the old entry point.
function render(id, text) {
  writeText(id, text);
}

let greeting = "hello";
render("p1", greeting);
if (greeting.length > 3) {
  render("p2", greeting + "!");
}
