#include "pageopt/sim.h"

#include <algorithm>

#include "doctest.h"

namespace pageopt {
namespace {

SimOutcome Run(const std::string& source, SimOptions options = {}) {
  options.sentinel_text = "ready";
  return RunSimPage({{"app.js", source}}, options);
}

const TraceEvent* FindEvent(const SimOutcome& out, const std::string& name) {
  for (const TraceEvent& e : out.events) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

TEST_CASE("markLoaded with nothing painted") {
  SimOutcome out = Run("markLoaded();");
  CHECK(out.loaded);
  CHECK_FALSE(out.timed_out);
  CHECK(out.framebuffer == Screenshot(kCanvasSize, kCanvasSize));
}

TEST_CASE("no sentinel means not loaded") {
  SimOutcome out = Run("paint(1, 1, 0, 0, 0);");
  CHECK_FALSE(out.loaded);
  CHECK(out.framebuffer.At(1, 1)[0] == 0);
}

TEST_CASE("writeText with the sentinel text also counts as loaded") {
  CHECK(Run("writeText('p', 'ready now');").loaded);
}

TEST_CASE("infinite loop times out on the virtual clock") {
  SimOptions options;
  options.timeout_ms = 50;
  SimOutcome out = Run("markLoaded(); for (;;) {}", options);
  CHECK(out.timed_out);
  CHECK_FALSE(out.loaded);
  CHECK(out.elapsed_ms == doctest::Approx(50.0));
}

TEST_CASE("step budget also ends the run") {
  SimOptions options;
  options.timeout_ms = 1e9;
  options.step_budget = 1000;
  SimOutcome out = Run("for (;;) {}", options);
  CHECK(out.timed_out);
  CHECK(out.steps == 1001);
}

TEST_CASE("crashes are outcomes, not exceptions") {
  SimOutcome out = Run("markLoaded(); missing();");
  CHECK(out.crashed);
  CHECK_FALSE(out.loaded);
  CHECK(out.crash_message.find("missing") != std::string::npos);
  CHECK(Run("let x = 1; x();").crashed);
  CHECK(Run("const k = 1; k = 2;").crashed);
  CHECK(Run("function r(n) { return r(n + 1); } r(0);").crashed);
  CHECK(Run("let = ;").crashed);
}

TEST_CASE("cost model") {
  // One call with two statements: duration = 10 + 2.
  SimOutcome out = Run("function f() { let a = 1; a = 2; }\nf();\nmarkLoaded();");
  const TraceEvent* f = FindEvent(out, "f");
  REQUIRE(f != nullptr);
  CHECK(f->duration_us == 12);
  CHECK(f->source_url == "app.js");
  // Script root: 3 statements + f (12) + markLoaded (10) + 10 overhead.
  const TraceEvent* root = FindEvent(out, "EvaluateScript");
  REQUIRE(root != nullptr);
  CHECK(root->duration_us == 3 + 12 + 10 + 10);
  CHECK(root->timestamp_us == 0);
  CHECK(out.elapsed_ms == doctest::Approx(0.035));
  CallTree tree = BuildCallTree(out.events);
  LoadMetrics m = ComputeMetrics(tree);
  CHECK(m.event_count == 3);
  CHECK(m.max_depth == 2);
}

TEST_CASE("defer starts a new root task") {
  SimOutcome out = Run(
      "function leaf() { markLoaded(); }\n"
      "function mid() { defer(leaf); }\n"
      "mid();\n");
  CallTree tree = BuildCallTree(out.events);
  REQUIRE(tree.roots.size() == 2);
  CHECK(tree.roots[1].event.name == "leaf");
  CHECK(out.loaded);
}

TEST_CASE("language semantics") {
  SimOutcome out = Run(
      "let xs = [1, 2, 3];\n"
      "let ys = xs.map(x => x * 2);\n"
      "let total = 0;\n"
      "ys.forEach(function (v, i) { total += v + i; });\n"
      "let s = 'a' + 1 + true;\n"
      "let n = 7 % 4 - -1;\n"
      "let ok = (total == 15) && s === 'a1true' && n == 4 && !(1 > 2);\n"
      "let counter = 0;\n"
      "const bump = () => { counter++; return counter; };\n"
      "bump(); bump();\n"
      "let fns = [];\n"
      "for (let i = 0; i < 3; i++) { fns.push(() => i); }\n"
      "let captured = fns[0]() + fns[1]() * 10 + fns[2]() * 100;\n"
      "if (ok && counter == 2 && captured == 210 && xs.length == 3) {\n"
      "  writeText('result', 'ready ' + total);\n"
      "}\n");
  CHECK_FALSE(out.crashed);
  CHECK(out.loaded);
  CHECK(out.document.at("result") == "ready 15");
  CHECK(FindEvent(out, "bump") != nullptr);  // inferred name
}

TEST_CASE("deterministic") {
  std::string src =
      "function draw(i) { paint(i, i, i * 2, 0, 0); }\n"
      "for (let i = 0; i < 50; i++) { defer(() => draw(i)); }\n"
      "writeText('t', 'hello world');\nmarkLoaded();\n";
  SimOutcome a = Run(src);
  SimOutcome b = Run(src);
  CHECK(a.events == b.events);
  CHECK(a.framebuffer == b.framebuffer);
  CHECK(a.elapsed_ms == b.elapsed_ms);
}

TEST_CASE("scripts share globals and attribute events to their file") {
  SimOutcome out = RunSimPage(
      {{"lib.js", "function helper() { return 1; }"},
       {"main.js", "let f = function () { return helper(); }; f(); markLoaded();"}},
      {});
  const TraceEvent* helper = FindEvent(out, "helper");
  const TraceEvent* f = FindEvent(out, "f");
  REQUIRE(helper != nullptr);
  REQUIRE(f != nullptr);
  CHECK(helper->source_url == "lib.js");
  CHECK(f->source_url == "main.js");
  CHECK(out.loaded);
}

}  // namespace
}  // namespace pageopt
