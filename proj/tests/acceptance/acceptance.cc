// One PASS/FAIL line per acceptance criterion; exit status is the number of
// failures. Needs only the sim harness and the bundled fixtures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pageopt/ast.h"
#include "pageopt/operators.h"
#include "pageopt/search.h"
#include "pageopt/sim.h"
#include "support/app_util.h"
#include "support/trace_gen.h"

namespace pageopt {
namespace {

namespace fs = std::filesystem;
using testing::FixtureDir;
using testing::TempDir;

constexpr const char* kMarker = "/*REDUNDANT*/";

struct Verdict {
  bool pass = true;
  std::string detail;

  void Fail(const std::string& why) {
    if (pass) detail.clear();
    pass = false;
    detail += (detail.empty() ? "" : "; ") + why;
  }
};

std::string Num(double v, int digits = 1) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// A finished optimize run plus what an outside observer saw of it.
struct Run {
  std::string label;
  AppState pristine;
  fs::path work;
  OptimizationResult result;
  double seconds = 0.0;
  int revert_violations = 0;
  std::string error;
};

std::map<std::string, std::string> Snapshot(const AppState& app) {
  std::map<std::string, std::string> out;
  for (const std::string& f : app.FileNames()) {
    out[f] = ReadFileBytes(app.root_dir / f);
  }
  return out;
}

Run Optimized(const std::string& label, const std::string& fixture,
              const SearchConfig& config, const fs::path& root) {
  Run run;
  run.label = label;
  run.pristine = LoadApp(FixtureDir(fixture));
  run.work = root / label;
  // Between attempts the working copy must hold exactly the last kept state.
  std::map<std::string, std::string> expected = Snapshot(run.pristine);
  AppState work_view = run.pristine;
  work_view.root_dir = run.work;
  SearchObserver observer;
  observer.on_iteration = [&](const IterationRecord& rec) {
    std::map<std::string, std::string> now = Snapshot(work_view);
    if (rec.outcome == Outcome::kKept) {
      expected = now;
    } else if (now != expected) {
      ++run.revert_violations;
    }
  };
  SimHarness sim;
  auto start = std::chrono::steady_clock::now();
  try {
    run.result = Optimize(run.pristine, run.work, sim, config, observer);
  } catch (const std::exception& e) {
    run.error = e.what();
  }
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                    .count();
  return run;
}

// --- criteria -------------------------------------------------------------

Verdict FixtureProfile(const Run& run) {
  Verdict v;
  if (!run.error.empty()) {
    v.Fail(run.error);
    return v;
  }
  const MetricDeltas& d = run.result.report.deltas;
  v.detail = "time " + Num(d.time_pct) + "% events " + Num(d.events_pct) +
             "% depth " + Num(d.depth_pct) + "% in " + Num(run.seconds, 2) + " s";
  if (d.time_pct < 40) v.Fail("time " + Num(d.time_pct) + "% < 40%");
  if (d.events_pct < 30) v.Fail("events " + Num(d.events_pct) + "% < 30%");
  if (d.depth_pct < 25) v.Fail("depth " + Num(d.depth_pct) + "% < 25%");
  if (run.seconds >= 60) v.Fail("took " + Num(run.seconds, 2) + " s");
  fs::path golden = FixtureDir("golden") / "redundant_app";
  if (ReportJson(run.result.report) != ReadFileBytes(golden / "report.json")) {
    v.Fail("report differs from golden");
  }
  return v;
}

Verdict NeutralAccounting(const Run& run) {
  Verdict v;
  if (!run.error.empty()) {
    v.Fail(run.error);
    return v;
  }
  const OptimizationReport& r = run.result.report;
  nlohmann::json golden = nlohmann::json::parse(
      ReadFileBytes(FixtureDir("golden") / "redundant_app" / "report.json"));
  double want = golden.at("neutralRatePct");

  int marked = 0;
  for (const std::string& f : run.pristine.ScriptFiles()) {
    std::string text = ReadFileBytes(run.pristine.root_dir / f);
    for (size_t at = text.find(kMarker); at != std::string::npos;
         at = text.find(kMarker, at + 1)) {
      ++marked;
    }
  }
  int kept_deletes = 0, kept_unmarked = 0;
  int tried = 0;
  for (const IterationRecord& rec : run.result.log) {
    if (rec.op != Operator::kDelete) continue;
    if (rec.outcome != Outcome::kInapplicable) ++tried;
    if (rec.outcome != Outcome::kKept) continue;
    ++kept_deletes;
    if (rec.preview.find(kMarker) == std::string::npos) ++kept_unmarked;
  }
  double derived = tried == 0 ? 0.0 : 100.0 * marked / tried;
  v.detail = Num(r.neutral_rate_pct, 3) + "% = " + std::to_string(marked) +
             " marked / " + std::to_string(tried) + " deletions";
  if (r.neutral_rate_pct != want) v.Fail("golden says " + Num(want, 3) + "%");
  if (kept_deletes != marked || kept_unmarked != 0) {
    v.Fail("kept " + std::to_string(kept_deletes) + " deletions, " +
           std::to_string(kept_unmarked) + " unmarked, " + std::to_string(marked) +
           " marked");
  }
  if (std::abs(derived - r.neutral_rate_pct) > 1e-9) {
    v.Fail("derived rate " + Num(derived, 3) + "%");
  }
  return v;
}

// Depth of an event = how many events on its thread contain it, itself
// included. O(n^2) on purpose.
LoadMetrics BruteForce(const std::vector<TraceEvent>& events) {
  LoadMetrics m;
  if (events.empty()) return m;
  int64_t lo = events[0].timestamp_us, hi = events[0].end_us();
  for (const TraceEvent& e : events) {
    lo = std::min(lo, e.timestamp_us);
    hi = std::max(hi, e.end_us());
    int64_t depth = 0;
    for (const TraceEvent& o : events) {
      if (o.process_id == e.process_id && o.thread_id == e.thread_id &&
          o.timestamp_us <= e.timestamp_us && e.end_us() <= o.end_us()) {
        ++depth;
      }
    }
    m.max_depth = std::max(m.max_depth, depth);
  }
  m.event_count = int64_t(events.size());
  m.load_time_ms = double(hi - lo) / 1000.0;
  return m;
}

Verdict MetricOracles() {
  Verdict v;
  constexpr int kCases = 1200;
  int mismatches = 0;
  for (int seed = 0; seed < kCases; ++seed) {
    testing::TraceGenerator gen(uint64_t(seed) * 7919 + 1);
    std::vector<TraceEvent> events = gen.Generate(gen.Uniform(1, 120));
    std::shuffle(events.begin(), events.end(), gen.rng());
    LoadMetrics got = ComputeMetrics(BuildCallTree(events));
    LoadMetrics want = BruteForce(events);
    if (got.max_depth != want.max_depth || got.event_count != want.event_count ||
        std::abs(got.load_time_ms - want.load_time_ms) > 1e-9) {
      if (mismatches++ == 0) v.Fail("seed " + std::to_string(seed) + " differs");
    }
  }
  if (mismatches) {
    v.detail += " (" + std::to_string(mismatches) + " traces)";
  } else {
    v.detail = std::to_string(kCases) + " random traces agree";
  }
  return v;
}

Verdict Safety(const std::vector<const Run*>& runs) {
  Verdict v;
  int attempts = 0;
  for (const Run* run : runs) {
    if (!run->error.empty()) {
      v.Fail(run->label + ": " + run->error);
      continue;
    }
    attempts += run->result.report.attempts;
    if (run->revert_violations) {
      v.Fail(run->label + ": " + std::to_string(run->revert_violations) +
             " reverts left files changed");
    }
    // Judge the final state again from scratch.
    SimHarness fresh;
    const OracleProfile& oracle = run->result.report.oracle;
    HarnessResult r = fresh.Evaluate(run->result.final_state, oracle.timeout_ms);
    if (!Judge(oracle.screenshot, r.screenshot, oracle.threshold, r.loaded).pass ||
        !run->result.report.final_passes) {
      v.Fail(run->label + ": final state fails the check");
    }
  }
  if (v.pass) {
    v.detail = std::to_string(runs.size()) + " runs, " + std::to_string(attempts) +
               " attempts, no violations";
  }
  return v;
}

Verdict PatchRoundTrip(const std::vector<const Run*>& runs, const fs::path& root) {
  Verdict v;
  int files = 0;
  for (const Run* run : runs) {
    if (!run->error.empty()) {
      v.Fail(run->label + ": " + run->error);
      continue;
    }
    fs::path dir = root / ("patched-" + run->label);
    AppState copy = CopyApp(run->pristine, dir);
    std::string diff = run->result.patch.Text();
    WriteFileBytes(dir / "p.diff", diff);
    if (!diff.empty()) {
      std::string cmd = "cd '" + dir.string() + "' && patch -s -p1 < p.diff > /dev/null 2>&1";
      if (std::system(cmd.c_str()) != 0) {
        v.Fail(run->label + ": patch did not apply");
        continue;
      }
    }
    for (const std::string& f : copy.FileNames()) {
      ++files;
      if (ReadFileBytes(dir / f) != ReadFileBytes(run->work / f)) {
        v.Fail(run->label + ": " + f + " differs after patching");
      }
    }
  }
  if (v.pass) v.detail = std::to_string(files) + " files byte-exact";
  return v;
}

std::vector<std::string> EventNames(const SimOutcome& out) {
  static const std::set<std::string> kBookkeeping = {"forEach", "map", "push"};
  std::vector<std::string> names;
  for (const TraceEvent& e : out.events) {
    if (!kBookkeeping.count(e.name)) names.push_back(e.name);
  }
  return names;
}

Verdict LoopDifferential(const Run& fixture_run) {
  Verdict v;
  const std::vector<std::string> sites = {
      "xs.forEach(draw);",
      "xs.forEach(v => paint(v, v % 50, 1, 2, 3));",
      "xs.forEach(function (v, i) { paint(i, v, 9, 9, 9); log(i); });",
      "let ys = xs.map(x => x * 2); ys.forEach(draw);",
      "const zs = xs.map(scale); draw(zs.length, 0);",
      "var ws = []; ws = xs.map(function (v) { return v + 1; }); draw(ws.length, 1);",
  };
  int compared = 0;
  for (int n = 0; n <= 8; ++n) {
    std::string xs = "[";
    for (int i = 0; i < n; ++i) xs += (i ? ", " : "") + std::to_string((i * 37 + 5) % 97);
    xs += "]";
    for (const std::string& site : sites) {
      std::string text =
          "function draw(v, i) { paint(v, i, 0, 0, 0); }\n"
          "function scale(v) { return v * 3; }\n"
          "let xs = " + xs + ";\n" + site + "\nmarkLoaded();\n";
      SimOutcome before = RunSimPage({{"app.js", text}}, {});
      Ast ast = ParseSource(text);
      std::vector<MutationCandidate> cs = EnumerateLoopSites(ast, "app.js");
      std::vector<MutationCandidate> whole = EnumerateLoopFile(ast, "app.js");
      cs.insert(cs.end(), whole.begin(), whole.end());
      if (cs.empty()) v.Fail("no site found in: " + site);
      for (const MutationCandidate& c : cs) {
        MutationOutcome m = ApplyCandidate(text, c);
        SimOutcome after = RunSimPage({{"app.js", m.source.new_text}}, {});
        ++compared;
        if (!m.applicable || !after.loaded || after.framebuffer != before.framebuffer ||
            EventNames(after) != EventNames(before)) {
          v.Fail("length " + std::to_string(n) + ": " + site);
        }
      }
    }
  }

  // The fixture's side-effecting receiver must be tried and reverted.
  bool hazard_reverted = false, hazard_kept = false;
  for (const IterationRecord& rec : fixture_run.result.log) {
    if (rec.op != Operator::kLoopRewrite ||
        rec.preview.find("nextBatch().forEach(tick)") == std::string::npos) {
      continue;
    }
    if (rec.outcome == Outcome::kReverted) hazard_reverted = true;
    if (rec.outcome == Outcome::kKept) hazard_kept = true;
  }
  if (!hazard_reverted || hazard_kept) v.Fail("hazard site was not reverted");
  if (v.pass) {
    v.detail = std::to_string(compared) + " rewrites equivalent, hazard reverted";
  }
  return v;
}

Verdict ParserRoundTrip() {
  Verdict v;
  int files = 0;
  for (const fs::directory_entry& e :
       fs::recursive_directory_iterator(FixtureDir(""))) {
    if (!e.is_regular_file() || e.path().extension() != ".js") continue;
    ++files;
    std::string text = ReadFileBytes(e.path());
    std::string name = fs::relative(e.path(), FixtureDir("")).string();
    try {
      Ast ast = ParseSource(text);
      std::string printed = PrintSource(ast);
      if (printed != text) v.Fail(name + ": print differs");
      if (!StructurallyEqual(ParseSource(printed).root, ast.root)) {
        v.Fail(name + ": reparse differs");
      }
    } catch (const std::exception& ex) {
      v.Fail(name + ": " + ex.what());
    }
  }
  if (files == 0) v.Fail("no corpus files found");
  if (v.pass) v.detail = std::to_string(files) + " files";
  return v;
}

Verdict Determinism(const Run& a, const Run& b) {
  Verdict v;
  if (!a.error.empty() || !b.error.empty()) {
    v.Fail(a.error + b.error);
    return v;
  }
  if (a.result.patch.Text() != b.result.patch.Text()) v.Fail("patch differs");
  if (ReportJson(a.result.report) != ReportJson(b.result.report)) v.Fail("report differs");
  if (MetricsCsv(a.result.log) != MetricsCsv(b.result.log)) v.Fail("metrics.csv differs");
  if (v.pass) v.detail = "patch, report and metrics.csv identical";
  return v;
}

int Main() {
  TempDir root;
  SearchConfig defaults;
  SearchConfig deletes_only;
  deletes_only.operators = {Operator::kDelete};
  deletes_only.post_samples = 5;
  SearchConfig loops_per_file;
  loops_per_file.operators = {Operator::kLoopRewrite};
  loops_per_file.loop_per_file = true;
  loops_per_file.post_samples = 5;

  Run main_run = Optimized("redundant", "redundant_app", defaults, root.path());
  Run again = Optimized("redundant-again", "redundant_app", defaults, root.path());
  Run deletes = Optimized("redundant-delete", "redundant_app", deletes_only, root.path());
  Run batch = Optimized("redundant-per-file", "redundant_app", loops_per_file, root.path());
  Run plain = Optimized("plain", "plain_app", defaults, root.path());
  std::vector<const Run*> all = {&main_run, &deletes, &batch, &plain};

  std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"fixture optimization profile", [&] { return FixtureProfile(main_run); }},
      {"neutral-deletion accounting", [&] { return NeutralAccounting(main_run); }},
      {"metric oracles", [] { return MetricOracles(); }},
      {"safety", [&] { return Safety(all); }},
      {"patch round trip", [&] { return PatchRoundTrip(all, root.path()); }},
      {"loop-rewrite differential", [&] { return LoopDifferential(main_run); }},
      {"parser round trip", [] { return ParserRoundTrip(); }},
      {"determinism", [&] { return Determinism(main_run, again); }},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v.Fail(e.what());
    }
    if (!v.pass) ++failures;
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail << "\n";
  }
  return failures;
}

}  // namespace
}  // namespace pageopt

int main() { return pageopt::Main(); }
