#include "pageopt/search.h"

#include <algorithm>
#include <cstdlib>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "pageopt/errors.h"
#include "support/app_util.h"

namespace pageopt {
namespace {

using testing::FixtureDir;
using testing::TempDir;
using testing::WriteApp;

std::vector<std::string> NonBlank(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (line.find_first_not_of(" \t") != std::string::npos) out.push_back(line);
  }
  return out;
}

// Correct iff every script equals its pristine self minus some lines marked
// REDUNDANT. Events come from the sim runtime so targets stay realistic.
class MarkerHarness : public Harness {
 public:
  explicit MarkerHarness(AppState pristine) : pristine_(std::move(pristine)) {}

  HarnessResult Evaluate(const AppState& app, double timeout_ms) override {
    HarnessResult r = sim_.Evaluate(app, timeout_ms);
    r.screenshot = Screenshot(8, 8);
    r.loaded = true;
    for (const std::string& f : app.ScriptFiles()) {
      std::vector<std::string> want = NonBlank(ReadFileBytes(pristine_.root_dir / f));
      std::vector<std::string> got = NonBlank(ReadFileBytes(app.root_dir / f));
      size_t j = 0;
      for (const std::string& line : want) {
        if (j < got.size() && got[j] == line) {
          ++j;
        } else if (line.find("/*REDUNDANT*/") == std::string::npos) {
          r.loaded = false;
        }
      }
      if (j != got.size()) r.loaded = false;
    }
    return r;
  }
  std::string Name() const override { return "marker"; }

 private:
  AppState pristine_;
  SimHarness sim_;
};

// Replays load times without looking at the app.
class ListHarness : public Harness {
 public:
  explicit ListHarness(std::vector<int64_t> durations) : durations_(durations) {}
  HarnessResult Evaluate(const AppState&, double) override {
    HarnessResult r;
    int64_t d = durations_[calls_++ % durations_.size()];
    r.events.push_back({"load", "", Phase::kComplete, 0, d * 1000, 1, 1, {}});
    r.events.push_back({"x", "", Phase::kComplete, 0, 1, 1, 1, {}});
    r.screenshot = Screenshot(2, 2);
    r.loaded = true;
    return r;
  }
  std::string Name() const override { return "list"; }

 private:
  std::vector<int64_t> durations_;
  size_t calls_ = 0;
};

SearchConfig FastConfig() {
  SearchConfig c;
  c.post_samples = 3;
  return c;
}

TEST_CASE("Summarize") {
  CHECK(Summarize({}) == Stat{});
  CHECK(Summarize({4}) == Stat{4, 0});
  CHECK(Summarize({1, 2, 3}) == Stat{2, 1});
  CHECK(Summarize({2, 4, 4, 4, 5, 5, 7, 9}).variance ==
        doctest::Approx(32.0 / 7));
}

TEST_CASE("SamplePerformance") {
  TempDir dir;
  AppState app = WriteApp(dir.path(), {{"a.js", "markLoaded();\n"}});
  ListHarness h({9, 1, 2, 3});
  PerformanceSummary s = SamplePerformance(h, app, 4, 1, 1000);
  CHECK(s.samples == 3);
  CHECK(s.load_time_ms == Stat{2, 1});
  CHECK(s.event_count == Stat{2, 0});
  CHECK(s.max_depth == Stat{2, 0});
  CHECK(s.not_loaded == 0);
  CHECK_THROWS(SamplePerformance(h, app, 2, 2, 1000));

  SimHarness sim;
  s = SamplePerformance(sim, LoadApp(FixtureDir("redundant_app")), 10, 2, 1000);
  CHECK(s.samples == 8);
  CHECK(s.load_time_ms.variance == 0);
  CHECK(s.event_count.variance == 0);
  CHECK(s.max_depth.variance == 0);
}

TEST_CASE("UnifiedDiff examples") {
  CHECK(UnifiedDiff("a\nb\n", "a\nb\n", "f.js").empty());
  CHECK(UnifiedDiff("a\nb\nc\n", "a\nc\n", "f.js") ==
        "--- a/f.js\n+++ b/f.js\n@@ -1,3 +1,2 @@\n a\n-b\n c\n");
  CHECK(UnifiedDiff("", "x\n", "f.js") ==
        "--- a/f.js\n+++ b/f.js\n@@ -0,0 +1 @@\n+x\n");
  CHECK(UnifiedDiff("x", "y", "f.js") ==
        "--- a/f.js\n+++ b/f.js\n@@ -1 +1 @@\n-x\n\\ No newline at end of file\n"
        "+y\n\\ No newline at end of file\n");

  // Edits far apart give separate hunks; close ones share one.
  std::string before;
  for (int i = 0; i < 30; ++i) before += "l" + std::to_string(i) + "\n";
  std::string far = before, near = before;
  far.replace(far.find("l2\n"), 3, "");
  far.replace(far.find("l25\n"), 4, "");
  near.replace(near.find("l2\n"), 3, "");
  near.replace(near.find("l8\n"), 3, "");
  auto hunks = [](const std::string& d) {
    size_t n = 0;
    for (size_t at = d.find("\n@@"); at != std::string::npos; at = d.find("\n@@", at + 1)) ++n;
    return n;
  };
  CHECK(hunks(UnifiedDiff(before, far, "f")) == 2);
  CHECK(hunks(UnifiedDiff(before, near, "f")) == 1);
}

TEST_CASE("UnifiedDiff output applies with patch -p1") {
  std::mt19937_64 rng(7);
  auto pick = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  TempDir dir;
  for (int round = 0; round < 60; ++round) {
    CAPTURE(round);
    std::vector<std::string> lines;
    int n = pick(0, 40);
    for (int i = 0; i < n; ++i) lines.push_back("x" + std::to_string(pick(0, 5)));
    std::vector<std::string> edited;
    for (const std::string& l : lines) {
      int r = pick(0, 9);
      if (r == 0) continue;
      if (r == 1) edited.push_back("new" + std::to_string(pick(0, 3)));
      edited.push_back(l);
    }
    if (pick(0, 4) == 0) edited.push_back("tail");
    auto join = [&](const std::vector<std::string>& v, bool newline_at_end) {
      std::string s;
      for (size_t i = 0; i < v.size(); ++i) {
        s += v[i];
        if (i + 1 < v.size() || newline_at_end) s += "\n";
      }
      return s;
    };
    std::string before = join(lines, pick(0, 3) != 0);
    std::string after = join(edited, pick(0, 3) != 0);
    std::string diff = UnifiedDiff(before, after, "f.txt");
    if (before == after) {
      CHECK(diff.empty());
      continue;
    }
    WriteFileBytes(dir / "f.txt", before);
    WriteFileBytes(dir / "p.diff", diff);
    std::string cmd = "cd '" + dir.path().string() +
                      "' && patch -s -p1 < p.diff > /dev/null 2>&1";
    REQUIRE(std::system(cmd.c_str()) == 0);
    CHECK(ReadFileBytes(dir / "f.txt") == after);
  }
}

TEST_CASE("EmitPatch covers changed files in name order") {
  TempDir dir;
  AppState a = WriteApp(dir / "a", {{"z.js", "1;\n"}, {"b.js", "2;\n3;\n"}});
  AppState b = CopyApp(a, dir / "b");
  CHECK(EmitPatch(a, b).empty());
  WriteFileBytes(dir / "b" / "b.js", "2;\n");
  WriteFileBytes(dir / "b" / "z.js", "");
  Patch p = EmitPatch(a, b);
  REQUIRE(p.files.size() == 2);
  CHECK(p.files[0].file_name == "b.js");
  CHECK(p.files[1].file_name == "z.js");
  CHECK(p.Text() == p.files[0].text + p.files[1].text);
}

TEST_CASE("optimize: nothing to try gives an empty run") {
  TempDir dir;
  AppState app = WriteApp(dir / "app", {{"a.js", "paint(1, 1, 0, 0, 0);\nmarkLoaded();\n"}});
  SimHarness sim;
  OptimizationResult r = Optimize(app, dir / "work", sim, FastConfig());
  CHECK(r.report.attempts == 0);
  CHECK(r.patch.empty());
  CHECK(r.patch.Text().empty());
  CHECK(r.report.deltas.time_pct == 0);
  CHECK(r.report.deltas.events_pct == 0);
  CHECK(r.report.deltas.depth_pct == 0);
  CHECK(r.report.neutral_rate_pct == 0);
  CHECK(r.report.final_passes);
}

TEST_CASE("optimize: an oracle that fails its own check is fatal") {
  TempDir dir;
  AppState app = WriteApp(dir / "app", {{"a.js", "paint(1, 1, 0, 0, 0);\n"}});
  SimHarness sim;
  CHECK_THROWS_AS(Optimize(app, dir / "work", sim, FastConfig()), OracleNeverLoads);
}

TEST_CASE("optimize: scripted harness keeps exactly the marked statements") {
  AppState pristine = LoadApp(FixtureDir("redundant_app"));
  TempDir dir;
  MarkerHarness h(pristine);
  SearchConfig config = FastConfig();
  config.operators = {Operator::kDelete};
  OptimizationResult r = Optimize(pristine, dir / "work", h, config);

  int marked = 0;
  for (const std::string& f : pristine.ScriptFiles()) {
    std::vector<std::string> want;
    for (const std::string& line : NonBlank(ReadFileBytes(pristine.root_dir / f))) {
      if (line.find("/*REDUNDANT*/") == std::string::npos) {
        want.push_back(line);
      } else {
        ++marked;
      }
    }
    CHECK(NonBlank(ReadFileBytes(dir / "work" / f)) == want);
  }
  CHECK(r.report.kept == marked);
  CHECK(r.report.inapplicable == 0);
  CHECK(r.report.neutral_rate_pct ==
        doctest::Approx(100.0 * marked / r.report.attempts));
  for (const IterationRecord& rec : r.log) {
    CHECK((rec.outcome == Outcome::kKept) ==
          (rec.preview.find("/*REDUNDANT*/") != std::string::npos));
  }
  CHECK(r.report.final_passes);
}

TEST_CASE("optimize: max iterations caps the attempts") {
  AppState pristine = LoadApp(FixtureDir("redundant_app"));
  TempDir dir;
  SimHarness sim;
  SearchConfig config = FastConfig();
  config.max_iterations = 1;
  OptimizationResult r = Optimize(pristine, dir / "work", sim, config);
  CHECK(r.report.attempts == 1);
  CHECK(r.log.size() == 1);
  CHECK(r.report.budget_exhausted);
  CHECK(r.report.final_passes);
}

TEST_CASE("optimize: loop operator alone on an app without sites") {
  AppState pristine = LoadApp(FixtureDir("plain_app"));
  TempDir dir;
  SimHarness sim;
  SearchConfig config = FastConfig();
  config.operators = {Operator::kLoopRewrite};
  OptimizationResult r = Optimize(pristine, dir / "work", sim, config);
  CHECK(r.report.attempts == 0);
  CHECK(r.patch.empty());
}

TEST_CASE("optimize: per-file loop mode rewrites whole files") {
  AppState pristine = LoadApp(FixtureDir("redundant_app"));
  TempDir dir;
  SimHarness sim;
  SearchConfig config = FastConfig();
  config.operators = {Operator::kLoopRewrite};
  config.loop_per_file = true;
  OptimizationResult r = Optimize(pristine, dir / "work", sim, config);
  // app.js holds the hazard, so its batch fails; framework.js passes.
  CHECK(r.report.attempts == 2);
  CHECK(r.report.kept == 1);
  CHECK(r.patch.files.size() == 1);
  CHECK(r.patch.files[0].file_name == "framework.js");
  CHECK(r.report.final_passes);
}

TEST_CASE("optimize: pristine directory is never written") {
  TempDir dir;
  AppState src = LoadApp(FixtureDir("redundant_app"));
  AppState pristine = CopyApp(src, dir / "pristine");
  std::map<std::string, std::string> before;
  for (const std::string& f : pristine.FileNames()) {
    before[f] = ReadFileBytes(pristine.root_dir / f);
  }
  SimHarness sim;
  Optimize(pristine, dir / "work", sim, FastConfig());
  for (const auto& [f, text] : before) {
    CHECK(ReadFileBytes(pristine.root_dir / f) == text);
  }
}

TEST_CASE("optimize: identical runs give identical artifacts") {
  AppState pristine = LoadApp(FixtureDir("redundant_app"));
  TempDir dir;
  SimHarness sim_a, sim_b(1'000'000, 0);
  OptimizationResult a = Optimize(pristine, dir / "a", sim_a, FastConfig());
  OptimizationResult b = Optimize(pristine, dir / "b", sim_b, FastConfig());
  CHECK(a.patch.Text() == b.patch.Text());
  CHECK(ReportJson(a.report) == ReportJson(b.report));
  CHECK(MetricsCsv(a.log) == MetricsCsv(b.log));
}

// Fails every mutated load and, while doing so, scribbles on another file.
class VandalHarness : public Harness {
 public:
  HarnessResult Evaluate(const AppState& app, double timeout_ms) override {
    HarnessResult r = sim_.Evaluate(app, timeout_ms);
    if (++calls_ > 8) {
      r.loaded = false;
      WriteFileBytes(app.root_dir / "framework.js", "// gone\n");
    }
    return r;
  }
  std::string Name() const override { return "vandal"; }

 private:
  SimHarness sim_;
  int calls_ = 0;
};

TEST_CASE("optimize: a revert that does not restore the files is caught") {
  AppState pristine = LoadApp(FixtureDir("redundant_app"));
  TempDir dir;
  VandalHarness h;
  CHECK_THROWS_AS(Optimize(pristine, dir / "work", h, FastConfig()), Error);
}

TEST_CASE("metrics.csv and report.json layout") {
  AppState pristine = LoadApp(FixtureDir("plain_app"));
  TempDir dir;
  SimHarness sim;
  OptimizationResult r = Optimize(pristine, dir / "work", sim, FastConfig());
  std::string csv = MetricsCsv(r.log);
  std::istringstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == kMetricsCsvHeader);
  int rows = 0;
  for (std::string line; std::getline(in, line); ++rows) {
    CHECK(std::count(line.begin(), line.end(), ',') == 8);
  }
  CHECK(rows == r.report.attempts);
  nlohmann::json report = nlohmann::json::parse(ReportJson(r.report));
  CHECK(report["attempts"] == r.report.attempts);
  CHECK(report["oracle"]["samples"].size() == 5);
  CHECK(report["keptMutations"].size() == size_t(r.report.kept));
}

}  // namespace
}  // namespace pageopt
