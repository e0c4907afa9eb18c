#include "cli.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "pageopt/correctness.h"
#include "pageopt/errors.h"
#include "pageopt/harness.h"
#include "pageopt/live.h"
#include "pageopt/search.h"

namespace pageopt::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
  std::string app_dir;
  std::string harness = "sim";
  std::string endpoint = "127.0.0.1:9222";
  std::string out_dir;
  std::string operators = "delete,loop";
  int samples = 5;
  int discard = 2;
  double threshold_mult = 3.0;
  int64_t threshold_floor = -1;  // Harness default when negative.
  double timeout_mult = 2.0;
  double timeout_ms = 30000.0;
  int max_iterations = 10000;
  int post_samples = 1000;
  bool loop_per_file = false;
  std::vector<std::string> categories;  // Empty: every event counts.
  std::string run_dir;
};

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::unique_ptr<Harness> MakeHarness(const Options& o) {
  std::unique_ptr<Harness> h;
  if (o.harness == "live") {
    h = std::make_unique<LiveHarness>(o.endpoint);
  } else {
    h = std::make_unique<SimHarness>();
  }
  if (o.categories.empty()) return h;
  return std::make_unique<CategoryFilterHarness>(
      std::move(h), std::set<std::string>(o.categories.begin(), o.categories.end()));
}

std::vector<Operator> ParseOperators(const std::string& list) {
  std::vector<Operator> ops;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item == "delete") {
      ops.push_back(Operator::kDelete);
    } else if (item == "loop") {
      ops.push_back(Operator::kLoopRewrite);
    } else if (item == "all") {
      ops = {Operator::kDelete, Operator::kLoopRewrite};
    } else {
      throw CLI::ValidationError("--operators", "unknown operator '" + item + "'");
    }
  }
  if (ops.empty()) throw CLI::ValidationError("--operators", "empty list");
  return ops;
}

void PrintMetrics(std::ostream& out, const LoadMetrics& m) {
  out << "loadTimeMs " << Fixed(m.load_time_ms, 3) << "\n"
      << "eventCount " << m.event_count << "\n"
      << "maxDepth " << m.max_depth << "\n";
}

int CmdTrace(const Options& o, std::ostream& out) {
  AppState app = LoadApp(o.app_dir);
  if (o.samples <= o.discard) {
    throw CLI::ValidationError("--samples", "must exceed --discard");
  }
  std::unique_ptr<Harness> harness = MakeHarness(o);
  std::vector<LoadMetrics> kept;
  HarnessResult last;
  for (int i = 0; i < o.samples; ++i) {
    last = harness->Evaluate(app, o.timeout_ms);
    if (i >= o.discard) kept.push_back(MetricsOf(last));
  }
  if (!o.out_dir.empty()) {
    fs::path dir = o.out_dir;
    fs::create_directories(dir);
    WriteFileBytes(dir / "trace.json", SerializeTrace(last.events));
    WritePngFile(dir / "screenshot.png", last.screenshot);
  }
  out << "harness " << harness->Name() << "\n"
      << "loaded " << (last.loaded ? "true" : "false") << "\n"
      << "samples " << kept.size() << "\n";
  PrintMetrics(out, MedianMetrics(kept));
  return kExitOk;
}

int CmdOptimize(const Options& o, std::ostream& out) {
  AppState app = LoadApp(o.app_dir);
  if (o.out_dir.empty()) throw CLI::ValidationError("--out", "required");
  fs::path run = o.out_dir;
  fs::path final_dir = run / "final";
  if (fs::weakly_canonical(final_dir) == fs::weakly_canonical(app.root_dir)) {
    throw CLI::ValidationError("--out", "must not contain the app itself");
  }
  fs::remove_all(final_dir);
  fs::remove_all(run / "traces");
  fs::remove_all(run / "screenshots");
  fs::create_directories(run / "traces");
  fs::create_directories(run / "screenshots");

  SearchConfig cfg;
  cfg.operators = ParseOperators(o.operators);
  cfg.max_iterations = o.max_iterations;
  cfg.oracle_samples = o.samples;
  cfg.warmup_discard = o.discard;
  cfg.threshold_multiplier = o.threshold_mult;
  cfg.threshold_floor =
      o.threshold_floor >= 0 ? o.threshold_floor : (o.harness == "live" ? 25 : 0);
  cfg.timeout_multiplier = o.timeout_mult;
  cfg.post_samples = o.post_samples;
  cfg.loop_per_file = o.loop_per_file;

  std::string timing = "iteration,candidateId,elapsedS\n";
  SearchObserver observer;
  observer.on_evaluation = [&](const std::string& label, const HarnessResult& r) {
    WriteFileBytes(run / "traces" / (label + ".json"), SerializeTrace(r.events));
    WritePngFile(run / "screenshots" / (label + ".png"), r.screenshot);
  };
  observer.on_iteration = [&](const IterationRecord& r) {
    timing += std::to_string(r.iteration) + "," + r.candidate_id + "," +
              Fixed(r.elapsed_s, 6) + "\n";
    out << "#" << r.iteration << " " << OperatorName(r.op) << " "
        << r.file_name << " " << OutcomeName(r.outcome) << "  " << r.preview
        << "\n";
  };

  std::unique_ptr<Harness> harness = MakeHarness(o);
  OptimizationResult result = Optimize(app, final_dir, *harness, cfg, observer);
  WriteFileBytes(run / "patch.diff", result.patch.Text());
  WriteFileBytes(run / "report.json", ReportJson(result.report));
  WriteFileBytes(run / "metrics.csv", MetricsCsv(result.log));
  WriteFileBytes(run / "timing.csv", timing);
  const OptimizationReport& r = result.report;
  out << "attempts " << r.attempts << ", kept " << r.kept << ", reverted "
      << r.reverted << ", inapplicable " << r.inapplicable << "\n"
      << "final state passes: " << (r.final_passes ? "yes" : "NO") << "\n"
      << "artifacts in " << run.string() << "\n";
  return r.final_passes ? kExitOk : kExitFailure;
}

// Checks every row of metrics.csv against the header.
void ValidateMetricsCsv(const std::string& text) {
  std::stringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsCsvHeader) {
    throw Error("metrics.csv: unexpected header");
  }
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    std::vector<std::string> cells;
    std::stringstream cols(line);
    std::string cell;
    while (std::getline(cols, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9) {
      throw Error("metrics.csv: row " + std::to_string(row) + " has " +
                  std::to_string(cells.size()) + " columns");
    }
    for (size_t i : {0, 4, 5, 6, 7, 8}) {
      char* end = nullptr;
      std::strtod(cells[i].c_str(), &end);
      if (cells[i].empty() || *end != '\0') {
        throw Error("metrics.csv: row " + std::to_string(row) +
                    " has a non-numeric cell '" + cells[i] + "'");
      }
    }
  }
}

int CmdReport(const Options& o, std::ostream& out) {
  fs::path run = o.run_dir;
  for (const char* name : {"report.json", "metrics.csv", "patch.diff"}) {
    if (!fs::is_regular_file(run / name)) {
      throw Error(std::string("missing ") + name + " in " + run.string());
    }
  }
  ValidateMetricsCsv(ReadFileBytes(run / "metrics.csv"));
  json r;
  try {
    r = json::parse(ReadFileBytes(run / "report.json"));
    auto pct = [](double v) { return Fixed(v, 1) + "%"; };
    const json& d = r.at("deltas");
    const json& orig = r.at("original");
    const json& fin = r.at("final");
    auto mean = [](const json& s, const char* k) {
      return s.at(k).at("mean").get<double>();
    };
    int64_t deleted = r.at("linesDeleted");
    int64_t total = r.at("linesTotal");
    out << "load time   " << pct(d.at("timePct")) << " saved  ("
        << Fixed(mean(orig, "loadTimeMs"), 3) << " ms -> "
        << Fixed(mean(fin, "loadTimeMs"), 3) << " ms)\n"
        << "events      " << pct(d.at("eventsPct")) << " fewer  ("
        << Fixed(mean(orig, "eventCount"), 1) << " -> "
        << Fixed(mean(fin, "eventCount"), 1) << ")\n"
        << "depth       " << pct(d.at("depthPct")) << " lower  ("
        << Fixed(mean(orig, "maxDepth"), 1) << " -> "
        << Fixed(mean(fin, "maxDepth"), 1) << ")\n"
        << "lines       " << deleted << " deleted of " << total << " ("
        << pct(total == 0 ? 0.0 : 100.0 * double(deleted) / double(total))
        << ")\n"
        << "neutral     " << pct(r.at("neutralRatePct")) << " of deletions ("
        << "loop rewrites " << pct(r.at("loopNeutralRatePct")) << ")\n"
        << "attempts    " << r.at("attempts").get<int>() << " (kept "
        << r.at("kept").get<int>() << ", reverted "
        << r.at("reverted").get<int>() << ", inapplicable "
        << r.at("inapplicable").get<int>() << ")\n"
        << "threshold   " << r.at("oracle").at("threshold").get<int64_t>()
        << " px, timeout " << Fixed(r.at("oracle").at("timeoutMs"), 1)
        << " ms\n";
  } catch (const json::exception& e) {
    throw Error(std::string("report.json: ") + e.what());
  }
  return kExitOk;
}

void AddRunFlags(CLI::App* cmd, Options& o) {
  cmd->add_option("--app", o.app_dir, "App directory holding manifest.json")
      ->required();
  cmd->add_option("--harness", o.harness, "sim or live")
      ->check(CLI::IsMember({"sim", "live"}));
  cmd->add_option("--endpoint", o.endpoint,
                  "Remote-debugging host:port for the live harness");
  cmd->add_option("--samples", o.samples, "Oracle samples")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--discard", o.discard, "Warm-up samples to drop")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--out", o.out_dir, "Output directory");
  cmd->add_option("--categories", o.categories,
                  "Count only events of these categories (comma-separated)")
      ->delimiter(',');
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  Options o;
  CLI::App app{"Trace-guided page-load optimizer", "pageopt"};
  app.require_subcommand(1);

  CLI::App* trace = app.add_subcommand("trace", "Evaluate an app once");
  AddRunFlags(trace, o);
  trace->add_option("--timeout-ms", o.timeout_ms, "Per-load timeout")
      ->check(CLI::PositiveNumber);
  o.samples = 1;
  o.discard = 0;

  CLI::App* optimize = app.add_subcommand("optimize", "Run the search loop");
  AddRunFlags(optimize, o);
  optimize->add_option("--operators", o.operators,
                       "Comma list of delete, loop (or all)");
  optimize->add_option("--threshold-mult", o.threshold_mult,
                       "Pixel threshold multiplier")
      ->check(CLI::Range(1.0, 1e9));
  optimize->add_option("--threshold-floor", o.threshold_floor,
                       "Minimum pixel threshold (default 0 sim, 25 live)")
      ->check(CLI::NonNegativeNumber);
  optimize->add_option("--timeout-mult", o.timeout_mult,
                       "Timeout as a multiple of the oracle load time")
      ->check(CLI::PositiveNumber);
  optimize->add_option("--max-iterations", o.max_iterations, "Attempt budget")
      ->check(CLI::PositiveNumber);
  optimize->add_option("--post-samples", o.post_samples,
                       "Loads per state in the final comparison")
      ->check(CLI::PositiveNumber);
  optimize->add_flag("--loop-per-file", o.loop_per_file,
                     "Rewrite every loop site of a file in one candidate");

  CLI::App* report = app.add_subcommand("report", "Summarize a finished run");
  report->add_option("run_dir", o.run_dir, "Output directory of optimize")
      ->required();

  // The subcommand defaults differ; remember which ones were given.
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    if (optimize->parsed()) {
      if (optimize->count("--samples") == 0) o.samples = 5;
      if (optimize->count("--discard") == 0) o.discard = 2;
    }
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (trace->parsed()) return CmdTrace(o, out);
    if (optimize->parsed()) return CmdOptimize(o, out);
    return CmdReport(o, out);
  } catch (const CLI::ValidationError& e) {
    err << "pageopt: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "pageopt: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace pageopt::cli
