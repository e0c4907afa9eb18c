#ifndef PAGEOPT_SEARCH_H_
#define PAGEOPT_SEARCH_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "pageopt/harness.h"
#include "pageopt/operators.h"

namespace pageopt {

struct SearchConfig {
  std::vector<Operator> operators = {Operator::kDelete, Operator::kLoopRewrite};
  int max_iterations = 10000;
  int oracle_samples = 5;
  int warmup_discard = 2;
  double threshold_multiplier = 3.0;
  int64_t threshold_floor = 0;
  double timeout_multiplier = 2.0;
  double timeout_floor_ms = 1000.0;
  int post_samples = 1000;
  bool loop_per_file = false;  // One candidate rewriting every site of a file.
};

struct Stat {
  double mean = 0.0;
  double variance = 0.0;  // Sample variance; 0 for fewer than two values.

  friend bool operator==(const Stat&, const Stat&) = default;
};

Stat Summarize(const std::vector<double>& values);

struct PerformanceSummary {
  int samples = 0;
  Stat load_time_ms;
  Stat event_count;
  Stat max_depth;
  int not_loaded = 0;  // Samples that missed the sentinel.
};

// n evaluations, the first `discard` dropped.
PerformanceSummary SamplePerformance(Harness& harness, const AppState& app,
                                     int n, int discard, double timeout_ms);

enum class Outcome { kKept, kReverted, kInapplicable };
std::string_view OutcomeName(Outcome outcome);

struct IterationRecord {
  int iteration = 0;  // 1-based attempt number.
  std::string candidate_id;
  Operator op = Operator::kDelete;
  std::string file_name;
  std::string preview;
  Outcome outcome = Outcome::kReverted;
  LoadMetrics metrics;  // Zero for inapplicable candidates.
  int64_t pixel_diff = 0;
  bool loaded = false;
  double wall_clock_ms = 0.0;  // As reported by the harness.
  double elapsed_s = 0.0;      // Real time spent on the iteration.
};

struct FileDiff {
  std::string file_name;
  std::string text;  // Unified diff with a/ b/ headers; empty if unchanged.
};

struct Patch {
  std::vector<FileDiff> files;  // Lexicographic by name, changed files only.
  std::vector<std::string> kept;

  std::string Text() const;
  bool empty() const { return files.empty(); }
};

// Line diff with 3 lines of context, applicable with `patch -p1`.
std::string UnifiedDiff(std::string_view before, std::string_view after,
                        std::string_view file_name);

Patch EmitPatch(const AppState& pristine, const AppState& final_state);

struct MetricDeltas {
  double time_pct = 0.0;
  double events_pct = 0.0;
  double depth_pct = 0.0;
};

struct OptimizationReport {
  std::string harness;
  OracleProfile oracle;
  PerformanceSummary original;
  PerformanceSummary final;
  MetricDeltas deltas;  // 100 * (original - final) / original, on means.
  int attempts = 0;
  int kept = 0;
  int reverted = 0;
  int inapplicable = 0;
  std::map<Operator, int> attempts_by_op;
  std::map<Operator, int> kept_by_op;
  std::map<Operator, int> inapplicable_by_op;
  int oracle_targets = 0;         // (method, file) pairs in the oracle trace.
  int oracle_mentions = 0;        // Their mentions across the sources.
  double neutral_rate_pct = 0.0;  // Delete operator only.
  double loop_neutral_rate_pct = 0.0;
  int64_t lines_deleted = 0;
  int64_t lines_total = 0;
  bool budget_exhausted = false;
  bool final_passes = false;
  int64_t final_pixel_diff = 0;
  std::vector<double> per_iteration_wall_clock_ms;
  std::vector<std::string> kept_ids;
};

// Canonical JSON; identical inputs give identical bytes.
std::string ReportJson(const OptimizationReport& report);
std::string MetricsCsv(const std::vector<IterationRecord>& log);
inline constexpr const char* kMetricsCsvHeader =
    "iteration,candidateId,operator,outcome,loadTimeMs,eventCount,maxDepth,"
    "pixelDiff,wallClockMs";

struct OptimizationResult {
  OptimizationReport report;
  Patch patch;
  std::vector<IterationRecord> log;
  AppState final_state;
};

// Per-evaluation artifacts, called as they are produced. `label` is
// "oracle" or the iteration number.
struct SearchObserver {
  std::function<void(const std::string& label, const HarnessResult&)>
      on_evaluation;
  std::function<void(const IterationRecord&)> on_iteration;
};

// Copies `pristine` into `work_dir` and runs the greedy keep-if-correct
// loop there; `pristine` is never written. Candidate order: operators as
// configured, files lexicographically, then spans from last to first. After
// a kept mutation the candidates are enumerated afresh from the passing
// evaluation's trace; ids already tried are skipped. Throws OracleNeverLoads.
// Throws Error if a revert or a kept mutation leaves the working copy in an
// unexpected state.
OptimizationResult Optimize(const AppState& pristine,
                            const std::filesystem::path& work_dir,
                            Harness& harness, const SearchConfig& config,
                            const SearchObserver& observer = {});

}  // namespace pageopt

#endif  // PAGEOPT_SEARCH_H_
