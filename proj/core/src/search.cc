#include "pageopt/search.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "pageopt/ast.h"
#include "pageopt/errors.h"
#include "pageopt/sim.h"

namespace pageopt {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// Welford: constant input gives exactly that mean and zero variance.
Stat Summarize(const std::vector<double>& values) {
  Stat s;
  double m2 = 0.0;
  size_t k = 0;
  for (double v : values) {
    ++k;
    double delta = v - s.mean;
    s.mean += delta / double(k);
    m2 += delta * (v - s.mean);
  }
  if (k > 1) s.variance = m2 / double(k - 1);
  return s;
}

PerformanceSummary SamplePerformance(Harness& harness, const AppState& app,
                                     int n, int discard, double timeout_ms) {
  if (n <= discard || discard < 0) {
    throw std::invalid_argument("need n > discard >= 0");
  }
  std::vector<double> time, events, depth;
  PerformanceSummary out;
  for (int i = 0; i < n; ++i) {
    HarnessResult r = harness.Evaluate(app, timeout_ms);
    if (i < discard) continue;
    LoadMetrics m = MetricsOf(r);
    time.push_back(m.load_time_ms);
    events.push_back(double(m.event_count));
    depth.push_back(double(m.max_depth));
    if (!r.loaded) ++out.not_loaded;
  }
  out.samples = n - discard;
  out.load_time_ms = Summarize(time);
  out.event_count = Summarize(events);
  out.max_depth = Summarize(depth);
  return out;
}

std::string_view OutcomeName(Outcome outcome) {
  switch (outcome) {
    case Outcome::kKept: return "kept";
    case Outcome::kReverted: return "reverted";
    case Outcome::kInapplicable: return "inapplicable";
  }
  return "?";
}

// --- diff ---------------------------------------------------------------

namespace {

std::vector<std::string_view> SplitLines(std::string_view text) {
  std::vector<std::string_view> lines;
  size_t start = 0;
  while (start < text.size()) {
    size_t nl = text.find('\n', start);
    size_t end = nl == std::string_view::npos ? text.size() : nl + 1;
    lines.push_back(text.substr(start, end - start));
    start = end;
  }
  return lines;
}

enum class EditKind { kKeep, kRemove, kInsert };
struct Edit {
  EditKind kind;
  size_t a;  // Index into the old lines (kKeep, kRemove).
  size_t b;  // Index into the new lines (kKeep, kInsert).
};

// Myers' O(ND) shortest edit script.
std::vector<Edit> ShortestEdit(const std::vector<std::string_view>& a,
                               const std::vector<std::string_view>& b) {
  const long n = long(a.size());
  const long m = long(b.size());
  const long max = n + m;
  std::vector<long> v(size_t(2 * max + 2), 0);
  std::vector<std::vector<long>> trace;
  auto at = [&](long k) -> long& { return v[size_t(k + max + 1)]; };
  long d_end = 0;
  for (long d = 0; d <= max; ++d) {
    trace.push_back(v);
    bool done = false;
    for (long k = -d; k <= d; k += 2) {
      long x = (k == -d || (k != d && at(k - 1) < at(k + 1))) ? at(k + 1)
                                                              : at(k - 1) + 1;
      long y = x - k;
      while (x < n && y < m && a[size_t(x)] == b[size_t(y)]) ++x, ++y;
      at(k) = x;
      if (x >= n && y >= m) {
        done = true;
        break;
      }
    }
    if (done) {
      d_end = d;
      break;
    }
  }
  std::vector<Edit> edits;
  long x = n, y = m;
  for (long d = d_end; d > 0; --d) {
    const std::vector<long>& prev = trace[size_t(d)];
    auto p = [&](long k) { return prev[size_t(k + max + 1)]; };
    long k = x - y;
    long prev_k = (k == -d || (k != d && p(k - 1) < p(k + 1))) ? k + 1 : k - 1;
    long prev_x = p(prev_k);
    long prev_y = prev_x - prev_k;
    while (x > prev_x && y > prev_y) {
      --x, --y;
      edits.push_back({EditKind::kKeep, size_t(x), size_t(y)});
    }
    if (x == prev_x) {
      --y;
      edits.push_back({EditKind::kInsert, size_t(x), size_t(y)});
    } else {
      --x;
      edits.push_back({EditKind::kRemove, size_t(x), size_t(y)});
    }
  }
  while (x > 0 && y > 0) {
    --x, --y;
    edits.push_back({EditKind::kKeep, size_t(x), size_t(y)});
  }
  std::reverse(edits.begin(), edits.end());
  return edits;
}

void AppendLine(std::string& out, char tag, std::string_view line) {
  out += tag;
  out += line;
  if (line.empty() || line.back() != '\n') {
    out += "\n\\ No newline at end of file\n";
  }
}

std::string RangeText(size_t first, size_t count) {
  // `first` is the 0-based index of the range's first line.
  size_t start = count == 0 ? first : first + 1;
  if (count == 1) return std::to_string(start);
  return std::to_string(start) + "," + std::to_string(count);
}

int64_t NonBlankLines(std::string_view text) {
  int64_t count = 0;
  for (std::string_view line : SplitLines(text)) {
    if (line.find_first_not_of(" \t\r\n") != std::string_view::npos) ++count;
  }
  return count;
}

}  // namespace

std::string UnifiedDiff(std::string_view before, std::string_view after,
                        std::string_view file_name) {
  if (before == after) return "";
  constexpr size_t kContext = 3;
  std::vector<std::string_view> a = SplitLines(before);
  std::vector<std::string_view> b = SplitLines(after);
  std::vector<Edit> edits = ShortestEdit(a, b);

  std::string out = "--- a/" + std::string(file_name) + "\n+++ b/" +
                    std::string(file_name) + "\n";
  size_t i = 0;
  while (i < edits.size()) {
    if (edits[i].kind == EditKind::kKeep) {
      ++i;
      continue;
    }
    // Hunk spans [lo, hi) of the edit list.
    size_t lo = i >= kContext ? i - kContext : 0;
    size_t hi = i;
    while (true) {
      while (hi < edits.size() && edits[hi].kind != EditKind::kKeep) ++hi;
      size_t keep_run = hi;
      while (keep_run < edits.size() && edits[keep_run].kind == EditKind::kKeep) {
        ++keep_run;
      }
      if (keep_run < edits.size() && keep_run - hi <= 2 * kContext) {
        hi = keep_run;
        continue;
      }
      hi = std::min(keep_run, hi + kContext);
      break;
    }
    // Both ranges start where the first edit of the hunk sits.
    size_t a_first = edits[lo].a;
    size_t b_first = edits[lo].b;
    size_t a_count = 0, b_count = 0;
    for (size_t j = lo; j < hi; ++j) {
      if (edits[j].kind != EditKind::kInsert) ++a_count;
      if (edits[j].kind != EditKind::kRemove) ++b_count;
    }
    out += "@@ -" + RangeText(a_first, a_count) + " +" +
           RangeText(b_first, b_count) + " @@\n";
    for (size_t j = lo; j < hi; ++j) {
      const Edit& e = edits[j];
      switch (e.kind) {
        case EditKind::kKeep: AppendLine(out, ' ', a[e.a]); break;
        case EditKind::kRemove: AppendLine(out, '-', a[e.a]); break;
        case EditKind::kInsert: AppendLine(out, '+', b[e.b]); break;
      }
    }
    i = hi;
  }
  return out;
}

std::string Patch::Text() const {
  std::string out;
  for (const FileDiff& f : files) out += f.text;
  return out;
}

Patch EmitPatch(const AppState& pristine, const AppState& final_state) {
  std::vector<std::string> names = pristine.FileNames();
  std::sort(names.begin(), names.end());
  Patch patch;
  for (const std::string& name : names) {
    std::string diff =
        UnifiedDiff(ReadFileBytes(pristine.root_dir / name),
                    ReadFileBytes(final_state.root_dir / name), name);
    if (!diff.empty()) patch.files.push_back({name, std::move(diff)});
  }
  return patch;
}

// --- report -------------------------------------------------------------

namespace {

ordered_json StatJson(const Stat& s) {
  return {{"mean", s.mean}, {"variance", s.variance}};
}

ordered_json SummaryJson(const PerformanceSummary& p) {
  return {{"samples", p.samples},
          {"notLoaded", p.not_loaded},
          {"loadTimeMs", StatJson(p.load_time_ms)},
          {"eventCount", StatJson(p.event_count)},
          {"maxDepth", StatJson(p.max_depth)}};
}

ordered_json MetricsJson(const LoadMetrics& m) {
  return {{"loadTimeMs", m.load_time_ms},
          {"eventCount", m.event_count},
          {"maxDepth", m.max_depth}};
}

ordered_json PerOperator(const std::map<Operator, int>& counts) {
  ordered_json out = ordered_json::object();
  for (Operator op : {Operator::kDelete, Operator::kLoopRewrite}) {
    auto it = counts.find(op);
    out[std::string(OperatorName(op))] = it == counts.end() ? 0 : it->second;
  }
  return out;
}

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string ReportJson(const OptimizationReport& r) {
  ordered_json oracle = {
      {"metrics", MetricsJson(r.oracle.metrics)},
      {"threshold", r.oracle.threshold},
      {"timeoutMs", r.oracle.timeout_ms},
      {"samples", ordered_json::array()}};
  for (const LoadMetrics& m : r.oracle.samples) {
    oracle["samples"].push_back(MetricsJson(m));
  }
  ordered_json doc = {
      {"harness", r.harness},
      {"sentinelPollMs", 50},
      {"oracle", oracle},
      {"original", SummaryJson(r.original)},
      {"final", SummaryJson(r.final)},
      {"deltas",
       {{"timePct", r.deltas.time_pct},
        {"eventsPct", r.deltas.events_pct},
        {"depthPct", r.deltas.depth_pct}}},
      {"attempts", r.attempts},
      {"kept", r.kept},
      {"reverted", r.reverted},
      {"inapplicable", r.inapplicable},
      {"attemptsByOperator", PerOperator(r.attempts_by_op)},
      {"keptByOperator", PerOperator(r.kept_by_op)},
      {"inapplicableByOperator", PerOperator(r.inapplicable_by_op)},
      {"oracleTargets", r.oracle_targets},
      {"oracleMentions", r.oracle_mentions},
      {"neutralRatePct", r.neutral_rate_pct},
      {"loopNeutralRatePct", r.loop_neutral_rate_pct},
      {"linesDeleted", r.lines_deleted},
      {"linesTotal", r.lines_total},
      {"budgetExhausted", r.budget_exhausted},
      {"finalPasses", r.final_passes},
      {"finalPixelDiff", r.final_pixel_diff},
      {"perIterationWallClockMs", r.per_iteration_wall_clock_ms},
      {"keptMutations", r.kept_ids}};
  return doc.dump(2) + "\n";
}

std::string MetricsCsv(const std::vector<IterationRecord>& log) {
  std::string out = std::string(kMetricsCsvHeader) + "\n";
  for (const IterationRecord& r : log) {
    out += std::to_string(r.iteration) + "," + r.candidate_id + "," +
           std::string(OperatorName(r.op)) + "," +
           std::string(OutcomeName(r.outcome)) + "," +
           Fixed(r.metrics.load_time_ms, 3) + "," +
           std::to_string(r.metrics.event_count) + "," +
           std::to_string(r.metrics.max_depth) + "," +
           std::to_string(r.pixel_diff) + "," + Fixed(r.wall_clock_ms, 3) +
           "\n";
  }
  return out;
}

// --- search loop --------------------------------------------------------

namespace {

double PercentDrop(double before, double after) {
  return before == 0.0 ? 0.0 : 100.0 * (before - after) / before;
}

LoadMetrics SafeMetrics(const HarnessResult& r) {
  try {
    return MetricsOf(r);
  } catch (const Error&) {
    return {};  // A malformed live trace is logged as zeros.
  }
}

// Re-keys tried candidates of `file` after its text went from `before` to
// `after`: spans outside the changed region shift, the rest are dropped.
void RemapAttempted(std::map<std::string, MutationCandidate>& attempted,
                    std::set<std::string>& ids, const std::string& file,
                    std::string_view before, std::string_view after) {
  size_t prefix = 0;
  size_t limit = std::min(before.size(), after.size());
  while (prefix < limit && before[prefix] == after[prefix]) ++prefix;
  size_t suffix = 0;
  while (suffix < limit - prefix &&
         before[before.size() - 1 - suffix] == after[after.size() - 1 - suffix]) {
    ++suffix;
  }
  size_t changed_end = before.size() - suffix;
  long delta = long(after.size()) - long(before.size());
  std::map<std::string, MutationCandidate> next;
  for (auto& [id, c] : attempted) {
    if (c.file_name != file) {
      next.emplace(id, std::move(c));
      continue;
    }
    Span s = c.span.span;
    if (s.end <= prefix) {
      // Unchanged.
    } else if (s.start >= changed_end) {
      s.start = size_t(long(s.start) + delta);
      s.end = size_t(long(s.end) + delta);
    } else {
      continue;
    }
    c.span.span = s;
    c.id = CandidateId(c.file_name, c.op, s, c.removed_text, c.replacement);
    ids.insert(c.id);
    next.emplace(c.id, std::move(c));
  }
  attempted = std::move(next);
}

}  // namespace

OptimizationResult Optimize(const AppState& pristine, const fs::path& work_dir,
                            Harness& harness, const SearchConfig& config,
                            const SearchObserver& observer) {
  if (config.max_iterations < 1) throw std::invalid_argument("maxIterations < 1");
  if (config.post_samples < 1) throw std::invalid_argument("postSamples < 1");
  using Clock = std::chrono::steady_clock;

  OptimizationResult result;
  OptimizationReport& report = result.report;
  report.harness = harness.Name();
  AppState work = CopyApp(pristine, work_dir);

  OracleOptions oracle_options;
  oracle_options.samples = config.oracle_samples;
  oracle_options.discard = config.warmup_discard;
  oracle_options.threshold_multiplier = config.threshold_multiplier;
  oracle_options.threshold_floor = config.threshold_floor;
  oracle_options.timeout_multiplier = config.timeout_multiplier;
  oracle_options.timeout_floor_ms = config.timeout_floor_ms;
  report.oracle = WarmupOracle(harness, work, oracle_options);
  const OracleProfile& oracle = report.oracle;

  auto evaluate = [&](const std::string& label) {
    HarnessResult r = harness.Evaluate(work, oracle.timeout_ms);
    if (observer.on_evaluation) observer.on_evaluation(label, r);
    return r;
  };

  HarnessResult current = evaluate("oracle");
  if (!Judge(oracle.screenshot, current.screenshot, oracle.threshold,
             current.loaded)
           .pass) {
    throw OracleNeverLoads("oracle fails its own correctness check");
  }

  std::vector<std::string> scripts = work.ScriptFiles();
  std::map<std::string, std::string> texts;
  for (const std::string& f : work.FileNames()) {
    texts[f] = ReadFileBytes(work.root_dir / f);
  }
  std::set<std::string> parseable;
  for (const std::string& f : scripts) {
    try {
      ParseSource(texts[f]);
      parseable.insert(f);
    } catch (const SyntaxError&) {
      // Outside the supported subset: served as-is, never mutated.
    }
  }

  try {
    std::vector<CallSiteTarget> targets =
        ExtractTargets(BuildCallTree(current.events), work.FileNames());
    report.oracle_targets = static_cast<int>(targets.size());
    for (const CallSiteTarget& t : targets) {
      if (!parseable.count(t.file_name)) continue;
      report.oracle_mentions += static_cast<int>(
          FindMentions(ParseSource(texts[t.file_name]), t.method_name).size());
    }
  } catch (const Error&) {
  }

  std::map<std::string, MutationCandidate> attempted;
  std::set<std::string> attempted_ids;

  auto enumerate = [&] {
    std::vector<CallSiteTarget> targets;
    try {
      targets = ExtractTargets(BuildCallTree(current.events), work.FileNames());
    } catch (const Error&) {
      // No usable trace: deletions have nothing to aim at.
    }
    std::vector<MutationCandidate> out;
    for (Operator op : config.operators) {
      for (const std::string& f : scripts) {
        if (!parseable.count(f)) continue;
        Ast ast = ParseSource(texts[f]);
        std::vector<MutationCandidate> found =
            op == Operator::kDelete ? EnumerateDeletions(ast, f, targets)
            : config.loop_per_file  ? EnumerateLoopFile(ast, f)
                                    : EnumerateLoopSites(ast, f);
        for (MutationCandidate& c : found) {
          if (!attempted_ids.count(c.id)) out.push_back(std::move(c));
        }
      }
    }
    return out;
  };

  auto snapshot = [&] {
    std::map<std::string, uint64_t> hashes;
    for (const std::string& f : work.FileNames()) {
      hashes[f] = Fnv1a64(ReadFileBytes(work.root_dir / f));
    }
    return hashes;
  };

  std::vector<MutationCandidate> queue = enumerate();
  size_t next = 0;
  while (true) {
    while (next < queue.size() && attempted_ids.count(queue[next].id)) ++next;
    if (next >= queue.size()) break;
    if (report.attempts >= config.max_iterations) {
      report.budget_exhausted = true;
      break;
    }
    const MutationCandidate c = queue[next++];
    Clock::time_point started = Clock::now();
    attempted.emplace(c.id, c);
    attempted_ids.insert(c.id);
    ++report.attempts;
    ++report.attempts_by_op[c.op];

    IterationRecord rec;
    rec.iteration = report.attempts;
    rec.candidate_id = c.id;
    rec.op = c.op;
    rec.file_name = c.file_name;
    rec.preview = c.preview;

    const std::string before = texts[c.file_name];
    MutationOutcome applied = ApplyCandidate(before, c);
    if (!applied.applicable) {
      rec.outcome = Outcome::kInapplicable;
      ++report.inapplicable;
      ++report.inapplicable_by_op[c.op];
    } else {
      std::map<std::string, uint64_t> pre = snapshot();
      const std::string& after = applied.source.new_text;
      WriteFileBytes(work.root_dir / c.file_name, after);
      HarnessResult r = evaluate(std::to_string(rec.iteration));
      CorrectnessVerdict verdict =
          Judge(oracle.screenshot, r.screenshot, oracle.threshold, r.loaded);
      rec.metrics = SafeMetrics(r);
      rec.pixel_diff = verdict.pixel_diff;
      rec.loaded = r.loaded;
      rec.wall_clock_ms = r.wall_clock_ms;
      if (verdict.pass) {
        rec.outcome = Outcome::kKept;
        ++report.kept;
        ++report.kept_by_op[c.op];
        report.kept_ids.push_back(c.id);
        texts[c.file_name] = after;
        RemapAttempted(attempted, attempted_ids, c.file_name, before, after);
        for (const std::string& f : parseable) {
          try {
            ParseSource(ReadFileBytes(work.root_dir / f));
          } catch (const SyntaxError& e) {
            throw Error("kept mutation left " + f + " unparseable: " + e.what());
          }
        }
        current = std::move(r);
        queue = enumerate();
        next = 0;
      } else {
        rec.outcome = Outcome::kReverted;
        ++report.reverted;
        WriteFileBytes(work.root_dir / c.file_name, before);
        if (snapshot() != pre) {
          throw Error("revert of " + c.id + " did not restore " + c.file_name);
        }
      }
    }
    rec.elapsed_s =
        std::chrono::duration<double>(Clock::now() - started).count();
    report.per_iteration_wall_clock_ms.push_back(rec.wall_clock_ms);
    if (observer.on_iteration) observer.on_iteration(rec);
    result.log.push_back(std::move(rec));
  }

  HarnessResult last = evaluate("final");
  CorrectnessVerdict final_verdict =
      Judge(oracle.screenshot, last.screenshot, oracle.threshold, last.loaded);
  report.final_passes = final_verdict.pass;
  report.final_pixel_diff = final_verdict.pixel_diff;

  int discard = std::min(config.warmup_discard, config.post_samples - 1);
  report.original = SamplePerformance(harness, pristine, config.post_samples,
                                      discard, oracle.timeout_ms);
  report.final = SamplePerformance(harness, work, config.post_samples, discard,
                                   oracle.timeout_ms);
  report.deltas.time_pct = PercentDrop(report.original.load_time_ms.mean,
                                       report.final.load_time_ms.mean);
  report.deltas.events_pct = PercentDrop(report.original.event_count.mean,
                                         report.final.event_count.mean);
  report.deltas.depth_pct = PercentDrop(report.original.max_depth.mean,
                                        report.final.max_depth.mean);

  auto rate = [&](Operator op) {
    int denominator = report.attempts_by_op[op] - report.inapplicable_by_op[op];
    return denominator <= 0 ? 0.0
                            : 100.0 * report.kept_by_op[op] / denominator;
  };
  report.neutral_rate_pct = rate(Operator::kDelete);
  report.loop_neutral_rate_pct = rate(Operator::kLoopRewrite);

  for (const std::string& f : scripts) {
    int64_t original = NonBlankLines(ReadFileBytes(pristine.root_dir / f));
    report.lines_total += original;
    report.lines_deleted += original - NonBlankLines(texts[f]);
  }

  result.patch = EmitPatch(pristine, work);
  result.patch.kept = report.kept_ids;
  result.final_state = work;
  return result;
}

}  // namespace pageopt
