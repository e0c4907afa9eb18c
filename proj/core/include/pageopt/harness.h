#ifndef PAGEOPT_HARNESS_H_
#define PAGEOPT_HARNESS_H_

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "pageopt/correctness.h"
#include "pageopt/trace.h"

namespace pageopt {

enum class FileRole { kPage, kScript };

struct ManifestEntry {
  std::string file_name;  // Relative to the app root, '/'-separated.
  FileRole role = FileRole::kScript;
};

// An app on disk. The manifest lives in `manifest.json` at the root:
//   {"sentinelText": "...", "files": [{"name": "index.html", "role": "page"},
//                                     {"name": "app.js", "role": "script"}]}
struct AppState {
  std::filesystem::path root_dir;
  std::vector<ManifestEntry> manifest;
  std::string sentinel_text;

  const std::string& PageFile() const;
  std::vector<std::string> ScriptFiles() const;  // Lexicographic.
  std::vector<std::string> FileNames() const;    // Manifest order.
};

inline constexpr const char* kManifestFile = "manifest.json";

// Throws InvalidApp for a missing or malformed manifest, missing files, or a
// page count other than one.
AppState LoadApp(const std::filesystem::path& root_dir);

// Copies the manifest and every listed file into `dest` (created if needed,
// existing listed files overwritten) and returns the copy.
AppState CopyApp(const AppState& app, const std::filesystem::path& dest);

std::string ReadFileBytes(const std::filesystem::path& path);
void WriteFileBytes(const std::filesystem::path& path, std::string_view bytes);

// `<script src="...">` references of a page, in document order.
std::vector<std::string> PageScripts(std::string_view html);

struct HarnessResult {
  std::vector<TraceEvent> events;  // May be partial when timed out.
  Screenshot screenshot;
  bool loaded = false;
  bool timed_out = false;
  double wall_clock_ms = 0.0;  // Virtual time for the sim harness.
  std::string failure;         // Crash or protocol detail, if any.
};

LoadMetrics MetricsOf(const HarnessResult& result);

// One evaluation at a time per instance.
class Harness {
 public:
  virtual ~Harness() = default;
  virtual HarnessResult Evaluate(const AppState& app, double timeout_ms) = 0;
  virtual std::string Name() const = 0;
};

// Runs the page's scripts on the deterministic sim runtime. Results are a
// pure function of the page, the script bytes, the sentinel and the timeout,
// so recent ones are memoized on exactly that key.
class SimHarness : public Harness {
 public:
  explicit SimHarness(int64_t step_budget = 1'000'000, size_t cache_size = 16)
      : step_budget_(step_budget), cache_size_(cache_size) {}
  HarnessResult Evaluate(const AppState& app, double timeout_ms) override;
  std::string Name() const override { return "sim"; }
  int64_t runs() const { return runs_; }  // Evaluations not served by cache.

 private:
  int64_t step_budget_;
  size_t cache_size_;
  int64_t runs_ = 0;
  std::map<std::string, HarnessResult> cache_;
  std::deque<std::string> cache_order_;
};

// Passes through another harness's results with only the events whose
// category is allowed. Everything downstream (metrics, targets, saved
// traces) sees the filtered list.
class CategoryFilterHarness : public Harness {
 public:
  CategoryFilterHarness(std::unique_ptr<Harness> inner,
                        std::set<std::string> allowed)
      : inner_(std::move(inner)), allowed_(std::move(allowed)) {}
  HarnessResult Evaluate(const AppState& app, double timeout_ms) override;
  std::string Name() const override { return inner_->Name(); }

 private:
  std::unique_ptr<Harness> inner_;
  std::set<std::string> allowed_;
};

struct OracleProfile {
  LoadMetrics metrics;  // Per-metric median of the kept samples.
  Screenshot screenshot;
  int64_t threshold = 0;
  double timeout_ms = 0.0;
  std::vector<LoadMetrics> samples;  // All of them, discarded ones included.
};

struct OracleOptions {
  int samples = 5;
  int discard = 2;
  double threshold_multiplier = 3.0;
  int64_t threshold_floor = 0;
  double timeout_multiplier = 2.0;
  double timeout_floor_ms = 1000.0;
  double sample_timeout_ms = 30000.0;  // Budget for the warm-up loads.
};

// Medians use only samples that loaded. Throws OracleNeverLoads when none
// did, or when a calibration load misses the sentinel.
OracleProfile WarmupOracle(Harness& harness, const AppState& app,
                           const OracleOptions& options);

// Median per metric; even counts average the middle pair (counts round
// down).
LoadMetrics MedianMetrics(std::vector<LoadMetrics> samples);

}  // namespace pageopt

#endif  // PAGEOPT_HARNESS_H_
