#include "pageopt/harness.h"

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pageopt/errors.h"
#include "pageopt/sim.h"

namespace pageopt {

namespace fs = std::filesystem;
using nlohmann::json;

const std::string& AppState::PageFile() const {
  for (const ManifestEntry& e : manifest) {
    if (e.role == FileRole::kPage) return e.file_name;
  }
  throw InvalidApp("manifest has no page");
}

std::vector<std::string> AppState::ScriptFiles() const {
  std::vector<std::string> out;
  for (const ManifestEntry& e : manifest) {
    if (e.role == FileRole::kScript) out.push_back(e.file_name);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> AppState::FileNames() const {
  std::vector<std::string> out;
  for (const ManifestEntry& e : manifest) out.push_back(e.file_name);
  return out;
}

std::string ReadFileBytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void WriteFileBytes(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

AppState LoadApp(const fs::path& root_dir) {
  fs::path manifest_path = root_dir / kManifestFile;
  if (!fs::is_regular_file(manifest_path)) {
    throw InvalidApp("no " + std::string(kManifestFile) + " in " +
                     root_dir.string());
  }
  AppState app;
  app.root_dir = root_dir;
  try {
    json doc = json::parse(ReadFileBytes(manifest_path));
    app.sentinel_text = doc.at("sentinelText").get<std::string>();
    for (const json& f : doc.at("files")) {
      ManifestEntry entry;
      entry.file_name = f.at("name").get<std::string>();
      std::string role = f.at("role").get<std::string>();
      if (role == "page") {
        entry.role = FileRole::kPage;
      } else if (role == "script") {
        entry.role = FileRole::kScript;
      } else {
        throw InvalidApp("unknown role '" + role + "'");
      }
      app.manifest.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw InvalidApp(std::string("bad manifest: ") + e.what());
  }
  if (app.sentinel_text.empty()) throw InvalidApp("empty sentinelText");
  int pages = 0;
  for (const ManifestEntry& e : app.manifest) {
    if (e.role == FileRole::kPage) ++pages;
    if (!fs::is_regular_file(root_dir / e.file_name)) {
      throw InvalidApp("missing file " + e.file_name);
    }
  }
  if (pages != 1) throw InvalidApp("manifest must list exactly one page");
  return app;
}

AppState CopyApp(const AppState& app, const fs::path& dest) {
  fs::create_directories(dest);
  fs::copy_file(app.root_dir / kManifestFile, dest / kManifestFile,
                fs::copy_options::overwrite_existing);
  for (const ManifestEntry& e : app.manifest) {
    WriteFileBytes(dest / e.file_name, ReadFileBytes(app.root_dir / e.file_name));
  }
  AppState copy = app;
  copy.root_dir = dest;
  return copy;
}

std::vector<std::string> PageScripts(std::string_view html) {
  static const std::regex kScript(
      R"re(<script\b[^>]*\bsrc\s*=\s*["']([^"']+)["'])re",
      std::regex::icase);
  std::vector<std::string> out;
  std::string text(html);
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kScript);
       it != std::sregex_iterator(); ++it) {
    std::string src = (*it)[1];
    if (src.starts_with("./")) src.erase(0, 2);
    while (src.starts_with("/")) src.erase(0, 1);
    out.push_back(src);
  }
  return out;
}

LoadMetrics MetricsOf(const HarnessResult& result) {
  return ComputeMetrics(BuildCallTree(result.events));
}

HarnessResult SimHarness::Evaluate(const AppState& app, double timeout_ms) {
  std::string html = ReadFileBytes(app.root_dir / app.PageFile());
  std::vector<SimScript> scripts;
  for (const std::string& src : PageScripts(html)) {
    fs::path path = app.root_dir / src;
    // A browser skips a script it cannot fetch; so do we.
    if (!fs::is_regular_file(path)) continue;
    scripts.push_back({src, ReadFileBytes(path)});
  }
  json key = {app.sentinel_text, timeout_ms, step_budget_};
  for (const SimScript& s : scripts) key.push_back({s.file_name, s.source});
  std::string cache_key = key.dump();
  if (auto it = cache_.find(cache_key); it != cache_.end()) return it->second;

  SimOptions options;
  options.sentinel_text = app.sentinel_text;
  options.timeout_ms = timeout_ms;
  options.step_budget = step_budget_;
  SimOutcome outcome = RunSimPage(scripts, options);
  ++runs_;
  HarnessResult result;
  result.events = std::move(outcome.events);
  result.screenshot = std::move(outcome.framebuffer);
  result.loaded = outcome.loaded;
  result.timed_out = outcome.timed_out;
  result.wall_clock_ms = outcome.elapsed_ms;
  result.failure = std::move(outcome.crash_message);
  if (cache_size_ > 0) {
    if (cache_order_.size() >= cache_size_) {
      cache_.erase(cache_order_.front());
      cache_order_.pop_front();
    }
    cache_.emplace(cache_key, result);
    cache_order_.push_back(std::move(cache_key));
  }
  return result;
}

LoadMetrics MedianMetrics(std::vector<LoadMetrics> samples) {
  if (samples.empty()) return {};
  size_t n = samples.size();
  auto median = [&](auto field) {
    std::vector<std::remove_cvref_t<decltype(samples[0].*field)>> values;
    for (const LoadMetrics& m : samples) values.push_back(m.*field);
    std::sort(values.begin(), values.end());
    if (n % 2 == 1) return values[n / 2];
    return (values[n / 2 - 1] + values[n / 2]) / 2;
  };
  LoadMetrics out;
  out.load_time_ms = median(&LoadMetrics::load_time_ms);
  out.event_count = median(&LoadMetrics::event_count);
  out.max_depth = median(&LoadMetrics::max_depth);
  return out;
}

HarnessResult CategoryFilterHarness::Evaluate(const AppState& app,
                                              double timeout_ms) {
  HarnessResult r = inner_->Evaluate(app, timeout_ms);
  r.events = FilterByCategory(r.events, allowed_);
  return r;
}

OracleProfile WarmupOracle(Harness& harness, const AppState& app,
                           const OracleOptions& options) {
  if (options.samples <= options.discard || options.discard < 0) {
    throw std::invalid_argument("need samples > discard >= 0");
  }
  OracleProfile profile;
  std::vector<LoadMetrics> kept;
  for (int i = 0; i < options.samples; ++i) {
    HarnessResult r = harness.Evaluate(app, options.sample_timeout_ms);
    LoadMetrics m = MetricsOf(r);
    profile.samples.push_back(m);
    if (i >= options.discard && r.loaded) kept.push_back(m);
  }
  if (kept.empty()) {
    throw OracleNeverLoads("sentinel '" + app.sentinel_text +
                           "' never appeared while sampling the oracle");
  }
  profile.metrics = MedianMetrics(kept);

  HarnessResult a = harness.Evaluate(app, options.sample_timeout_ms);
  HarnessResult b = harness.Evaluate(app, options.sample_timeout_ms);
  if (!a.loaded || !b.loaded) {
    throw OracleNeverLoads("oracle failed to load during calibration");
  }
  profile.threshold =
      CalibrateThreshold(a.screenshot, b.screenshot,
                         options.threshold_multiplier, options.threshold_floor);
  profile.screenshot = std::move(a.screenshot);
  profile.timeout_ms =
      std::max(options.timeout_multiplier * profile.metrics.load_time_ms,
               options.timeout_floor_ms);
  return profile;
}

}  // namespace pageopt
