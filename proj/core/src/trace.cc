#include "pageopt/trace.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>
#include <utility>

#include <nlohmann/json.hpp>

#include "pageopt/errors.h"

namespace pageopt {
namespace {

using Json = nlohmann::json;
using ThreadKey = std::pair<int64_t, int64_t>;

ThreadKey KeyOf(const TraceEvent& e) { return {e.process_id, e.thread_id}; }

std::optional<int64_t> ReadInteger(const Json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) return std::nullopt;
  if (it->is_number_integer()) return it->get<int64_t>();
  if (it->is_number_float()) {
    double v = it->get<double>();
    if (!std::isfinite(v)) return std::nullopt;
    return static_cast<int64_t>(std::llround(v));
  }
  return std::nullopt;
}

std::optional<std::string> ReadString(const Json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) return std::nullopt;
  return it->get<std::string>();
}

// Returns nullopt for malformed events; sets *unknown_phase for phases we
// do not model.
std::optional<TraceEvent> DecodeEvent(const Json& raw, bool* unknown_phase) {
  *unknown_phase = false;
  if (!raw.is_object()) return std::nullopt;
  auto ph = ReadString(raw, "ph");
  if (!ph || ph->size() != 1) return std::nullopt;
  TraceEvent event;
  switch ((*ph)[0]) {
    case 'B':
      event.phase = Phase::kBegin;
      break;
    case 'E':
      event.phase = Phase::kEnd;
      break;
    case 'X':
      event.phase = Phase::kComplete;
      break;
    default:
      *unknown_phase = true;
      return std::nullopt;
  }
  auto ts = ReadInteger(raw, "ts");
  if (!ts) return std::nullopt;
  event.timestamp_us = *ts;
  if (event.phase == Phase::kComplete) {
    auto dur = ReadInteger(raw, "dur");
    if (!dur || *dur < 0) return std::nullopt;
    event.duration_us = *dur;
  }
  event.name = ReadString(raw, "name").value_or("");
  if (event.name.empty() && event.phase != Phase::kEnd) return std::nullopt;
  event.category = ReadString(raw, "cat").value_or("");
  event.process_id = ReadInteger(raw, "pid").value_or(0);
  event.thread_id = ReadInteger(raw, "tid").value_or(0);

  auto args = raw.find("args");
  if (args != raw.end() && args->is_object()) {
    if (auto url = ReadString(*args, "sourceUrl")) {
      event.source_url = std::move(url);
    }
    auto data = args->find("data");
    if (data != args->end() && data->is_object()) {
      if (auto url = ReadString(*data, "url"); url && !url->empty()) {
        if (!event.source_url) event.source_url = std::move(url);
      }
      if (auto fn = ReadString(*data, "functionName"); fn && !fn->empty()) {
        event.name = std::move(*fn);
      }
    }
  }
  return event;
}

void SortEvents(std::vector<TraceEvent>& events) {
  std::stable_sort(events.begin(), events.end(),
                   [](const TraceEvent& a, const TraceEvent& b) {
                     auto key = [](const TraceEvent& e) {
                       return std::make_pair(
                           e.timestamp_us,
                           e.phase == Phase::kComplete ? -e.duration_us : 0);
                     };
                     return key(a) < key(b);
                   });
}

// Checks B/E nesting per thread on timestamp-sorted events.
void ValidatePairs(const std::vector<TraceEvent>& events) {
  std::map<ThreadKey, std::vector<const TraceEvent*>> open;
  for (const TraceEvent& e : events) {
    if (e.phase == Phase::kBegin) {
      open[KeyOf(e)].push_back(&e);
    } else if (e.phase == Phase::kEnd) {
      auto& stack = open[KeyOf(e)];
      if (stack.empty()) {
        throw UnbalancedEvents("End event '" + e.name + "' at ts " +
                               std::to_string(e.timestamp_us) +
                               " has no open Begin on its thread");
      }
      if (!e.name.empty() && e.name != stack.back()->name) {
        throw UnbalancedEvents("End event '" + e.name + "' at ts " +
                               std::to_string(e.timestamp_us) +
                               " closes Begin '" + stack.back()->name + "'");
      }
      stack.pop_back();
    }
  }
  for (const auto& [key, stack] : open) {
    if (!stack.empty()) {
      throw UnbalancedEvents("Begin event '" + stack.back()->name +
                             "' at ts " +
                             std::to_string(stack.back()->timestamp_us) +
                             " is never closed");
    }
  }
}

struct FlatNode {
  TraceEvent event;
  std::vector<size_t> children;
};

CallNode Materialize(std::vector<FlatNode>& flat, size_t index) {
  CallNode node;
  node.event = std::move(flat[index].event);
  node.children.reserve(flat[index].children.size());
  for (size_t child : flat[index].children) {
    node.children.push_back(Materialize(flat, child));
  }
  return node;
}

}  // namespace

ParsedTrace ParseTrace(std::string_view bytes) {
  Json doc = Json::parse(bytes, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) {
    throw UnparseableDocument("trace is not valid JSON");
  }
  const Json* array = nullptr;
  if (doc.is_array()) {
    array = &doc;
  } else if (doc.is_object()) {
    auto it = doc.find("traceEvents");
    if (it != doc.end() && it->is_array()) array = &*it;
  }
  if (array == nullptr) {
    throw UnparseableDocument("trace document has no event array");
  }

  ParsedTrace out;
  out.events.reserve(array->size());
  for (const Json& raw : *array) {
    bool unknown_phase = false;
    auto event = DecodeEvent(raw, &unknown_phase);
    if (event) {
      out.events.push_back(std::move(*event));
      ++out.report.accepted;
    } else if (unknown_phase) {
      ++out.report.skipped_unknown_phase;
    } else {
      ++out.report.skipped_malformed;
    }
  }
  SortEvents(out.events);
  ValidatePairs(out.events);
  return out;
}

std::string SerializeTrace(const std::vector<TraceEvent>& events) {
  Json array = Json::array();
  for (const TraceEvent& e : events) {
    Json raw;
    raw["name"] = e.name;
    raw["cat"] = e.category;
    raw["ts"] = e.timestamp_us;
    raw["pid"] = e.process_id;
    raw["tid"] = e.thread_id;
    switch (e.phase) {
      case Phase::kBegin:
        raw["ph"] = "B";
        break;
      case Phase::kEnd:
        raw["ph"] = "E";
        break;
      case Phase::kComplete:
        raw["ph"] = "X";
        raw["dur"] = e.duration_us;
        break;
    }
    if (e.source_url) raw["args"]["sourceUrl"] = *e.source_url;
    array.push_back(std::move(raw));
  }
  Json doc;
  doc["traceEvents"] = std::move(array);
  return doc.dump();
}

CallTree BuildCallTree(const std::vector<TraceEvent>& events) {
  // Normalize to Complete form, grouped by thread. Begin/End pairs are
  // matched in stack order and placed at the Begin's position.
  std::map<ThreadKey, std::vector<TraceEvent>> per_thread;
  std::map<ThreadKey, std::vector<std::pair<size_t, TraceEvent>>> open;
  for (const TraceEvent& e : events) {
    auto& list = per_thread[KeyOf(e)];
    switch (e.phase) {
      case Phase::kComplete:
        list.push_back(e);
        break;
      case Phase::kBegin:
        open[KeyOf(e)].emplace_back(list.size(), e);
        list.push_back(e);  // Placeholder, completed at the matching End.
        break;
      case Phase::kEnd: {
        auto& stack = open[KeyOf(e)];
        if (stack.empty() ||
            (!e.name.empty() && e.name != stack.back().second.name)) {
          throw UnbalancedEvents("unmatched End event '" + e.name + "'");
        }
        auto [slot, begin] = std::move(stack.back());
        stack.pop_back();
        begin.phase = Phase::kComplete;
        begin.duration_us = e.timestamp_us - begin.timestamp_us;
        list[slot] = std::move(begin);
        break;
      }
    }
  }
  for (const auto& [key, stack] : open) {
    if (!stack.empty()) {
      throw UnbalancedEvents("unclosed Begin event '" +
                             stack.back().second.name + "'");
    }
  }

  std::vector<FlatNode> flat;
  std::vector<size_t> roots;
  for (auto& [key, list] : per_thread) {
    std::stable_sort(list.begin(), list.end(),
                     [](const TraceEvent& a, const TraceEvent& b) {
                       if (a.timestamp_us != b.timestamp_us)
                         return a.timestamp_us < b.timestamp_us;
                       return a.duration_us > b.duration_us;
                     });
    std::vector<size_t> stack;
    for (TraceEvent& e : list) {
      while (!stack.empty()) {
        const TraceEvent& top = flat[stack.back()].event;
        if (e.timestamp_us >= top.timestamp_us && e.end_us() <= top.end_us())
          break;
        if (e.timestamp_us < top.end_us()) {
          throw OverlapViolation(
              "event '" + e.name + "' [" + std::to_string(e.timestamp_us) +
              ", " + std::to_string(e.end_us()) + "] partially overlaps '" +
              top.name + "' [" + std::to_string(top.timestamp_us) + ", " +
              std::to_string(top.end_us()) + "]");
        }
        stack.pop_back();
      }
      size_t index = flat.size();
      flat.push_back({std::move(e), {}});
      if (stack.empty()) {
        roots.push_back(index);
      } else {
        flat[stack.back()].children.push_back(index);
      }
      stack.push_back(index);
    }
  }

  std::stable_sort(roots.begin(), roots.end(), [&](size_t a, size_t b) {
    const TraceEvent& ea = flat[a].event;
    const TraceEvent& eb = flat[b].event;
    return std::tie(ea.timestamp_us, ea.process_id, ea.thread_id) <
           std::tie(eb.timestamp_us, eb.process_id, eb.thread_id);
  });
  CallTree tree;
  tree.roots.reserve(roots.size());
  for (size_t root : roots) tree.roots.push_back(Materialize(flat, root));
  return tree;
}

std::vector<TraceEvent> FlattenCallTree(const CallTree& tree) {
  std::vector<TraceEvent> out;
  std::vector<const CallNode*> stack;
  for (auto it = tree.roots.rbegin(); it != tree.roots.rend(); ++it) {
    stack.push_back(&*it);
  }
  while (!stack.empty()) {
    const CallNode* node = stack.back();
    stack.pop_back();
    out.push_back(node->event);
    for (auto it = node->children.rbegin(); it != node->children.rend();
         ++it) {
      stack.push_back(&*it);
    }
  }
  return out;
}

LoadMetrics ComputeMetrics(const CallTree& tree) {
  LoadMetrics metrics;
  if (tree.roots.empty()) return metrics;
  int64_t first = tree.roots.front().event.timestamp_us;
  int64_t last = tree.roots.front().event.end_us();
  std::vector<std::pair<const CallNode*, int64_t>> stack;
  for (const CallNode& root : tree.roots) stack.emplace_back(&root, 1);
  while (!stack.empty()) {
    auto [node, depth] = stack.back();
    stack.pop_back();
    ++metrics.event_count;
    metrics.max_depth = std::max(metrics.max_depth, depth);
    first = std::min(first, node->event.timestamp_us);
    last = std::max(last, node->event.end_us());
    for (const CallNode& child : node->children) {
      stack.emplace_back(&child, depth + 1);
    }
  }
  metrics.load_time_ms = static_cast<double>(last - first) / 1000.0;
  return metrics;
}

std::vector<TraceEvent> FilterByCategory(const std::vector<TraceEvent>& events,
                                         const std::set<std::string>& allowed) {
  std::vector<TraceEvent> out;
  for (const TraceEvent& e : events) {
    if (allowed.contains(e.category)) out.push_back(e);
  }
  return out;
}

std::optional<std::string> ResolveSourceUrl(
    std::string_view url, const std::vector<std::string>& manifest) {
  if (url.empty()) return std::nullopt;
  for (const std::string& file : manifest) {
    if (url == file) return file;
  }
  std::string_view path = url;
  if (auto scheme = path.find("://"); scheme != std::string_view::npos) {
    path.remove_prefix(scheme + 3);
    auto slash = path.find('/');
    path = slash == std::string_view::npos ? std::string_view{}
                                           : path.substr(slash);
  }
  if (auto cut = path.find_first_of("?#"); cut != std::string_view::npos) {
    path = path.substr(0, cut);
  }
  while (!path.empty() && path.front() == '/') path.remove_prefix(1);
  for (const std::string& file : manifest) {
    if (path == file) return file;
  }
  return std::nullopt;
}

std::vector<CallSiteTarget> ExtractTargets(
    const CallTree& tree, const std::vector<std::string>& manifest) {
  std::set<std::pair<std::string, std::string>> seen;  // (file, method)
  for (const TraceEvent& e : FlattenCallTree(tree)) {
    if (!e.source_url || e.name.empty()) continue;
    if (auto file = ResolveSourceUrl(*e.source_url, manifest)) {
      seen.emplace(*file, e.name);
    }
  }
  std::vector<CallSiteTarget> out;
  out.reserve(seen.size());
  for (const auto& [file, method] : seen) out.push_back({method, file});
  return out;
}

}  // namespace pageopt
