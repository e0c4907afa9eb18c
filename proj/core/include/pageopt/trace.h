#ifndef PAGEOPT_TRACE_H_
#define PAGEOPT_TRACE_H_

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace pageopt {

enum class Phase { kBegin, kEnd, kComplete };

// One page-load event in Trace Event Format terms. Timestamps and durations
// are integer microseconds.
struct TraceEvent {
  std::string name;
  std::string category;
  Phase phase = Phase::kComplete;
  int64_t timestamp_us = 0;
  int64_t duration_us = 0;  // Complete only.
  int64_t process_id = 0;
  int64_t thread_id = 0;
  std::optional<std::string> source_url;

  int64_t end_us() const { return timestamp_us + duration_us; }

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct ParseReport {
  size_t accepted = 0;
  size_t skipped_unknown_phase = 0;
  size_t skipped_malformed = 0;
};

struct ParsedTrace {
  std::vector<TraceEvent> events;
  ParseReport report;
};

// Parses a Trace Event Format document: either a bare array of events or an
// object with a "traceEvents" array. Accepts phases B, E and X; every other
// phase letter is skipped and counted, as are events missing required
// fields. Events come back sorted by timestamp (stable; Complete events with
// equal timestamps are ordered longest first).
//
// Source attribution is read from args.sourceUrl, or args.data.url for
// browser FunctionCall events, whose args.data.functionName (when present)
// also replaces the generic event name.
//
// Throws UnparseableDocument or UnbalancedEvents.
ParsedTrace ParseTrace(std::string_view bytes);

// Serializes events as {"traceEvents":[...]} using Complete/Begin/End
// phases. ParseTrace(SerializeTrace(e)).events == e for sorted input.
std::string SerializeTrace(const std::vector<TraceEvent>& events);

struct CallNode {
  TraceEvent event;  // Always in Complete form.
  std::vector<CallNode> children;

  friend bool operator==(const CallNode&, const CallNode&) = default;
};

struct CallTree {
  std::vector<CallNode> roots;

  friend bool operator==(const CallTree&, const CallTree&) = default;
};

// Nests events by interval containment per (process_id, thread_id).
// Begin/End pairs are matched through a per-thread stack; Complete events by
// containment, with the longer event treated as parent on equal start.
// Roots are ordered by (timestamp, process_id, thread_id).
// Throws OverlapViolation on partial overlap within a thread and
// UnbalancedEvents on stray Begin/End.
CallTree BuildCallTree(const std::vector<TraceEvent>& events);

// Pre-order flattening of the tree into Complete events.
std::vector<TraceEvent> FlattenCallTree(const CallTree& tree);

struct LoadMetrics {
  double load_time_ms = 0.0;
  int64_t event_count = 0;
  int64_t max_depth = 0;  // A lone root has depth 1.

  friend bool operator==(const LoadMetrics&, const LoadMetrics&) = default;
};

LoadMetrics ComputeMetrics(const CallTree& tree);

// Keeps only events whose category is in `allowed`. Off by default in every
// caller: all events count.
std::vector<TraceEvent> FilterByCategory(const std::vector<TraceEvent>& events,
                                         const std::set<std::string>& allowed);

struct CallSiteTarget {
  std::string method_name;
  std::string file_name;

  friend auto operator<=>(const CallSiteTarget&,
                          const CallSiteTarget&) = default;
};

// Maps an event's source URL onto a manifest entry: exact match first, then
// the URL path (scheme, host, query and fragment stripped) relative to the
// app root. Returns nullopt for anything outside the manifest.
std::optional<std::string> ResolveSourceUrl(
    std::string_view url, const std::vector<std::string>& manifest);

// One target per distinct (method, file), ordered by file then method.
// Events without a source, or with a source outside the manifest, are
// ignored.
std::vector<CallSiteTarget> ExtractTargets(
    const CallTree& tree, const std::vector<std::string>& manifest);

}  // namespace pageopt

#endif  // PAGEOPT_TRACE_H_
