#ifndef PAGEOPT_SIM_H_
#define PAGEOPT_SIM_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pageopt/correctness.h"
#include "pageopt/trace.h"

namespace pageopt {

// Deterministic mini-browser. Runs a page's scripts in order as root tasks,
// then drains the deferred-task queue. Time is virtual: every executed
// statement costs 1 us and every call (script function or built-in) adds a
// 10 us overhead on exit, so an event's duration is 10 + its own statements
// + its children's durations.
//
// Built-ins:
//   paint(x, y, r, g, b)   set one pixel of the 100x100 canvas
//   writeText(id, s)       draw s as 5x7 glyphs at a spot hashed from id
//   markLoaded()           put the sentinel text into the document
//   defer(fn)              queue fn as a new root task (FIFO)
//   log(x)                 no output; still a traced call
// Arrays have length, push, forEach and map.
struct SimScript {
  std::string file_name;
  std::string source;
};

struct SimOptions {
  std::string sentinel_text = "loaded";
  double timeout_ms = 1000.0;
  int64_t step_budget = 1'000'000;
  int max_call_depth = 400;
  int64_t start_us = 0;
};

struct SimOutcome {
  std::vector<TraceEvent> events;  // Sorted as ParseTrace would sort them.
  Screenshot framebuffer;
  std::map<std::string, std::string> document;  // writeText id -> text
  bool loaded = false;
  bool timed_out = false;
  bool crashed = false;
  std::string crash_message;
  double elapsed_ms = 0.0;  // Virtual.
  int64_t steps = 0;
};

constexpr int kCanvasSize = 100;

// Never throws for script-level failures: syntax errors, runtime type
// errors and runaway recursion all end the run with crashed = true.
SimOutcome RunSimPage(const std::vector<SimScript>& scripts,
                      const SimOptions& options);

// 64-bit FNV-1a, used for glyph shapes and text placement.
uint64_t Fnv1a64(std::string_view bytes);

}  // namespace pageopt

#endif  // PAGEOPT_SIM_H_
