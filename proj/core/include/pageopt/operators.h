#ifndef PAGEOPT_OPERATORS_H_
#define PAGEOPT_OPERATORS_H_

#include <string>
#include <string_view>
#include <vector>

#include "pageopt/ast.h"
#include "pageopt/trace.h"

namespace pageopt {

enum class Operator { kDelete, kLoopRewrite };

std::string_view OperatorName(Operator op);  // "delete" / "loop"

struct MutationCandidate {
  std::string id;  // 16 hex digits
  std::string file_name;
  Operator op = Operator::kDelete;
  StatementSpan span;
  std::string removed_text;  // Source slice at enumeration time.
  std::string replacement;   // Empty for deletions.
  std::string preview;

  friend bool operator==(const MutationCandidate&,
                         const MutationCandidate&) = default;
};

// Hash of file, span, operator, removed and inserted text. For loop
// rewrites the fresh __iK/__mK index is left out.
std::string CandidateId(std::string_view file_name, Operator op,
                        const Span& span, std::string_view removed_text,
                        std::string_view replacement);

struct MutatedSource {
  std::string file_name;
  std::string new_text;
  MutationCandidate applied;
};

struct MutationOutcome {
  bool applicable = false;
  MutatedSource source;  // Meaningful only when applicable.
  std::string reason;    // Why not, otherwise.
};

// Candidates for every mention of a target method in this file. Targets for
// other files are ignored. Mentions sharing a statement give one candidate;
// the list runs from the last statement in the file to the first.
std::vector<MutationCandidate> EnumerateDeletions(
    const Ast& ast, std::string_view file_name,
    const std::vector<CallSiteTarget>& targets);

// Throws SpanDrift when `text` no longer holds the candidate's removed text.
MutationOutcome ApplyDeletion(std::string_view text, const MutationCandidate& c);

// Sites:
//   E.forEach(CB);
//   L = E.map(CB);
//   let|var|const y = E.map(CB);   (single declarator)
// where CB is a function expression, arrow function or identifier. Each
// candidate carries its rewritten text; ordered last site first.
std::vector<MutationCandidate> EnumerateLoopSites(const Ast& ast,
                                                  std::string_view file_name);

// Throws SpanDrift like ApplyDeletion.
MutationOutcome ApplyLoopRewrite(std::string_view text,
                                 const MutationCandidate& c);

// Per-file mode: every site in the file rewritten in one candidate whose
// span is the whole text. Returns nothing when the file has no sites.
std::vector<MutationCandidate> EnumerateLoopFile(const Ast& ast,
                                                 std::string_view file_name);

MutationOutcome ApplyCandidate(std::string_view text, const MutationCandidate& c);

}  // namespace pageopt

#endif  // PAGEOPT_OPERATORS_H_
