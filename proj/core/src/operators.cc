#include "pageopt/operators.h"

#include <algorithm>
#include <cstdio>
#include <map>
#include <regex>

#include "pageopt/errors.h"
#include "pageopt/sim.h"

namespace pageopt {
namespace {

std::string Slice(std::string_view text, const Span& span) {
  return std::string(text.substr(span.start, span.size()));
}

std::string Preview(std::string_view removed) {
  size_t begin = removed.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return "";
  std::string line(removed.substr(begin));
  line.resize(std::min(line.find('\n'), line.size()));
  if (line.size() > 60) line = line.substr(0, 60) + "...";
  return line;
}

MutationCandidate MakeCandidate(std::string_view text, std::string_view file,
                                Operator op, const StatementSpan& span,
                                std::string replacement) {
  MutationCandidate c;
  c.file_name = std::string(file);
  c.op = op;
  c.span = span;
  c.removed_text = Slice(text, span.span);
  c.replacement = std::move(replacement);
  c.preview = Preview(c.removed_text);
  c.id = CandidateId(file, op, span.span, c.removed_text, c.replacement);
  return c;
}

void CheckDrift(std::string_view text, const MutationCandidate& c) {
  if (c.span.span.end > text.size() ||
      text.substr(c.span.span.start, c.span.span.size()) != c.removed_text) {
    throw SpanDrift("candidate " + c.id + " no longer matches " + c.file_name);
  }
}

// --- loop sites ---------------------------------------------------------

bool IsCallback(const Node& n) {
  return n.kind == NodeKind::kFunctionExpression ||
         n.kind == NodeKind::kArrowFunction || n.kind == NodeKind::kIdentifier;
}

// `E.method(CB)` with exactly one callback argument.
const Node* MatchIteration(const Node& expr, std::string_view method) {
  if (expr.kind != NodeKind::kCall || expr.children.size() != 2) return nullptr;
  const Node& callee = expr.children[0];
  if (callee.kind != NodeKind::kMember || callee.children[1].text != method) {
    return nullptr;
  }
  if (!IsCallback(expr.children[1])) return nullptr;
  return &expr;
}

struct LoopSite {
  const Node* statement = nullptr;
  const Node* call = nullptr;
  bool is_map = false;
  std::string declaration_keyword;  // Set for `let y = E.map(CB);`.
  const Node* target = nullptr;     // L or y.
};

void CollectSites(const Node& node, std::vector<LoopSite>& out) {
  if (node.kind == NodeKind::kExpressionStatement) {
    const Node& expr = node.children[0];
    if (const Node* call = MatchIteration(expr, "forEach")) {
      out.push_back({&node, call, false, "", nullptr});
    } else if (expr.kind == NodeKind::kAssignment && expr.text == "=") {
      if (const Node* call = MatchIteration(expr.children[1], "map")) {
        out.push_back({&node, call, true, "", &expr.children[0]});
      }
    }
  } else if (node.kind == NodeKind::kVariableDeclaration &&
             node.children.size() == 1 &&
             node.children[0].children.size() == 2) {
    const Node& declarator = node.children[0];
    if (const Node* call = MatchIteration(declarator.children[1], "map")) {
      out.push_back({&node, call, true, node.text, &declarator.children[0]});
    }
  }
  for (const Node& child : node.children) CollectSites(child, out);
}

int FreshIndex(std::string_view text) {
  for (int k = 0;; ++k) {
    std::string i = "__i" + std::to_string(k);
    std::string m = "__m" + std::to_string(k);
    if (text.find(i) == std::string_view::npos &&
        text.find(m) == std::string_view::npos) {
      return k;
    }
  }
}

std::string RewriteSite(std::string_view text, const LoopSite& site, int k) {
  const Node& receiver = site.call->children[0].children[0];
  const Node& callback = site.call->children[1];
  std::string e = Slice(text, receiver.span);
  std::string cb = Slice(text, callback.span);
  if (callback.kind != NodeKind::kIdentifier) cb = "(" + cb + ")";
  std::string i = "__i" + std::to_string(k);
  std::string head = "for (let " + i + " = 0; " + i + " < " + e + ".length; " +
                     i + "++) { ";
  std::string invoke = cb + "(" + e + "[" + i + "], " + i + ")";
  if (!site.is_map) return head + invoke + "; }";
  std::string m = "__m" + std::to_string(k);
  std::string assign = site.declaration_keyword.empty()
                           ? Slice(text, site.target->span) + " = " + m + ";"
                           : site.declaration_keyword + " " +
                                 site.target->text + " = " + m + ";";
  return "let " + m + " = []; " + head + m + ".push(" + invoke + "); } " +
         assign;
}

MutationOutcome Splice(std::string_view text, const MutationCandidate& c) {
  std::string next(text.substr(0, c.span.span.start));
  next += c.replacement;
  next += text.substr(c.span.span.end);
  MutationOutcome outcome;
  try {
    ParseSource(next);
  } catch (const SyntaxError& e) {
    outcome.reason = e.what();
    return outcome;
  }
  outcome.applicable = true;
  outcome.source = {c.file_name, std::move(next), c};
  return outcome;
}

}  // namespace

std::string_view OperatorName(Operator op) {
  return op == Operator::kDelete ? "delete" : "loop";
}

std::string CandidateId(std::string_view file_name, Operator op,
                        const Span& span, std::string_view removed_text,
                        std::string_view replacement) {
  std::string key(file_name);
  key += '\0';
  key += OperatorName(op);
  key += '\0';
  key += std::to_string(span.start) + ":" + std::to_string(span.end);
  key += '\0';
  key += removed_text;
  key += '\0';
  if (op == Operator::kLoopRewrite) {
    // The fresh index moves whenever another site is rewritten first; the
    // mutation itself is the same.
    static const std::regex kFresh(R"(__([im])\d+)");
    key += std::regex_replace(std::string(replacement), kFresh, "__$1#");
  } else {
    key += replacement;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(Fnv1a64(key)));
  return buf;
}

std::vector<MutationCandidate> EnumerateDeletions(
    const Ast& ast, std::string_view file_name,
    const std::vector<CallSiteTarget>& targets) {
  std::map<Span, StatementSpan> spans;
  for (const CallSiteTarget& target : targets) {
    if (target.file_name != file_name) continue;
    for (const NodeLocus& mention : FindMentions(ast, target.method_name)) {
      StatementSpan s = EnclosingStatement(ast, mention);
      spans.emplace(s.span, s);
    }
  }
  std::vector<MutationCandidate> out;
  for (auto it = spans.rbegin(); it != spans.rend(); ++it) {
    out.push_back(
        MakeCandidate(ast.source, file_name, Operator::kDelete, it->second, ""));
  }
  return out;
}

MutationOutcome ApplyDeletion(std::string_view text,
                              const MutationCandidate& c) {
  CheckDrift(text, c);
  MutationOutcome outcome;
  try {
    DeletionResult r = DeleteSpan(text, c.span, c.file_name);
    outcome.applicable = true;
    outcome.source = {c.file_name, std::move(r.text), c};
  } catch (const ReparseFailure& e) {
    outcome.reason = e.what();
  }
  return outcome;
}

std::vector<MutationCandidate> EnumerateLoopSites(const Ast& ast,
                                                  std::string_view file_name) {
  std::vector<LoopSite> sites;
  CollectSites(ast.root, sites);
  std::sort(sites.begin(), sites.end(), [](const LoopSite& a, const LoopSite& b) {
    return a.statement->span > b.statement->span;
  });
  int k = FreshIndex(ast.source);
  std::vector<MutationCandidate> out;
  for (const LoopSite& site : sites) {
    StatementSpan span{site.statement->span,
                       site.declaration_keyword.empty()
                           ? StatementKind::kExpressionStatement
                           : StatementKind::kVariableDeclaration};
    out.push_back(MakeCandidate(ast.source, file_name, Operator::kLoopRewrite,
                                span, RewriteSite(ast.source, site, k)));
  }
  return out;
}

MutationOutcome ApplyLoopRewrite(std::string_view text,
                                 const MutationCandidate& c) {
  CheckDrift(text, c);
  return Splice(text, c);
}

std::vector<MutationCandidate> EnumerateLoopFile(const Ast& ast,
                                                 std::string_view file_name) {
  std::string text = ast.source;
  int rewrites = 0;
  // Outer sites copy nested ones verbatim, so each pass removes exactly one.
  while (true) {
    Ast current = ParseSource(text);
    std::vector<MutationCandidate> sites = EnumerateLoopSites(current, file_name);
    if (sites.empty()) break;
    MutationOutcome next = ApplyLoopRewrite(text, sites.front());
    if (!next.applicable) break;
    text = std::move(next.source.new_text);
    ++rewrites;
  }
  if (rewrites == 0) return {};
  StatementSpan whole{{0, ast.source.size()}, StatementKind::kBlock};
  return {MakeCandidate(ast.source, file_name, Operator::kLoopRewrite, whole,
                        std::move(text))};
}

MutationOutcome ApplyCandidate(std::string_view text,
                               const MutationCandidate& c) {
  return c.op == Operator::kDelete ? ApplyDeletion(text, c)
                                   : ApplyLoopRewrite(text, c);
}

}  // namespace pageopt
