#ifndef PAGEOPT_AST_H_
#define PAGEOPT_AST_H_

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pageopt {

// Half-open byte range [start, end) into a source text.
struct Span {
  size_t start = 0;
  size_t end = 0;

  size_t size() const { return end - start; }
  bool Contains(const Span& other) const {
    return start <= other.start && other.end <= end;
  }
  friend auto operator<=>(const Span&, const Span&) = default;
};

enum class NodeKind {
  kProgram,
  // Statements.
  kVariableDeclaration,
  kFunctionDeclaration,
  kReturnStatement,
  kIfStatement,
  kForStatement,
  kBlock,
  kExpressionStatement,
  // Statement-level helpers that are not statements themselves.
  kForInitDeclaration,  // `let i = 0` inside a for header, no terminator.
  kDeclarator,
  kParams,
  kEmpty,  // Zero-width placeholder for omitted for-header parts.
  // Expressions.
  kIdentifier,
  kNumber,
  kString,
  kBoolean,
  kArray,
  kMember,          // obj.prop
  kComputedMember,  // obj[expr]
  kCall,
  kAssignment,  // =, +=, -=
  kBinary,
  kUnary,   // prefix ! and -
  kUpdate,  // postfix ++ and --
  kFunctionExpression,
  kArrowFunction,
  kParenthesized,
};

std::string_view NodeKindName(NodeKind kind);
bool IsStatementKind(NodeKind kind);
bool IsExpressionKind(NodeKind kind);

// A syntax node. `text` carries the identifier name, the raw literal text,
// the operator, or the declaration keyword depending on kind. Comments that
// precede a node's first token are kept as trivia on the outermost node
// starting at that token.
struct Node {
  NodeKind kind = NodeKind::kEmpty;
  std::string text;
  Span span;
  std::vector<Node> children;
  std::vector<Span> leading_comments;
};

// Equality over kind, text and children; spans and trivia are ignored.
bool StructurallyEqual(const Node& a, const Node& b);

struct Ast {
  std::string source;
  Node root;  // kProgram
};

// Parses the supported script subset:
//   statements  let/var/const declarations, function declarations,
//               expression statements, for(init;test;update), if/else,
//               return, blocks
//   expressions identifiers, number/string/boolean literals, array
//               literals, dot and computed member access, calls, = += -=,
//               binary + - * / % < <= > >= == != === !== && ||, unary ! -,
//               postfix ++ --, function expressions, arrow functions
// Semicolons are mandatory. Anything else raises SyntaxError.
Ast ParseSource(std::string text);

// Entry points used to check that a node's source slice re-parses to the
// same subtree in its own context.
Node ParseStatementText(std::string_view text);
Node ParseExpressionText(std::string_view text);

// A replacement of one byte range. Edits passed to PrintSource must not
// overlap.
struct SourceEdit {
  Span span;
  std::string replacement;
};

// Span-splice printer: walks the tree, copying the original bytes between
// and around child spans, substituting edits where they apply. With no
// edits the output is byte-identical to ast.source.
std::string PrintSource(const Ast& ast, std::span<const SourceEdit> edits = {});

struct NodeLocus {
  std::vector<size_t> path;  // Child indices from the root.
  NodeKind kind = NodeKind::kEmpty;
  Span span;

  friend bool operator==(const NodeLocus&, const NodeLocus&) = default;
};

// Throws LocusNotFound when the path does not resolve or resolves to a node
// with a different kind or span.
const Node& ResolveLocus(const Ast& ast, const NodeLocus& locus);

// Every identifier whose text equals `name`, in source order. Covers
// declaration names, callees, parameters and member property names.
std::vector<NodeLocus> FindMentions(const Ast& ast, std::string_view name);

enum class StatementKind {
  kExpressionStatement,
  kVariableDeclaration,
  kFunctionDeclaration,
  kReturnStatement,
  kIfStatement,
  kForStatement,
  kBlock,
};

std::string_view StatementKindName(StatementKind kind);

struct StatementSpan {
  Span span;
  StatementKind kind = StatementKind::kExpressionStatement;

  friend bool operator==(const StatementSpan&, const StatementSpan&) = default;
};

// The nearest statement enclosing the locus. The span runs from the first
// byte of any comment sitting on the statement's first line ahead of it
// (e.g. a `/*TAG*/` marker) to the statement's terminator. Never the
// program root; throws LocusNotFound.
StatementSpan EnclosingStatement(const Ast& ast, const NodeLocus& locus);

struct DeletionRecord {
  std::string file;
  Span span;
  std::string removed_text;
};

struct DeletionResult {
  std::string text;
  DeletionRecord record;
};

// Removes the span and leaves a single "\n" in its place. When the span
// occupies whole lines (only whitespace around it on its first and last
// line), those lines are removed entirely before the placeholder goes in,
// so deleting "foo();\nbar();"'s first statement yields "\nbar();".
// Throws ReparseFailure when the result no longer parses.
DeletionResult DeleteSpan(std::string_view text, const StatementSpan& span,
                          std::string_view file = {});

// 1-based line/column of a byte offset.
struct LineColumn {
  int line = 1;
  int column = 1;
};
LineColumn LocateOffset(std::string_view text, size_t offset);

}  // namespace pageopt

#endif  // PAGEOPT_AST_H_
