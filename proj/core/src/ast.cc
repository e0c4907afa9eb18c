#include "pageopt/ast.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <utility>

#include "pageopt/errors.h"

namespace pageopt {
namespace {

enum class TokKind { kIdent, kKeyword, kNumber, kString, kPunct, kEof };

struct Token {
  TokKind kind = TokKind::kEof;
  std::string_view text;
  Span span;
  std::vector<Span> comments;  // Comments between the previous token and this.
};

constexpr std::array<std::string_view, 10> kKeywords = {
    "let", "var", "const", "function", "return",
    "if",  "else", "for",  "true",     "false"};

// Words with meaning in the full language that the subset does not accept.
constexpr std::array<std::string_view, 31> kUnsupported = {
    "class",  "while",  "do",        "switch",   "case",    "break",
    "continue", "new",  "this",      "try",      "catch",   "finally",
    "throw",  "typeof", "instanceof", "in",      "of",      "delete",
    "void",   "yield",  "async",     "await",    "import",  "export",
    "extends", "super", "with",      "default",  "debugger", "null",
    "static"};

constexpr std::array<std::string_view, 14> kMultiPunct = {
    "===", "!==", "==", "!=", "<=", ">=", "&&",
    "||",  "++",  "--", "+=", "-=", "=>", "**"};

bool IsIdentStart(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}
bool IsIdentPart(char c) {
  return IsIdentStart(c) || std::isdigit(static_cast<unsigned char>(c));
}
bool IsDigit(char c) { return std::isdigit(static_cast<unsigned char>(c)); }

template <size_t N>
bool Contains(const std::array<std::string_view, N>& words,
              std::string_view w) {
  return std::find(words.begin(), words.end(), w) != words.end();
}

[[noreturn]] void Fail(std::string_view text, size_t offset,
                       std::string expected) {
  LineColumn lc = LocateOffset(text, offset);
  throw SyntaxError(lc.line, lc.column, std::move(expected));
}

std::vector<Token> Lex(std::string_view src) {
  std::vector<Token> tokens;
  std::vector<Span> pending_comments;
  size_t i = 0;
  const size_t n = src.size();
  while (true) {
    // Whitespace and comments.
    while (i < n) {
      char c = src[i];
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        ++i;
      } else if (c == '/' && i + 1 < n && src[i + 1] == '/') {
        size_t start = i;
        while (i < n && src[i] != '\n') ++i;
        pending_comments.push_back({start, i});
      } else if (c == '/' && i + 1 < n && src[i + 1] == '*') {
        size_t start = i;
        size_t close = src.find("*/", i + 2);
        if (close == std::string_view::npos) Fail(src, start, "'*/'");
        i = close + 2;
        pending_comments.push_back({start, i});
      } else {
        break;
      }
    }
    Token tok;
    tok.comments = std::move(pending_comments);
    pending_comments.clear();
    if (i >= n) {
      tok.kind = TokKind::kEof;
      tok.span = {n, n};
      tokens.push_back(std::move(tok));
      return tokens;
    }
    size_t start = i;
    char c = src[i];
    if (IsIdentStart(c)) {
      while (i < n && IsIdentPart(src[i])) ++i;
      tok.text = src.substr(start, i - start);
      tok.kind =
          Contains(kKeywords, tok.text) ? TokKind::kKeyword : TokKind::kIdent;
    } else if (IsDigit(c) || (c == '.' && i + 1 < n && IsDigit(src[i + 1]))) {
      while (i < n && IsDigit(src[i])) ++i;
      if (i < n && src[i] == '.') {
        ++i;
        while (i < n && IsDigit(src[i])) ++i;
      }
      if (i < n && (src[i] == 'e' || src[i] == 'E')) {
        size_t exp = i + 1;
        if (exp < n && (src[exp] == '+' || src[exp] == '-')) ++exp;
        if (exp < n && IsDigit(src[exp])) {
          i = exp;
          while (i < n && IsDigit(src[i])) ++i;
        }
      }
      if (i < n && IsIdentPart(src[i])) Fail(src, i, "end of number");
      tok.kind = TokKind::kNumber;
      tok.text = src.substr(start, i - start);
    } else if (c == '"' || c == '\'') {
      ++i;
      while (true) {
        if (i >= n || src[i] == '\n') Fail(src, i, "closing quote");
        if (src[i] == '\\') {
          i += 2;
          continue;
        }
        if (src[i] == c) {
          ++i;
          break;
        }
        ++i;
      }
      tok.kind = TokKind::kString;
      tok.text = src.substr(start, i - start);
    } else {
      tok.kind = TokKind::kPunct;
      for (std::string_view p : kMultiPunct) {
        if (src.substr(i, p.size()) == p) {
          tok.text = src.substr(i, p.size());
          break;
        }
      }
      if (tok.text.empty()) {
        static constexpr std::string_view kSingle = "(){}[];,.=+-*/%<>!";
        if (kSingle.find(c) == std::string_view::npos) {
          Fail(src, i, "supported character");
        }
        tok.text = src.substr(i, 1);
      }
      if (tok.text == "**") Fail(src, i, "supported operator");
      i += tok.text.size();
    }
    tok.span = {start, i};
    tokens.push_back(std::move(tok));
  }
}

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src), tokens_(Lex(src)) {}

  Node ParseProgram() {
    Node program;
    program.kind = NodeKind::kProgram;
    program.span = {0, src_.size()};
    while (!AtEof()) program.children.push_back(Statement());
    program.leading_comments = Peek().comments;
    return program;
  }

  Node ParseSingleStatement() {
    Node stmt = Statement();
    ExpectEof("end of statement");
    return stmt;
  }

  Node ParseSingleExpression() {
    Node expr = Expression();
    ExpectEof("end of expression");
    return expr;
  }

 private:
  const Token& Peek(size_t ahead = 0) const {
    return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)];
  }
  bool AtEof() const { return Peek().kind == TokKind::kEof; }
  bool IsPunct(std::string_view p, size_t ahead = 0) const {
    const Token& t = Peek(ahead);
    return t.kind == TokKind::kPunct && t.text == p;
  }
  bool IsKeyword(std::string_view k) const {
    return Peek().kind == TokKind::kKeyword && Peek().text == k;
  }
  const Token& Advance() { return tokens_[pos_++]; }

  [[noreturn]] void FailHere(std::string expected) const {
    const Token& t = Peek();
    if (t.kind == TokKind::kIdent && Contains(kUnsupported, t.text)) {
      expected += " (unsupported keyword '" + std::string(t.text) + "')";
    }
    Fail(src_, t.span.start, std::move(expected));
  }

  const Token& ExpectPunct(std::string_view p) {
    if (!IsPunct(p)) FailHere("'" + std::string(p) + "'");
    return Advance();
  }

  void ExpectEof(const char* what) {
    if (!AtEof()) FailHere(what);
  }

  Node Identifier() {
    const Token& t = Peek();
    if (t.kind != TokKind::kIdent || Contains(kUnsupported, t.text)) {
      FailHere("identifier");
    }
    Advance();
    return Leaf(NodeKind::kIdentifier, t);
  }

  static Node Leaf(NodeKind kind, const Token& t) {
    Node node;
    node.kind = kind;
    node.text = std::string(t.text);
    node.span = t.span;
    return node;
  }

  Node EmptyAt(size_t offset) const {
    Node node;
    node.kind = NodeKind::kEmpty;
    node.span = {offset, offset};
    return node;
  }

  // --- Statements -------------------------------------------------------

  Node Statement() {
    const Token& first = Peek();
    std::vector<Span> comments = first.comments;
    Node stmt;
    if (IsKeyword("let") || IsKeyword("var") || IsKeyword("const")) {
      stmt = Declaration(NodeKind::kVariableDeclaration);
      stmt.span.end = ExpectPunct(";").span.end;
    } else if (IsKeyword("function")) {
      stmt = FunctionDeclaration();
    } else if (IsKeyword("return")) {
      stmt.kind = NodeKind::kReturnStatement;
      stmt.span.start = Advance().span.start;
      if (!IsPunct(";")) stmt.children.push_back(Expression());
      stmt.span.end = ExpectPunct(";").span.end;
    } else if (IsKeyword("if")) {
      stmt = IfStatement();
    } else if (IsKeyword("for")) {
      stmt = ForStatement();
    } else if (IsPunct("{")) {
      stmt = Block();
    } else if (IsPunct(";")) {
      FailHere("statement");
    } else {
      stmt.kind = NodeKind::kExpressionStatement;
      stmt.span.start = first.span.start;
      stmt.children.push_back(Expression());
      stmt.span.end = ExpectPunct(";").span.end;
    }
    stmt.leading_comments = std::move(comments);
    return stmt;
  }

  // `let a = 1, b` without the terminator.
  Node Declaration(NodeKind kind) {
    Node decl;
    decl.kind = kind;
    const Token& keyword = Advance();
    decl.text = std::string(keyword.text);
    decl.span.start = keyword.span.start;
    while (true) {
      Node declarator;
      declarator.kind = NodeKind::kDeclarator;
      declarator.children.push_back(Identifier());
      declarator.span = declarator.children[0].span;
      if (IsPunct("=")) {
        Advance();
        declarator.children.push_back(Assignment());
        declarator.span.end = declarator.children.back().span.end;
      }
      decl.span.end = declarator.span.end;
      decl.children.push_back(std::move(declarator));
      if (!IsPunct(",")) break;
      Advance();
    }
    return decl;
  }

  Node FunctionDeclaration() {
    Node fn;
    fn.kind = NodeKind::kFunctionDeclaration;
    fn.span.start = Advance().span.start;
    fn.children.push_back(Identifier());
    fn.children.push_back(Params());
    fn.children.push_back(Block());
    fn.span.end = fn.children.back().span.end;
    return fn;
  }

  Node Params() {
    Node params;
    params.kind = NodeKind::kParams;
    params.span.start = ExpectPunct("(").span.start;
    if (!IsPunct(")")) {
      while (true) {
        params.children.push_back(Identifier());
        if (!IsPunct(",")) break;
        Advance();
      }
    }
    params.span.end = ExpectPunct(")").span.end;
    return params;
  }

  Node Block() {
    Node block;
    block.kind = NodeKind::kBlock;
    block.span.start = ExpectPunct("{").span.start;
    while (!IsPunct("}")) {
      if (AtEof()) FailHere("'}'");
      block.children.push_back(Statement());
    }
    block.span.end = Advance().span.end;
    return block;
  }

  Node IfStatement() {
    Node stmt;
    stmt.kind = NodeKind::kIfStatement;
    stmt.span.start = Advance().span.start;
    ExpectPunct("(");
    stmt.children.push_back(Expression());
    ExpectPunct(")");
    stmt.children.push_back(Statement());
    if (IsKeyword("else")) {
      Advance();
      stmt.children.push_back(Statement());
    }
    stmt.span.end = stmt.children.back().span.end;
    return stmt;
  }

  Node ForStatement() {
    Node stmt;
    stmt.kind = NodeKind::kForStatement;
    stmt.span.start = Advance().span.start;
    ExpectPunct("(");
    if (IsPunct(";")) {
      stmt.children.push_back(EmptyAt(Peek().span.start));
    } else if (IsKeyword("let") || IsKeyword("var") || IsKeyword("const")) {
      stmt.children.push_back(Declaration(NodeKind::kForInitDeclaration));
    } else {
      stmt.children.push_back(Expression());
    }
    ExpectPunct(";");
    stmt.children.push_back(IsPunct(";") ? EmptyAt(Peek().span.start)
                                         : Expression());
    ExpectPunct(";");
    stmt.children.push_back(IsPunct(")") ? EmptyAt(Peek().span.start)
                                         : Expression());
    ExpectPunct(")");
    stmt.children.push_back(Statement());
    stmt.span.end = stmt.children.back().span.end;
    return stmt;
  }

  // --- Expressions ------------------------------------------------------

  Node Expression() { return Assignment(); }

  static bool IsAssignable(const Node& n) {
    return n.kind == NodeKind::kIdentifier || n.kind == NodeKind::kMember ||
           n.kind == NodeKind::kComputedMember;
  }

  // True when the tokens at the cursor begin an arrow function.
  bool AtArrow() const {
    if (Peek().kind == TokKind::kIdent && IsPunct("=>", 1)) return true;
    if (!IsPunct("(")) return false;
    size_t depth = 0;
    for (size_t k = 0;; ++k) {
      const Token& t = Peek(k);
      if (t.kind == TokKind::kEof) return false;
      if (t.kind != TokKind::kPunct) continue;
      if (t.text == "(") ++depth;
      if (t.text == ")" && --depth == 0) return IsPunct("=>", k + 1);
    }
  }

  Node Arrow() {
    Node arrow;
    arrow.kind = NodeKind::kArrowFunction;
    if (Peek().kind == TokKind::kIdent) {
      Node param = Identifier();
      Node params;
      params.kind = NodeKind::kParams;
      params.span = param.span;
      params.children.push_back(std::move(param));
      arrow.children.push_back(std::move(params));
    } else {
      arrow.children.push_back(Params());
    }
    arrow.span.start = arrow.children[0].span.start;
    ExpectPunct("=>");
    arrow.children.push_back(IsPunct("{") ? Block() : Assignment());
    arrow.span.end = arrow.children.back().span.end;
    return arrow;
  }

  Node Assignment() {
    if (AtArrow()) return Arrow();
    Node left = Binary(0);
    if (IsPunct("=") || IsPunct("+=") || IsPunct("-=")) {
      if (!IsAssignable(left)) FailHere("assignable target before '='");
      const Token& op = Advance();
      Node assign;
      assign.kind = NodeKind::kAssignment;
      assign.text = std::string(op.text);
      assign.span.start = left.span.start;
      assign.children.push_back(std::move(left));
      assign.children.push_back(Assignment());
      assign.span.end = assign.children.back().span.end;
      return assign;
    }
    return left;
  }

  static int Precedence(std::string_view op) {
    if (op == "||") return 1;
    if (op == "&&") return 2;
    if (op == "==" || op == "!=" || op == "===" || op == "!==") return 3;
    if (op == "<" || op == "<=" || op == ">" || op == ">=") return 4;
    if (op == "+" || op == "-") return 5;
    if (op == "*" || op == "/" || op == "%") return 6;
    return -1;
  }

  // Precedence climbing; all binary operators are left associative.
  Node Binary(int min_prec) {
    Node left = Unary();
    while (Peek().kind == TokKind::kPunct) {
      int prec = Precedence(Peek().text);
      if (prec < 0 || prec < min_prec) break;
      const Token& op = Advance();
      Node right = Binary(prec + 1);
      Node bin;
      bin.kind = NodeKind::kBinary;
      bin.text = std::string(op.text);
      bin.span = {left.span.start, right.span.end};
      bin.children.push_back(std::move(left));
      bin.children.push_back(std::move(right));
      left = std::move(bin);
    }
    return left;
  }

  Node Unary() {
    if (IsPunct("!") || IsPunct("-")) {
      const Token& op = Advance();
      Node un;
      un.kind = NodeKind::kUnary;
      un.text = std::string(op.text);
      un.children.push_back(Unary());
      un.span = {op.span.start, un.children[0].span.end};
      return un;
    }
    return Postfix();
  }

  Node Postfix() {
    Node expr = CallMember();
    if (IsPunct("++") || IsPunct("--")) {
      if (!IsAssignable(expr)) FailHere("assignable operand");
      const Token& op = Advance();
      Node up;
      up.kind = NodeKind::kUpdate;
      up.text = std::string(op.text);
      up.span = {expr.span.start, op.span.end};
      up.children.push_back(std::move(expr));
      return up;
    }
    return expr;
  }

  Node CallMember() {
    Node expr = Primary();
    while (true) {
      if (IsPunct(".")) {
        Advance();
        Node member;
        member.kind = NodeKind::kMember;
        member.children.push_back(std::move(expr));
        member.children.push_back(Identifier());
        member.span = {member.children[0].span.start,
                       member.children[1].span.end};
        expr = std::move(member);
      } else if (IsPunct("[")) {
        Advance();
        Node member;
        member.kind = NodeKind::kComputedMember;
        member.children.push_back(std::move(expr));
        member.children.push_back(Expression());
        member.span = {member.children[0].span.start,
                       ExpectPunct("]").span.end};
        expr = std::move(member);
      } else if (IsPunct("(")) {
        Advance();
        Node call;
        call.kind = NodeKind::kCall;
        call.children.push_back(std::move(expr));
        if (!IsPunct(")")) {
          while (true) {
            call.children.push_back(Assignment());
            if (!IsPunct(",")) break;
            Advance();
          }
        }
        call.span = {call.children[0].span.start, ExpectPunct(")").span.end};
        expr = std::move(call);
      } else {
        return expr;
      }
    }
  }

  Node Primary() {
    const Token& t = Peek();
    switch (t.kind) {
      case TokKind::kNumber:
        Advance();
        return Leaf(NodeKind::kNumber, t);
      case TokKind::kString:
        Advance();
        return Leaf(NodeKind::kString, t);
      case TokKind::kIdent:
        return Identifier();
      case TokKind::kKeyword:
        if (t.text == "true" || t.text == "false") {
          Advance();
          return Leaf(NodeKind::kBoolean, t);
        }
        if (t.text == "function") return FunctionExpression();
        FailHere("expression");
      case TokKind::kPunct:
        if (t.text == "(") {
          Node paren;
          paren.kind = NodeKind::kParenthesized;
          paren.span.start = Advance().span.start;
          paren.children.push_back(Expression());
          paren.span.end = ExpectPunct(")").span.end;
          return paren;
        }
        if (t.text == "[") {
          Node array;
          array.kind = NodeKind::kArray;
          array.span.start = Advance().span.start;
          if (!IsPunct("]")) {
            while (true) {
              array.children.push_back(Assignment());
              if (!IsPunct(",")) break;
              Advance();
            }
          }
          array.span.end = ExpectPunct("]").span.end;
          return array;
        }
        FailHere("expression");
      case TokKind::kEof:
        FailHere("expression");
    }
    FailHere("expression");
  }

  Node FunctionExpression() {
    Node fn;
    fn.kind = NodeKind::kFunctionExpression;
    fn.span.start = Advance().span.start;
    if (Peek().kind == TokKind::kIdent) {
      fn.children.push_back(Identifier());
    } else {
      fn.children.push_back(EmptyAt(Peek().span.start));
    }
    fn.children.push_back(Params());
    fn.children.push_back(Block());
    fn.span.end = fn.children.back().span.end;
    return fn;
  }

  std::string_view src_;
  std::vector<Token> tokens_;
  size_t pos_ = 0;
};

void PrintNode(const Node& node, std::string_view src,
               std::span<const SourceEdit> edits, size_t* edit_cursor,
               std::string* out) {
  if (*edit_cursor < edits.size() && edits[*edit_cursor].span == node.span &&
      node.kind != NodeKind::kEmpty) {
    out->append(edits[*edit_cursor].replacement);
    ++*edit_cursor;
    return;
  }
  size_t cursor = node.span.start;
  for (const Node& child : node.children) {
    if (child.span.start < cursor || child.span.end > node.span.end) {
      throw std::logic_error("child span escapes its parent");
    }
    out->append(src.substr(cursor, child.span.start - cursor));
    PrintNode(child, src, edits, edit_cursor, out);
    cursor = child.span.end;
  }
  out->append(src.substr(cursor, node.span.end - cursor));
}

void CollectMentions(const Node& node, std::string_view name,
                     std::vector<size_t>* path,
                     std::vector<NodeLocus>* out) {
  if (node.kind == NodeKind::kIdentifier && node.text == name) {
    out->push_back({*path, node.kind, node.span});
  }
  for (size_t i = 0; i < node.children.size(); ++i) {
    path->push_back(i);
    CollectMentions(node.children[i], name, path, out);
    path->pop_back();
  }
}

bool BlankBetween(std::string_view text, size_t from, size_t to) {
  for (size_t i = from; i < to; ++i) {
    char c = text[i];
    if (c != ' ' && c != '\t' && c != '\r') return false;
  }
  return true;
}

}  // namespace

std::string_view NodeKindName(NodeKind kind) {
  switch (kind) {
    case NodeKind::kProgram: return "Program";
    case NodeKind::kVariableDeclaration: return "VariableDeclaration";
    case NodeKind::kFunctionDeclaration: return "FunctionDeclaration";
    case NodeKind::kReturnStatement: return "ReturnStatement";
    case NodeKind::kIfStatement: return "IfStatement";
    case NodeKind::kForStatement: return "ForStatement";
    case NodeKind::kBlock: return "Block";
    case NodeKind::kExpressionStatement: return "ExpressionStatement";
    case NodeKind::kForInitDeclaration: return "ForInitDeclaration";
    case NodeKind::kDeclarator: return "Declarator";
    case NodeKind::kParams: return "Params";
    case NodeKind::kEmpty: return "Empty";
    case NodeKind::kIdentifier: return "Identifier";
    case NodeKind::kNumber: return "Number";
    case NodeKind::kString: return "String";
    case NodeKind::kBoolean: return "Boolean";
    case NodeKind::kArray: return "Array";
    case NodeKind::kMember: return "Member";
    case NodeKind::kComputedMember: return "ComputedMember";
    case NodeKind::kCall: return "Call";
    case NodeKind::kAssignment: return "Assignment";
    case NodeKind::kBinary: return "Binary";
    case NodeKind::kUnary: return "Unary";
    case NodeKind::kUpdate: return "Update";
    case NodeKind::kFunctionExpression: return "FunctionExpression";
    case NodeKind::kArrowFunction: return "ArrowFunction";
    case NodeKind::kParenthesized: return "Parenthesized";
  }
  return "?";
}

bool IsStatementKind(NodeKind kind) {
  switch (kind) {
    case NodeKind::kVariableDeclaration:
    case NodeKind::kFunctionDeclaration:
    case NodeKind::kReturnStatement:
    case NodeKind::kIfStatement:
    case NodeKind::kForStatement:
    case NodeKind::kBlock:
    case NodeKind::kExpressionStatement:
      return true;
    default:
      return false;
  }
}

bool IsExpressionKind(NodeKind kind) {
  return kind >= NodeKind::kIdentifier;
}

bool StructurallyEqual(const Node& a, const Node& b) {
  if (a.kind != b.kind || a.text != b.text ||
      a.children.size() != b.children.size()) {
    return false;
  }
  for (size_t i = 0; i < a.children.size(); ++i) {
    if (!StructurallyEqual(a.children[i], b.children[i])) return false;
  }
  return true;
}

Ast ParseSource(std::string text) {
  Ast ast;
  ast.source = std::move(text);
  ast.root = Parser(ast.source).ParseProgram();
  return ast;
}

Node ParseStatementText(std::string_view text) {
  return Parser(text).ParseSingleStatement();
}

Node ParseExpressionText(std::string_view text) {
  return Parser(text).ParseSingleExpression();
}

std::string PrintSource(const Ast& ast, std::span<const SourceEdit> edits) {
  for (size_t i = 1; i < edits.size(); ++i) {
    if (edits[i].span.start < edits[i - 1].span.end) {
      throw std::invalid_argument("source edits overlap or are unsorted");
    }
  }
  std::string out;
  out.reserve(ast.source.size());
  size_t edit_cursor = 0;
  PrintNode(ast.root, ast.source, edits, &edit_cursor, &out);
  if (edit_cursor != edits.size()) {
    throw std::invalid_argument("source edit does not match a node span");
  }
  return out;
}

const Node& ResolveLocus(const Ast& ast, const NodeLocus& locus) {
  const Node* node = &ast.root;
  for (size_t index : locus.path) {
    if (index >= node->children.size()) {
      throw LocusNotFound("locus path leaves the tree");
    }
    node = &node->children[index];
  }
  if (node->kind != locus.kind || node->span != locus.span) {
    throw LocusNotFound("locus resolves to a different node");
  }
  return *node;
}

std::vector<NodeLocus> FindMentions(const Ast& ast, std::string_view name) {
  std::vector<NodeLocus> out;
  if (name.empty()) return out;
  std::vector<size_t> path;
  CollectMentions(ast.root, name, &path, &out);
  return out;
}

std::string_view StatementKindName(StatementKind kind) {
  switch (kind) {
    case StatementKind::kExpressionStatement: return "ExpressionStatement";
    case StatementKind::kVariableDeclaration: return "VariableDeclaration";
    case StatementKind::kFunctionDeclaration: return "FunctionDeclaration";
    case StatementKind::kReturnStatement: return "ReturnStatement";
    case StatementKind::kIfStatement: return "IfStatement";
    case StatementKind::kForStatement: return "ForStatement";
    case StatementKind::kBlock: return "Block";
  }
  return "?";
}

StatementSpan EnclosingStatement(const Ast& ast, const NodeLocus& locus) {
  ResolveLocus(ast, locus);
  std::vector<const Node*> chain;
  const Node* node = &ast.root;
  for (size_t index : locus.path) {
    node = &node->children[index];
    chain.push_back(node);
  }
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    const Node& candidate = **it;
    if (!IsStatementKind(candidate.kind)) continue;
    StatementSpan out;
    out.span = candidate.span;
    switch (candidate.kind) {
      case NodeKind::kExpressionStatement:
        out.kind = StatementKind::kExpressionStatement;
        break;
      case NodeKind::kVariableDeclaration:
        out.kind = StatementKind::kVariableDeclaration;
        break;
      case NodeKind::kFunctionDeclaration:
        out.kind = StatementKind::kFunctionDeclaration;
        break;
      case NodeKind::kReturnStatement:
        out.kind = StatementKind::kReturnStatement;
        break;
      case NodeKind::kIfStatement:
        out.kind = StatementKind::kIfStatement;
        break;
      case NodeKind::kForStatement:
        out.kind = StatementKind::kForStatement;
        break;
      default:
        out.kind = StatementKind::kBlock;
        break;
    }
    // Pull in trailing-edge comments that share the statement's line.
    const auto& comments = candidate.leading_comments;
    size_t start = out.span.start;
    for (auto c = comments.rbegin(); c != comments.rend(); ++c) {
      std::string_view gap(ast.source.data() + c->end, start - c->end);
      if (gap.find('\n') != std::string_view::npos) break;
      start = c->start;
    }
    out.span.start = start;
    return out;
  }
  throw LocusNotFound("locus has no enclosing statement");
}

DeletionResult DeleteSpan(std::string_view text, const StatementSpan& span,
                          std::string_view file) {
  if (span.span.start > span.span.end || span.span.end > text.size()) {
    throw ReparseFailure("span lies outside the source text");
  }
  size_t cut_start = span.span.start;
  size_t cut_end = span.span.end;
  size_t line_start = cut_start;
  while (line_start > 0 && text[line_start - 1] != '\n') --line_start;
  if (BlankBetween(text, line_start, cut_start)) {
    size_t after = cut_end;
    while (after < text.size() &&
           (text[after] == ' ' || text[after] == '\t' || text[after] == '\r')) {
      ++after;
    }
    if (after == text.size() || text[after] == '\n') {
      cut_start = line_start;
      cut_end = after == text.size() ? after : after + 1;
    }
  }
  DeletionResult result;
  result.text.reserve(text.size() - (cut_end - cut_start) + 1);
  result.text.append(text.substr(0, cut_start));
  result.text.push_back('\n');
  result.text.append(text.substr(cut_end));
  result.record.file = std::string(file);
  result.record.span = span.span;
  result.record.removed_text =
      std::string(text.substr(span.span.start, span.span.size()));
  try {
    ParseSource(result.text);
  } catch (const SyntaxError& e) {
    throw ReparseFailure(std::string("deletion breaks syntax: ") + e.what());
  }
  return result;
}

LineColumn LocateOffset(std::string_view text, size_t offset) {
  LineColumn lc;
  offset = std::min(offset, text.size());
  for (size_t i = 0; i < offset; ++i) {
    if (text[i] == '\n') {
      ++lc.line;
      lc.column = 1;
    } else {
      ++lc.column;
    }
  }
  return lc;
}

}  // namespace pageopt
