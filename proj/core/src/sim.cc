#include "pageopt/sim.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <deque>
#include <memory>
#include <unordered_map>
#include <utility>

#include "pageopt/ast.h"
#include "pageopt/errors.h"

namespace pageopt {

uint64_t Fnv1a64(std::string_view bytes) {
  uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

namespace {

constexpr int64_t kCallOverheadUs = 10;
constexpr std::string_view kSentinelKey = "\x01sentinel";

struct Array;
struct Function;
struct Env;

enum class Native {
  kPaint,
  kWriteText,
  kMarkLoaded,
  kDefer,
  kLog,
  kPush,
  kForEach,
  kMap,
};

std::string_view NativeName(Native n) {
  switch (n) {
    case Native::kPaint: return "paint";
    case Native::kWriteText: return "writeText";
    case Native::kMarkLoaded: return "markLoaded";
    case Native::kDefer: return "defer";
    case Native::kLog: return "log";
    case Native::kPush: return "push";
    case Native::kForEach: return "forEach";
    case Native::kMap: return "map";
  }
  return "?";
}

struct Value {
  enum class Type { kUndefined, kNumber, kBool, kString, kArray, kFunction,
                    kNative };
  Type type = Type::kUndefined;
  double number = 0.0;
  bool boolean = false;
  std::string string;
  Array* array = nullptr;  // Also the receiver of array natives.
  Function* function = nullptr;
  Native native = Native::kLog;

  static Value Number(double v) {
    Value out;
    out.type = Type::kNumber;
    out.number = v;
    return out;
  }
  static Value Bool(bool v) {
    Value out;
    out.type = Type::kBool;
    out.boolean = v;
    return out;
  }
  static Value String(std::string v) {
    Value out;
    out.type = Type::kString;
    out.string = std::move(v);
    return out;
  }
  static Value OfArray(Array* a) {
    Value out;
    out.type = Type::kArray;
    out.array = a;
    return out;
  }
  static Value OfFunction(Function* f) {
    Value out;
    out.type = Type::kFunction;
    out.function = f;
    return out;
  }
  static Value OfNative(Native n, Array* receiver = nullptr) {
    Value out;
    out.type = Type::kNative;
    out.native = n;
    out.array = receiver;
    return out;
  }
};

struct Array {
  std::vector<Value> items;
};

struct Function {
  const Node* node = nullptr;  // FunctionDeclaration/Expression or Arrow.
  std::string name;
  Env* closure = nullptr;
  std::string file;
};

struct Binding {
  Value value;
  bool is_const = false;
};

struct Env {
  std::unordered_map<std::string, Binding> vars;
  Env* parent = nullptr;

  Binding* Find(const std::string& name) {
    for (Env* env = this; env != nullptr; env = env->parent) {
      auto it = env->vars.find(name);
      if (it != env->vars.end()) return &it->second;
    }
    return nullptr;
  }
};

struct Crash {
  std::string message;
};
struct Timeout {
  bool by_clock = false;
};

struct Completion {
  bool returned = false;
  Value value;
};

std::string NumberToString(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Infinity" : "-Infinity";
  if (v == 0) return "0";
  if (v == std::floor(v) && std::fabs(v) < 1e21) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.0f", v);
    return buf;
  }
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string Unescape(std::string_view raw) {
  std::string out;
  raw = raw.substr(1, raw.size() - 2);
  for (size_t i = 0; i < raw.size(); ++i) {
    char c = raw[i];
    if (c != '\\' || i + 1 >= raw.size()) {
      out.push_back(c);
      continue;
    }
    char e = raw[++i];
    switch (e) {
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      case 'r': out.push_back('\r'); break;
      case 'b': out.push_back('\b'); break;
      case 'f': out.push_back('\f'); break;
      case 'v': out.push_back('\v'); break;
      case '0': out.push_back('\0'); break;
      default: out.push_back(e); break;
    }
  }
  return out;
}

class Runtime {
 public:
  explicit Runtime(const SimOptions& options)
      : options_(options),
        clock_(options.start_us),
        framebuffer_(kCanvasSize, kCanvasSize) {
    global_ = NewEnv(nullptr);
    Declare(global_, "paint", Value::OfNative(Native::kPaint), true);
    Declare(global_, "writeText", Value::OfNative(Native::kWriteText), true);
    Declare(global_, "markLoaded", Value::OfNative(Native::kMarkLoaded), true);
    Declare(global_, "defer", Value::OfNative(Native::kDefer), true);
    Declare(global_, "log", Value::OfNative(Native::kLog), true);
    Declare(global_, "undefined", Value{}, true);
  }

  SimOutcome Run(const std::vector<SimScript>& scripts) {
    SimOutcome out;
    try {
      for (const SimScript& script : scripts) RunScript(script);
      while (!queue_.empty()) {
        Value task = std::move(queue_.front());
        queue_.pop_front();
        CallValue(task, {});
      }
    } catch (const Crash& crash) {
      out.crashed = true;
      out.crash_message = crash.message;
    } catch (const Timeout& timeout) {
      out.timed_out = true;
      timeout_by_clock_ = timeout.by_clock;
    }
    std::stable_sort(events_.begin(), events_.end(),
                     [](const TraceEvent& a, const TraceEvent& b) {
                       if (a.timestamp_us != b.timestamp_us)
                         return a.timestamp_us < b.timestamp_us;
                       return a.duration_us > b.duration_us;
                     });
    out.events = std::move(events_);
    out.framebuffer = std::move(framebuffer_);
    out.steps = steps_;
    out.elapsed_ms = (out.timed_out && timeout_by_clock_)
                         ? options_.timeout_ms
                         : double(clock_ - options_.start_us) / 1000.0;
    bool sentinel = false;
    for (const auto& [id, text] : document_) {
      if (text.find(options_.sentinel_text) != std::string::npos) {
        sentinel = true;
      }
    }
    document_.erase(std::string(kSentinelKey));
    if (sentinel) document_["sentinel"] = options_.sentinel_text;
    out.document = std::move(document_);
    out.loaded = sentinel && !out.crashed && !out.timed_out;
    return out;
  }

 private:
  Env* NewEnv(Env* parent) {
    envs_.emplace_back();
    envs_.back().parent = parent;
    return &envs_.back();
  }

  Array* NewArray() {
    arrays_.emplace_back();
    return &arrays_.back();
  }

  Function* NewFunction(const Node* node, std::string name, Env* closure) {
    functions_.push_back({node, std::move(name), closure, current_file_});
    return &functions_.back();
  }

  void Declare(Env* env, const std::string& name, Value value, bool is_const) {
    env->vars[name] = Binding{std::move(value), is_const};
  }

  void Step() {
    ++steps_;
    ++clock_;
    if (steps_ > options_.step_budget) throw Timeout{false};
    if (double(clock_ - options_.start_us) > options_.timeout_ms * 1000.0) {
      throw Timeout{true};
    }
  }

  void Emit(std::string name, const char* category, int64_t start,
            std::optional<std::string> source) {
    TraceEvent e;
    e.name = std::move(name);
    e.category = category;
    e.phase = Phase::kComplete;
    e.timestamp_us = start;
    e.duration_us = clock_ - start;
    e.process_id = 1;
    e.thread_id = 1;
    e.source_url = std::move(source);
    events_.push_back(std::move(e));
  }

  void RunScript(const SimScript& script) {
    current_file_ = script.file_name;
    asts_.push_back(std::make_unique<Ast>());
    try {
      *asts_.back() = ParseSource(script.source);
    } catch (const SyntaxError& e) {
      throw Crash{script.file_name + ": " + e.what()};
    }
    const Node& program = asts_.back()->root;
    int64_t start = clock_;
    auto close = [&] {
      clock_ += kCallOverheadUs;
      Emit("EvaluateScript", "script", start, script.file_name);
    };
    try {
      Hoist(program, global_);
      for (const Node& stmt : program.children) {
        Completion c = Exec(stmt, global_);
        if (c.returned) throw Crash{"SyntaxError: return outside function"};
      }
    } catch (const Crash&) {
      close();
      throw;
    }
    close();
  }

  void Hoist(const Node& block, Env* env) {
    for (const Node& stmt : block.children) {
      if (stmt.kind == NodeKind::kFunctionDeclaration) {
        const std::string& name = stmt.children[0].text;
        Declare(env, name, Value::OfFunction(NewFunction(&stmt, name, env)),
                false);
      }
    }
  }

  // --- Statements ---------------------------------------------------------

  Completion Exec(const Node& stmt, Env* env) {
    Step();
    switch (stmt.kind) {
      case NodeKind::kVariableDeclaration:
      case NodeKind::kForInitDeclaration:
        DeclareAll(stmt, env);
        return {};
      case NodeKind::kFunctionDeclaration:
        return {};
      case NodeKind::kReturnStatement: {
        Completion c;
        c.returned = true;
        if (!stmt.children.empty()) c.value = Eval(stmt.children[0], env);
        return c;
      }
      case NodeKind::kIfStatement:
        if (Truthy(Eval(stmt.children[0], env))) {
          return Exec(stmt.children[1], env);
        }
        if (stmt.children.size() > 2) return Exec(stmt.children[2], env);
        return {};
      case NodeKind::kForStatement:
        return ExecFor(stmt, env);
      case NodeKind::kBlock: {
        Env* inner = NewEnv(env);
        Hoist(stmt, inner);
        for (const Node& child : stmt.children) {
          Completion c = Exec(child, inner);
          if (c.returned) return c;
        }
        return {};
      }
      case NodeKind::kExpressionStatement:
        Eval(stmt.children[0], env);
        return {};
      default:
        throw Crash{"unexpected statement kind " +
                    std::string(NodeKindName(stmt.kind))};
    }
  }

  void DeclareAll(const Node& decl, Env* env) {
    bool is_const = decl.text == "const";
    for (const Node& declarator : decl.children) {
      const std::string& name = declarator.children[0].text;
      Value value;
      if (declarator.children.size() > 1) {
        value = EvalNamed(declarator.children[1], env, name);
      }
      Declare(env, name, std::move(value), is_const);
    }
  }

  Completion ExecFor(const Node& stmt, Env* env) {
    const Node& init = stmt.children[0];
    const Node& test = stmt.children[1];
    const Node& update = stmt.children[2];
    const Node& body = stmt.children[3];
    Env* loop_env = NewEnv(env);
    bool per_iteration = init.kind == NodeKind::kForInitDeclaration;
    if (per_iteration) {
      DeclareAll(init, loop_env);
    } else if (init.kind != NodeKind::kEmpty) {
      Eval(init, loop_env);
    }
    auto copy_env = [&](Env* from) {
      Env* next = NewEnv(env);
      next->vars = from->vars;
      return next;
    };
    Env* iter = per_iteration ? copy_env(loop_env) : loop_env;
    while (true) {
      if (test.kind != NodeKind::kEmpty && !Truthy(Eval(test, iter))) break;
      Completion c = Exec(body, iter);
      if (c.returned) return c;
      if (per_iteration) iter = copy_env(iter);
      if (update.kind != NodeKind::kEmpty) Eval(update, iter);
    }
    return {};
  }

  // --- Expressions --------------------------------------------------------

  // Evaluates `node`, naming anonymous functions after their binding.
  Value EvalNamed(const Node& node, Env* env, const std::string& name) {
    if (node.kind == NodeKind::kArrowFunction ||
        (node.kind == NodeKind::kFunctionExpression &&
         node.children[0].kind == NodeKind::kEmpty)) {
      return Value::OfFunction(NewFunction(&node, name, env));
    }
    return Eval(node, env);
  }

  Value Eval(const Node& node, Env* env) {
    switch (node.kind) {
      case NodeKind::kIdentifier: {
        Binding* b = env->Find(node.text);
        if (b == nullptr) {
          throw Crash{"ReferenceError: " + node.text + " is not defined"};
        }
        return b->value;
      }
      case NodeKind::kNumber: {
        auto it = numbers_.find(&node);
        if (it == numbers_.end()) {
          it = numbers_.emplace(&node, std::strtod(node.text.c_str(), nullptr))
                   .first;
        }
        return Value::Number(it->second);
      }
      case NodeKind::kString: {
        auto it = strings_.find(&node);
        if (it == strings_.end()) {
          it = strings_.emplace(&node, Unescape(node.text)).first;
        }
        return Value::String(it->second);
      }
      case NodeKind::kBoolean:
        return Value::Bool(node.text == "true");
      case NodeKind::kArray: {
        Array* array = NewArray();
        for (const Node& child : node.children) {
          array->items.push_back(Eval(child, env));
        }
        return Value::OfArray(array);
      }
      case NodeKind::kMember:
        return GetProperty(Eval(node.children[0], env),
                           node.children[1].text);
      case NodeKind::kComputedMember:
        return GetIndex(Eval(node.children[0], env),
                        Eval(node.children[1], env));
      case NodeKind::kCall:
        return EvalCall(node, env);
      case NodeKind::kAssignment:
        return EvalAssignment(node, env);
      case NodeKind::kBinary:
        return EvalBinary(node, env);
      case NodeKind::kUnary: {
        Value v = Eval(node.children[0], env);
        if (node.text == "!") return Value::Bool(!Truthy(v));
        return Value::Number(-ToNumber(v));
      }
      case NodeKind::kUpdate: {
        Value old = Value::Number(ToNumber(Eval(node.children[0], env)));
        double delta = node.text == "++" ? 1.0 : -1.0;
        Store(node.children[0], env, Value::Number(old.number + delta));
        return old;
      }
      case NodeKind::kFunctionExpression: {
        std::string name = node.children[0].kind == NodeKind::kIdentifier
                               ? node.children[0].text
                               : "(anonymous)";
        return Value::OfFunction(NewFunction(&node, std::move(name), env));
      }
      case NodeKind::kArrowFunction:
        return Value::OfFunction(NewFunction(&node, "(anonymous)", env));
      case NodeKind::kParenthesized:
        return Eval(node.children[0], env);
      default:
        throw Crash{"unexpected expression kind " +
                    std::string(NodeKindName(node.kind))};
    }
  }

  Value GetProperty(const Value& object, const std::string& name) {
    switch (object.type) {
      case Value::Type::kArray:
        if (name == "length") {
          return Value::Number(double(object.array->items.size()));
        }
        if (name == "push") return Value::OfNative(Native::kPush, object.array);
        if (name == "forEach") {
          return Value::OfNative(Native::kForEach, object.array);
        }
        if (name == "map") return Value::OfNative(Native::kMap, object.array);
        return {};
      case Value::Type::kString:
        if (name == "length") return Value::Number(double(object.string.size()));
        return {};
      case Value::Type::kUndefined:
        throw Crash{"TypeError: cannot read property '" + name +
                    "' of undefined"};
      default:
        return {};
    }
  }

  Value GetIndex(const Value& object, const Value& index) {
    if (object.type == Value::Type::kUndefined) {
      throw Crash{"TypeError: cannot index undefined"};
    }
    if (index.type == Value::Type::kString) {
      return GetProperty(object, index.string);
    }
    double i = ToNumber(index);
    if (object.type == Value::Type::kArray) {
      if (i >= 0 && i < double(object.array->items.size()) &&
          i == std::floor(i)) {
        return object.array->items[size_t(i)];
      }
      return {};
    }
    if (object.type == Value::Type::kString) {
      if (i >= 0 && i < double(object.string.size()) && i == std::floor(i)) {
        return Value::String(std::string(1, object.string[size_t(i)]));
      }
      return {};
    }
    return {};
  }

  void Store(const Node& target, Env* env, Value value) {
    switch (target.kind) {
      case NodeKind::kIdentifier: {
        Binding* b = env->Find(target.text);
        if (b == nullptr) {
          throw Crash{"ReferenceError: " + target.text + " is not defined"};
        }
        if (b->is_const) {
          throw Crash{"TypeError: assignment to constant " + target.text};
        }
        b->value = std::move(value);
        return;
      }
      case NodeKind::kComputedMember: {
        Value object = Eval(target.children[0], env);
        double i = ToNumber(Eval(target.children[1], env));
        if (object.type != Value::Type::kArray || !(i >= 0) ||
            i != std::floor(i) || i > 1e7) {
          throw Crash{"TypeError: invalid indexed assignment"};
        }
        auto& items = object.array->items;
        if (size_t(i) >= items.size()) items.resize(size_t(i) + 1);
        items[size_t(i)] = std::move(value);
        return;
      }
      default:
        throw Crash{"TypeError: cannot assign to this target"};
    }
  }

  Value EvalAssignment(const Node& node, Env* env) {
    const Node& target = node.children[0];
    Value value;
    if (node.text == "=") {
      std::string name = target.kind == NodeKind::kIdentifier
                             ? target.text
                             : target.kind == NodeKind::kMember
                                   ? target.children[1].text
                                   : "(anonymous)";
      value = EvalNamed(node.children[1], env, name);
    } else {
      Value current = Eval(target, env);
      Value rhs = Eval(node.children[1], env);
      value = node.text == "+=" ? Add(current, rhs)
                                : Value::Number(ToNumber(current) -
                                                ToNumber(rhs));
    }
    Store(target, env, value);
    return value;
  }

  Value EvalBinary(const Node& node, Env* env) {
    const std::string& op = node.text;
    if (op == "&&" || op == "||") {
      Value left = Eval(node.children[0], env);
      bool t = Truthy(left);
      if ((op == "&&") ? !t : t) return left;
      return Eval(node.children[1], env);
    }
    Value a = Eval(node.children[0], env);
    Value b = Eval(node.children[1], env);
    if (op == "+") return Add(a, b);
    if (op == "-") return Value::Number(ToNumber(a) - ToNumber(b));
    if (op == "*") return Value::Number(ToNumber(a) * ToNumber(b));
    if (op == "/") return Value::Number(ToNumber(a) / ToNumber(b));
    if (op == "%") return Value::Number(std::fmod(ToNumber(a), ToNumber(b)));
    if (op == "==" || op == "===") return Value::Bool(StrictEquals(a, b));
    if (op == "!=" || op == "!==") return Value::Bool(!StrictEquals(a, b));
    bool result;
    if (a.type == Value::Type::kString && b.type == Value::Type::kString) {
      int cmp = a.string.compare(b.string);
      result = op == "<"    ? cmp < 0
               : op == "<=" ? cmp <= 0
               : op == ">"  ? cmp > 0
                            : cmp >= 0;
    } else {
      double x = ToNumber(a);
      double y = ToNumber(b);
      result = op == "<"    ? x < y
               : op == "<=" ? x <= y
               : op == ">"  ? x > y
                            : x >= y;
    }
    return Value::Bool(result);
  }

  Value Add(const Value& a, const Value& b) {
    if (a.type == Value::Type::kString || b.type == Value::Type::kString) {
      return Value::String(ToString(a) + ToString(b));
    }
    return Value::Number(ToNumber(a) + ToNumber(b));
  }

  static bool StrictEquals(const Value& a, const Value& b) {
    if (a.type != b.type) return false;
    switch (a.type) {
      case Value::Type::kUndefined: return true;
      case Value::Type::kNumber: return a.number == b.number;
      case Value::Type::kBool: return a.boolean == b.boolean;
      case Value::Type::kString: return a.string == b.string;
      case Value::Type::kArray: return a.array == b.array;
      case Value::Type::kFunction: return a.function == b.function;
      case Value::Type::kNative:
        return a.native == b.native && a.array == b.array;
    }
    return false;
  }

  static bool Truthy(const Value& v) {
    switch (v.type) {
      case Value::Type::kUndefined: return false;
      case Value::Type::kNumber: return v.number != 0 && !std::isnan(v.number);
      case Value::Type::kBool: return v.boolean;
      case Value::Type::kString: return !v.string.empty();
      default: return true;
    }
  }

  static double ToNumber(const Value& v) {
    switch (v.type) {
      case Value::Type::kNumber: return v.number;
      case Value::Type::kBool: return v.boolean ? 1.0 : 0.0;
      case Value::Type::kString: {
        if (v.string.empty()) return 0.0;
        char* end = nullptr;
        double d = std::strtod(v.string.c_str(), &end);
        return *end == '\0' ? d : std::nan("");
      }
      default: return std::nan("");
    }
  }

  std::string ToString(const Value& v) {
    switch (v.type) {
      case Value::Type::kUndefined: return "undefined";
      case Value::Type::kNumber: return NumberToString(v.number);
      case Value::Type::kBool: return v.boolean ? "true" : "false";
      case Value::Type::kString: return v.string;
      case Value::Type::kArray: {
        std::string out;
        for (size_t i = 0; i < v.array->items.size(); ++i) {
          if (i > 0) out.push_back(',');
          const Value& item = v.array->items[i];
          if (item.type != Value::Type::kUndefined) out += ToString(item);
        }
        return out;
      }
      case Value::Type::kFunction: return "function " + v.function->name;
      case Value::Type::kNative:
        return "function " + std::string(NativeName(v.native));
    }
    return "";
  }

  Value EvalCall(const Node& node, Env* env) {
    Value callee = Eval(node.children[0], env);
    std::vector<Value> args;
    args.reserve(node.children.size() - 1);
    for (size_t i = 1; i < node.children.size(); ++i) {
      args.push_back(Eval(node.children[i], env));
    }
    if (callee.type != Value::Type::kFunction &&
        callee.type != Value::Type::kNative) {
      throw Crash{"TypeError: " +
                  std::string(NodeKindName(node.children[0].kind)) +
                  " is not a function"};
    }
    return CallValue(callee, std::move(args));
  }

  Value CallValue(const Value& callee, std::vector<Value> args) {
    if (callee.type == Value::Type::kFunction) {
      return CallFunction(callee.function, std::move(args));
    }
    if (callee.type == Value::Type::kNative) {
      return CallNative(callee, std::move(args));
    }
    throw Crash{"TypeError: value is not a function"};
  }

  Value CallFunction(Function* fn, std::vector<Value> args) {
    if (depth_ >= options_.max_call_depth) {
      throw Crash{"RangeError: maximum call stack size exceeded"};
    }
    int64_t start = clock_;
    ++depth_;
    // Functions created while this body runs belong to the same file.
    std::string caller_file = std::exchange(current_file_, fn->file);
    auto close = [&] {
      --depth_;
      current_file_ = std::move(caller_file);
      clock_ += kCallOverheadUs;
      Emit(fn->name, "function", start, fn->file);
    };
    Value result;
    try {
      const Node& node = *fn->node;
      Env* env = NewEnv(fn->closure);
      const Node& params = node.kind == NodeKind::kArrowFunction
                               ? node.children[0]
                               : node.children[1];
      for (size_t i = 0; i < params.children.size(); ++i) {
        Declare(env, params.children[i].text,
                i < args.size() ? std::move(args[i]) : Value{}, false);
      }
      const Node& body = node.children.back();
      if (body.kind == NodeKind::kBlock) {
        Hoist(body, env);
        for (const Node& stmt : body.children) {
          Completion c = Exec(stmt, env);
          if (c.returned) {
            result = std::move(c.value);
            break;
          }
        }
      } else {
        result = Eval(body, env);
      }
    } catch (const Crash&) {
      close();
      throw;
    }
    close();
    return result;
  }

  Value CallNative(const Value& callee, std::vector<Value> args) {
    int64_t start = clock_;
    auto close = [&] {
      clock_ += kCallOverheadUs;
      Emit(std::string(NativeName(callee.native)), "native", start,
           std::nullopt);
    };
    Value result;
    try {
      result = RunNative(callee, args);
    } catch (const Crash&) {
      close();
      throw;
    }
    close();
    return result;
  }

  Value RunNative(const Value& callee, std::vector<Value>& args) {
    auto arg = [&](size_t i) { return i < args.size() ? args[i] : Value{}; };
    switch (callee.native) {
      case Native::kPaint: {
        double x = std::floor(ToNumber(arg(0)));
        double y = std::floor(ToNumber(arg(1)));
        if (x >= 0 && x < kCanvasSize && y >= 0 && y < kCanvasSize) {
          uint8_t* px = framebuffer_.At(int(x), int(y));
          for (int c = 0; c < 3; ++c) {
            double v = ToNumber(arg(2 + c));
            px[c] = std::isnan(v) ? 0 : uint8_t(std::clamp(v, 0.0, 255.0));
          }
          px[3] = 255;
        }
        return {};
      }
      case Native::kWriteText: {
        std::string id = ToString(arg(0));
        std::string text = ToString(arg(1));
        RenderText(id, text);
        document_[id] = std::move(text);
        return {};
      }
      case Native::kMarkLoaded:
        document_[std::string(kSentinelKey)] = options_.sentinel_text;
        return {};
      case Native::kDefer:
        if (arg(0).type != Value::Type::kFunction) {
          throw Crash{"TypeError: defer expects a function"};
        }
        queue_.push_back(arg(0));
        return {};
      case Native::kLog:
        return {};
      case Native::kPush: {
        auto& items = callee.array->items;
        for (Value& v : args) items.push_back(std::move(v));
        return Value::Number(double(items.size()));
      }
      case Native::kForEach:
      case Native::kMap: {
        Value callback = arg(0);
        if (callback.type != Value::Type::kFunction &&
            callback.type != Value::Type::kNative) {
          throw Crash{"TypeError: callback is not a function"};
        }
        Array* source = callee.array;
        Array* mapped = callee.native == Native::kMap ? NewArray() : nullptr;
        size_t length = source->items.size();
        for (size_t i = 0; i < length && i < source->items.size(); ++i) {
          Value r = CallValue(callback, {source->items[i],
                                         Value::Number(double(i)),
                                         Value::OfArray(source)});
          if (mapped != nullptr) mapped->items.push_back(std::move(r));
        }
        return mapped != nullptr ? Value::OfArray(mapped) : Value{};
      }
    }
    return {};
  }

  void RenderText(const std::string& id, const std::string& text) {
    uint64_t place = Fnv1a64(id);
    int x0 = int(place % 50);
    int x = x0;
    int y = int((place >> 8) % 80);
    for (char ch : text) {
      if (x + 5 > kCanvasSize) {
        x = 0;
        y += 8;
      }
      if (y + 7 > kCanvasSize) return;
      uint64_t glyph = ch == ' ' ? 0 : Fnv1a64(std::string_view(&ch, 1));
      for (int bit = 0; bit < 35; ++bit) {
        uint8_t* px = framebuffer_.At(x + bit % 5, y + bit / 5);
        uint8_t shade = ((glyph >> bit) & 1) ? 0 : 255;
        px[0] = px[1] = px[2] = shade;
        px[3] = 255;
      }
      x += 6;
    }
  }

  SimOptions options_;
  int64_t clock_;
  int64_t steps_ = 0;
  int depth_ = 0;
  bool timeout_by_clock_ = false;
  std::string current_file_;
  Screenshot framebuffer_;
  std::map<std::string, std::string> document_;
  std::vector<TraceEvent> events_;
  std::deque<Value> queue_;
  Env* global_ = nullptr;
  std::deque<Env> envs_;
  std::deque<Array> arrays_;
  std::deque<Function> functions_;
  std::vector<std::unique_ptr<Ast>> asts_;
  std::unordered_map<const Node*, double> numbers_;
  std::unordered_map<const Node*, std::string> strings_;
};

}  // namespace

SimOutcome RunSimPage(const std::vector<SimScript>& scripts,
                      const SimOptions& options) {
  Runtime runtime(options);
  return runtime.Run(scripts);
}

}  // namespace pageopt
