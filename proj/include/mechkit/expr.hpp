#pragma once

// Arithmetic expressions over named variables and parameters.
//
// Grammar (whitespace is ignored between tokens):
//
//   expr    := term   { ('+' | '-') term }
//   term    := unary  { ('*' | '/') unary }
//   unary   := '-' unary | power
//   power   := primary [ '^' unary ]            (right associative)
//   primary := number | identifier | call | '(' expr ')'
//   call    := function '(' expr { ',' expr } ')'
//
// `^` binds tighter than unary minus, so -x^2 is -(x^2), while the exponent
// may carry its own sign (x^-2). Functions: sin cos tan exp log sqrt abs (one
// argument) and pow (two). There is no implicit multiplication.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mechkit/error.hpp"

namespace mechkit {

using Params = std::map<std::string, double>;

enum class NodeKind { constant, symbol, negate, binary, call };
enum class BinaryOp { add, sub, mul, div, pow };
enum class Function { sin, cos, tan, exp, log, sqrt, pow, abs };

inline constexpr std::array<std::pair<std::string_view, Function>, 8> kFunctions{{
    {"sin", Function::sin},
    {"cos", Function::cos},
    {"tan", Function::tan},
    {"exp", Function::exp},
    {"log", Function::log},
    {"sqrt", Function::sqrt},
    {"pow", Function::pow},
    {"abs", Function::abs},
}};

inline std::optional<Function> function_from_name(std::string_view name) {
  for (const auto& [n, f] : kFunctions) {
    if (n == name) return f;
  }
  return std::nullopt;
}

inline std::string_view function_name(Function f) {
  for (const auto& [n, g] : kFunctions) {
    if (g == f) return n;
  }
  return "?";
}

inline std::size_t function_arity(Function f) { return f == Function::pow ? 2 : 1; }

inline bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
  auto digit = [](char c) { return c >= '0' && c <= '9'; };
  if (!alpha(s.front())) return false;
  for (char c : s) {
    if (!alpha(c) && !digit(c)) return false;
  }
  return true;
}

// Immutable expression tree. Copies share structure.
class Expr {
 public:
  struct Node {
    NodeKind kind = NodeKind::constant;
    BinaryOp op = BinaryOp::add;
    Function func = Function::sin;
    double value = 0.0;
    std::string name;
    std::vector<Expr> children;
  };

  Expr() : node_(std::make_shared<const Node>()) {}

  static Expr constant(double v) {
    Node n;
    n.kind = NodeKind::constant;
    n.value = v;
    return Expr(std::move(n));
  }

  static Expr symbol(std::string name) {
    if (!is_identifier(name)) throw ValidationError("invalid identifier '" + name + "'");
    if (function_from_name(name)) {
      throw ValidationError("'" + name + "' is a function name, not an identifier");
    }
    Node n;
    n.kind = NodeKind::symbol;
    n.name = std::move(name);
    return Expr(std::move(n));
  }

  static Expr negate(Expr a) {
    Node n;
    n.kind = NodeKind::negate;
    n.children = {std::move(a)};
    return Expr(std::move(n));
  }

  static Expr binary(BinaryOp op, Expr a, Expr b) {
    Node n;
    n.kind = NodeKind::binary;
    n.op = op;
    n.children = {std::move(a), std::move(b)};
    return Expr(std::move(n));
  }

  static Expr call(Function f, std::vector<Expr> args) {
    if (args.size() != function_arity(f)) {
      throw ValidationError("function '" + std::string(function_name(f)) + "' takes " +
                            std::to_string(function_arity(f)) + " argument(s)");
    }
    Node n;
    n.kind = NodeKind::call;
    n.func = f;
    n.children = std::move(args);
    return Expr(std::move(n));
  }

  NodeKind kind() const noexcept { return node_->kind; }
  BinaryOp op() const noexcept { return node_->op; }
  Function func() const noexcept { return node_->func; }
  double value() const noexcept { return node_->value; }
  const std::string& name() const noexcept { return node_->name; }
  const std::vector<Expr>& children() const noexcept { return node_->children; }
  const Expr& child(std::size_t i) const { return node_->children.at(i); }

  friend bool operator==(const Expr& a, const Expr& b) {
    if (a.node_ == b.node_) return true;
    const Node& x = *a.node_;
    const Node& y = *b.node_;
    if (x.kind != y.kind) return false;
    switch (x.kind) {
      case NodeKind::constant:
        return x.value == y.value || (std::isnan(x.value) && std::isnan(y.value));
      case NodeKind::symbol:
        return x.name == y.name;
      case NodeKind::binary:
        if (x.op != y.op) return false;
        break;
      case NodeKind::call:
        if (x.func != y.func) return false;
        break;
      case NodeKind::negate:
        break;
    }
    if (x.children.size() != y.children.size()) return false;
    for (std::size_t i = 0; i < x.children.size(); ++i) {
      if (!(x.children[i] == y.children[i])) return false;
    }
    return true;
  }

 private:
  explicit Expr(Node n) : node_(std::make_shared<const Node>(std::move(n))) {}

  std::shared_ptr<const Node> node_;
};

inline Expr operator+(Expr a, Expr b) { return Expr::binary(BinaryOp::add, std::move(a), std::move(b)); }
inline Expr operator-(Expr a, Expr b) { return Expr::binary(BinaryOp::sub, std::move(a), std::move(b)); }
inline Expr operator*(Expr a, Expr b) { return Expr::binary(BinaryOp::mul, std::move(a), std::move(b)); }
inline Expr operator/(Expr a, Expr b) { return Expr::binary(BinaryOp::div, std::move(a), std::move(b)); }
inline Expr operator-(Expr a) { return Expr::negate(std::move(a)); }

// Ordered variable names with a name -> slot index.
class VarLayout {
 public:
  VarLayout() = default;

  explicit VarLayout(std::vector<std::string> names) : names_(std::move(names)) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (!is_identifier(names_[i])) throw ValidationError("invalid variable name '" + names_[i] + "'");
      if (!index_.emplace(names_[i], i).second) {
        throw ValidationError("duplicate variable name '" + names_[i] + "'");
      }
    }
  }

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }

  std::optional<std::size_t> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t index(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw ValidationError("variable '" + std::string(name) + "' is not in the layout");
  }

  bool contains(std::string_view name) const { return find(name).has_value(); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expr parse() {
    Expr e = expression();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "', expected operator or end of input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(pos_, msg); }

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' ||
                                   text_[pos_] == '\r')) {
      ++pos_;
    }
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      std::string got = pos_ < text_.size() ? "'" + std::string(1, text_[pos_]) + "'" : "end of input";
      fail(std::string("expected '") + c + "', got " + got);
    }
  }

  Expr expression() {
    Expr lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = Expr::binary(BinaryOp::add, std::move(lhs), term());
      } else if (accept('-')) {
        lhs = Expr::binary(BinaryOp::sub, std::move(lhs), term());
      } else {
        return lhs;
      }
    }
  }

  Expr term() {
    Expr lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = Expr::binary(BinaryOp::mul, std::move(lhs), unary());
      } else if (accept('/')) {
        lhs = Expr::binary(BinaryOp::div, std::move(lhs), unary());
      } else {
        return lhs;
      }
    }
  }

  Expr unary() {
    if (accept('-')) return Expr::negate(unary());
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (accept('^')) return Expr::binary(BinaryOp::pow, std::move(base), unary());
    return base;
  }

  static bool is_digit(char c) { return c >= '0' && c <= '9'; }
  static bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }

  Expr primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("expected expression, got end of input");
    const char c = text_[pos_];
    if (is_digit(c) || c == '.') return number();
    if (is_alpha(c)) return identifier_or_call();
    if (c == '(') {
      ++pos_;
      Expr e = expression();
      expect(')');
      return e;
    }
    fail("expected expression, got '" + std::string(1, c) + "'");
  }

  Expr number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t save = pos_;
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (pos_ < text_.size() && is_digit(text_[pos_])) {
        while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
      } else {
        pos_ = save;
      }
    }
    double v = 0.0;
    const auto* first = text_.data() + start;
    const auto* last = text_.data() + pos_;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
      pos_ = start;
      fail("malformed number");
    }
    if (pos_ < text_.size() && is_alpha(text_[pos_])) {
      fail("implicit multiplication is not supported; insert '*'");
    }
    return Expr::constant(v);
  }

  Expr identifier_or_call() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (is_alpha(text_[pos_]) || is_digit(text_[pos_]))) ++pos_;
    std::string name(text_.substr(start, pos_ - start));
    skip_ws();
    const bool is_call = pos_ < text_.size() && text_[pos_] == '(';
    auto f = function_from_name(name);
    if (!is_call) {
      if (f) {
        pos_ = start;
        fail("function '" + name + "' requires an argument list");
      }
      return Expr::symbol(std::move(name));
    }
    if (!f) {
      pos_ = start;
      fail("unknown function '" + name + "'");
    }
    const std::size_t call_pos = start;
    ++pos_;  // '('
    std::vector<Expr> args;
    skip_ws();
    if (!accept(')')) {
      args.push_back(expression());
      while (accept(',')) args.push_back(expression());
      expect(')');
    }
    if (args.size() != function_arity(*f)) {
      pos_ = call_pos;
      fail("function '" + name + "' takes " + std::to_string(function_arity(*f)) + " argument(s), got " +
           std::to_string(args.size()));
    }
    return Expr::call(*f, std::move(args));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Expr parse(std::string_view text) { return detail::Parser(text).parse(); }

// ---------------------------------------------------------------------------
// Printing. The output parses back to a structurally identical tree.

namespace detail {

inline int precedence(const Expr& e) {
  switch (e.kind()) {
    case NodeKind::constant:
    case NodeKind::symbol:
    case NodeKind::call:
      return 5;
    case NodeKind::negate:
      return 3;
    case NodeKind::binary:
      switch (e.op()) {
        case BinaryOp::add:
        case BinaryOp::sub:
          return 1;
        case BinaryOp::mul:
        case BinaryOp::div:
          return 2;
        case BinaryOp::pow:
          return 4;
      }
  }
  return 0;
}

inline std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return std::string(buf.data(), ptr);
}

inline void print_to(const Expr& e, std::string& out);

inline void print_wrapped(const Expr& e, int min_prec, std::string& out) {
  if (precedence(e) < min_prec) {
    out += '(';
    print_to(e, out);
    out += ')';
  } else {
    print_to(e, out);
  }
}

inline void print_to(const Expr& e, std::string& out) {
  switch (e.kind()) {
    case NodeKind::constant:
      // Negative literals never come out of the parser; wrap them so the
      // printed form at least stays readable.
      if (std::signbit(e.value())) {
        out += "(" + format_number(e.value()) + ")";
      } else {
        out += format_number(e.value());
      }
      return;
    case NodeKind::symbol:
      out += e.name();
      return;
    case NodeKind::negate:
      out += '-';
      print_wrapped(e.child(0), 3, out);
      return;
    case NodeKind::call:
      out += function_name(e.func());
      out += '(';
      for (std::size_t i = 0; i < e.children().size(); ++i) {
        if (i) out += ", ";
        print_to(e.child(i), out);
      }
      out += ')';
      return;
    case NodeKind::binary: {
      const int p = precedence(e);
      if (e.op() == BinaryOp::pow) {
        print_wrapped(e.child(0), 5, out);
        out += '^';
        print_wrapped(e.child(1), 3, out);
        return;
      }
      print_wrapped(e.child(0), p, out);
      switch (e.op()) {
        case BinaryOp::add: out += " + "; break;
        case BinaryOp::sub: out += " - "; break;
        case BinaryOp::mul: out += '*'; break;
        case BinaryOp::div: out += '/'; break;
        case BinaryOp::pow: break;
      }
      print_wrapped(e.child(1), p + 1, out);
      return;
    }
  }
}

}  // namespace detail

inline std::string to_string(const Expr& e) {
  std::string out;
  detail::print_to(e, out);
  return out;
}

// ---------------------------------------------------------------------------
// Identifiers

namespace detail {
inline void collect_identifiers(const Expr& e, std::set<std::string>& out) {
  if (e.kind() == NodeKind::symbol) out.insert(e.name());
  for (const auto& c : e.children()) collect_identifiers(c, out);
}
}  // namespace detail

inline std::set<std::string> free_identifiers(const Expr& e) {
  std::set<std::string> out;
  detail::collect_identifiers(e, out);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation
//
// The evaluator is generic over the scalar type. A scalar type T provides
// arithmetic operators, the math functions below (found by ADL for class
// types), `primal(T)` returning the double value, and `locally_constant(T)`
// telling whether all derivative parts vanish.

inline double primal(double x) noexcept { return x; }
inline bool locally_constant(double) noexcept { return true; }

namespace detail {

[[noreturn]] inline void domain_fail(const Expr& e, const std::string& what) {
  throw DomainError(what + " in '" + to_string(e) + "'");
}

inline bool is_integer(double x) { return std::isfinite(x) && std::floor(x) == x; }

// x^n by left-to-right repeated multiplication; n != 0.
template <class T>
T power_by_multiplication(const T& x, std::int64_t n) {
  const std::int64_t m = n < 0 ? -n : n;
  T acc = x;
  if (m <= 64) {
    for (std::int64_t i = 1; i < m; ++i) acc = acc * x;
  } else {
    T base = x;
    std::int64_t k = m - 1;
    while (k > 0) {
      if (k & 1) acc = acc * base;
      base = base * base;
      k >>= 1;
    }
  }
  return acc;
}

inline double pow_real(double a, double b) { return std::pow(a, b); }

template <class T>
T detail_pow(const Expr& e, const T& a, const T& b) {
  using std::exp;
  using std::log;
  const double x = primal(a);
  const double y = primal(b);
  if (locally_constant(b) && is_integer(y) && std::fabs(y) < 9.0e15) {
    const auto n = static_cast<std::int64_t>(y);
    if (n == 0) return T(1.0);
    if (n < 0) {
      if (x == 0.0) domain_fail(e, "division by zero (zero base with negative exponent)");
      return T(1.0) / power_by_multiplication(a, n);
    }
    return power_by_multiplication(a, n);
  }
  if (!(x > 0.0)) domain_fail(e, "non-integer exponent requires a positive base");
  return pow_real(a, b);
}

template <class T>
T abs_checked(const Expr& e, const T& a) {
  using std::abs;
  if (primal(a) == 0.0 && !locally_constant(a)) domain_fail(e, "derivative of abs at 0");
  return abs(a);
}

template <class T, class Resolver>
T evaluate(const Expr& e, const Resolver& resolve) {
  using std::cos;
  using std::exp;
  using std::log;
  using std::sin;
  using std::sqrt;
  using std::tan;
  switch (e.kind()) {
    case NodeKind::constant:
      return T(e.value());
    case NodeKind::symbol:
      return resolve(e.name());
    case NodeKind::negate:
      return -evaluate<T>(e.child(0), resolve);
    case NodeKind::binary: {
      T a = evaluate<T>(e.child(0), resolve);
      T b = evaluate<T>(e.child(1), resolve);
      switch (e.op()) {
        case BinaryOp::add: return a + b;
        case BinaryOp::sub: return a - b;
        case BinaryOp::mul: return a * b;
        case BinaryOp::div:
          if (primal(b) == 0.0) domain_fail(e, "division by zero");
          return a / b;
        case BinaryOp::pow: break;
      }
      return detail_pow(e, a, b);
    }
    case NodeKind::call: {
      if (e.func() == Function::pow) {
        T a = evaluate<T>(e.child(0), resolve);
        T b = evaluate<T>(e.child(1), resolve);
        return detail_pow(e, a, b);
      }
      T a = evaluate<T>(e.child(0), resolve);
      const double x = primal(a);
      switch (e.func()) {
        case Function::sin: return sin(a);
        case Function::cos: return cos(a);
        case Function::tan:
          if (cos(x) == 0.0) domain_fail(e, "tan at a pole");
          return tan(a);
        case Function::exp: return exp(a);
        case Function::log:
          if (!(x > 0.0)) domain_fail(e, "log of a non-positive argument");
          return log(a);
        case Function::sqrt:
          if (x < 0.0) domain_fail(e, "sqrt of a negative argument");
          if (x == 0.0 && !locally_constant(a)) domain_fail(e, "derivative of sqrt at 0");
          return sqrt(a);
        case Function::abs:
          return abs_checked(e, a);
        case Function::pow: break;
      }
    }
  }
  domain_fail(e, "unsupported node");
}

}  // namespace detail

// Reference evaluation with doubles.
inline double eval(const Expr& e, const VarLayout& layout, std::span<const double> point,
                   const Params& params = {}) {
  if (point.size() != layout.size()) {
    throw DimensionError("point has " + std::to_string(point.size()) + " entries, layout has " +
                         std::to_string(layout.size()));
  }
  auto resolve = [&](const std::string& name) -> double {
    if (auto i = layout.find(name)) return point[*i];
    auto it = params.find(name);
    if (it == params.end()) throw UnboundIdentifier(name);
    return it->second;
  };
  return detail::evaluate<double>(e, resolve);
}

// Evaluate an expression that depends only on parameters.
inline double eval(const Expr& e, const Params& params = {}) {
  static const VarLayout empty;
  return eval(e, empty, std::span<const double>{}, params);
}

inline double eval(std::string_view text, const VarLayout& layout, std::span<const double> point,
                   const Params& params = {}) {
  return eval(parse(text), layout, point, params);
}

}  // namespace mechkit
