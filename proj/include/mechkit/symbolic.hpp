#pragma once

// Symbolic partial derivatives of expression trees. Used to build lifted
// vector fields (complete and vertical lifts) as expressions; numerical
// derivatives everywhere else come from autodiff.hpp.
//
// The builders fold the trivial cases (0 + x, 1 * x, x ^ 1, constant
// arithmetic) so lifted components stay readable when printed.

#include <string>

#include "mechkit/expr.hpp"

namespace mechkit {

namespace detail {

inline bool is_const(const Expr& e, double v) { return e.kind() == NodeKind::constant && e.value() == v; }
inline bool is_const(const Expr& e) { return e.kind() == NodeKind::constant; }

inline Expr s_add(Expr a, Expr b) {
  if (is_const(a, 0.0)) return b;
  if (is_const(b, 0.0)) return a;
  if (is_const(a) && is_const(b)) return Expr::constant(a.value() + b.value());
  return a + b;
}

inline Expr s_neg(Expr a) {
  if (is_const(a)) return Expr::constant(-a.value());
  if (a.kind() == NodeKind::negate) return a.child(0);
  return -a;
}

inline Expr s_sub(Expr a, Expr b) {
  if (is_const(b, 0.0)) return a;
  if (is_const(a, 0.0)) return s_neg(std::move(b));
  if (is_const(a) && is_const(b)) return Expr::constant(a.value() - b.value());
  return a - b;
}

inline Expr s_mul(Expr a, Expr b) {
  if (is_const(a, 0.0) || is_const(b, 0.0)) return Expr::constant(0.0);
  if (is_const(a, 1.0)) return b;
  if (is_const(b, 1.0)) return a;
  if (is_const(a, -1.0)) return s_neg(std::move(b));
  if (is_const(b, -1.0)) return s_neg(std::move(a));
  if (is_const(a) && is_const(b)) return Expr::constant(a.value() * b.value());
  return a * b;
}

inline Expr s_div(Expr a, Expr b) {
  if (is_const(a, 0.0)) return Expr::constant(0.0);
  if (is_const(b, 1.0)) return a;
  return a / b;
}

inline Expr s_pow(Expr a, Expr b) {
  if (is_const(b, 1.0)) return a;
  if (is_const(b, 0.0)) return Expr::constant(1.0);
  return Expr::binary(BinaryOp::pow, std::move(a), std::move(b));
}

inline Expr s_call(Function f, Expr a) { return Expr::call(f, {std::move(a)}); }

}  // namespace detail

// d e / d name. Parameters are treated as constants unless they are `name`.
inline Expr differentiate(const Expr& e, const std::string& name) {
  using namespace detail;
  switch (e.kind()) {
    case NodeKind::constant:
      return Expr::constant(0.0);
    case NodeKind::symbol:
      return Expr::constant(e.name() == name ? 1.0 : 0.0);
    case NodeKind::negate:
      return s_neg(differentiate(e.child(0), name));
    case NodeKind::binary: {
      const Expr& a = e.child(0);
      const Expr& b = e.child(1);
      Expr da = differentiate(a, name);
      Expr db = differentiate(b, name);
      switch (e.op()) {
        case BinaryOp::add: return s_add(da, db);
        case BinaryOp::sub: return s_sub(da, db);
        case BinaryOp::mul: return s_add(s_mul(da, b), s_mul(a, db));
        case BinaryOp::div:
          // (a' b - a b') / b^2
          return s_div(s_sub(s_mul(da, b), s_mul(a, db)), s_pow(b, Expr::constant(2.0)));
        case BinaryOp::pow:
          if (is_const(db, 0.0)) {
            // b a^(b-1) a'
            Expr reduced = is_const(b) ? Expr::constant(b.value() - 1.0) : s_sub(b, Expr::constant(1.0));
            return s_mul(s_mul(b, s_pow(a, reduced)), da);
          }
          // a^b (b' log a + b a' / a)
          return s_mul(e, s_add(s_mul(db, s_call(Function::log, a)), s_div(s_mul(b, da), a)));
      }
      break;
    }
    case NodeKind::call: {
      const Expr& a = e.child(0);
      if (e.func() == Function::pow) {
        return differentiate(Expr::binary(BinaryOp::pow, a, e.child(1)), name);
      }
      Expr da = differentiate(a, name);
      if (is_const(da, 0.0)) return Expr::constant(0.0);
      switch (e.func()) {
        case Function::sin: return s_mul(s_call(Function::cos, a), da);
        case Function::cos: return s_mul(s_neg(s_call(Function::sin, a)), da);
        case Function::tan: return s_div(da, s_pow(s_call(Function::cos, a), Expr::constant(2.0)));
        case Function::exp: return s_mul(e, da);
        case Function::log: return s_div(da, a);
        case Function::sqrt: return s_div(da, s_mul(Expr::constant(2.0), e));
        case Function::abs: return s_mul(s_div(a, e), da);
        case Function::pow: break;
      }
      break;
    }
  }
  throw ValidationError("cannot differentiate " + to_string(e));
}

}  // namespace mechkit
