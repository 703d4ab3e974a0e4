#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mechkit/autodiff.hpp"
#include "fd.hpp"
#include "gen.hpp"

using namespace mechkit;

TEST(HyperDual, BilinearForm) {
  VarLayout l({"q", "v"});
  const double pt[] = {2.0, 3.0};
  HyperDual r = eval_hyperdual(parse("q*v"), l, pt, std::vector<std::string>{"q", "v"});
  EXPECT_EQ(r.value(), 6.0);
  EXPECT_EQ(r.grad(0), 3.0);
  EXPECT_EQ(r.grad(1), 2.0);
  EXPECT_EQ(r.hess(0, 0), 0.0);
  EXPECT_EQ(r.hess(0, 1), 1.0);
  EXPECT_EQ(r.hess(1, 0), 1.0);
  EXPECT_EQ(r.hess(1, 1), 0.0);
}

TEST(HyperDual, OscillatorVelocityDerivatives) {
  VarLayout l({"q", "v"});
  const double pt[] = {0.3, 2.0};
  HyperDual r = eval_hyperdual(parse("0.5*m*v^2 - 0.5*k*q^2"), l, pt, std::vector<std::string>{"v"}, {{"m", 1.0}, {"k", 1.0}});
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r.grad(0), 2.0);
  EXPECT_EQ(r.hess(0, 0), 1.0);
}

TEST(HyperDual, MatchesFiniteDifferencesOnSinExp) {
  VarLayout l({"q", "v"});
  const Vector pt{0.3, 0.7};
  Expr e = parse("sin(q)*exp(v)");
  HyperDual r = eval_hyperdual(e, l, pt);
  auto f = [&](std::span<const double> x) { return eval(e, l, x); };
  const Vector g = fdtest::gradient(f, pt, 1e-4);
  const Matrix h = fdtest::hessian(f, pt, 1e-3);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(r.grad(i), g[i], 1e-6 * std::fabs(g[i]));
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(r.hess(i, j), h(i, j), 1e-4 * std::max(1e-12, std::fabs(h(i, j))));
  }
}

TEST(HyperDual, ValueEqualsEval) {
  std::mt19937_64 rng(3);
  testgen::SmoothGen gen(rng, {"a", "b", "c"});
  VarLayout l({"a", "b", "c"});
  for (int i = 0; i < 500; ++i) {
    Expr e = gen.tree(5);
    const Vector pt = testgen::random_vector(rng, 3);
    EXPECT_EQ(eval_hyperdual(e, l, pt).value(), eval(e, l, pt)) << to_string(e);
  }
}

TEST(HyperDual, HessianSymmetricByConstruction) {
  std::mt19937_64 rng(5);
  testgen::SmoothGen gen(rng, {"a", "b", "c", "d"});
  VarLayout l({"a", "b", "c", "d"});
  for (int i = 0; i < 200; ++i) {
    HyperDual r = eval_hyperdual(gen.tree(5), l, testgen::random_vector(rng, 4));
    ASSERT_EQ(r.packed_hessian().size(), HyperDual::packed_size(4));
    const Matrix h = r.hessian();
    for (std::size_t a = 0; a < 4; ++a) {
      for (std::size_t b = 0; b < 4; ++b) ASSERT_EQ(h(a, b), h(b, a));
    }
    // the packed storage read back row by row
    std::size_t idx = 0;
    for (std::size_t a = 0; a < 4; ++a) {
      for (std::size_t b = a; b < 4; ++b) ASSERT_EQ(r.packed_hessian()[idx++], h(a, b));
    }
  }
}

TEST(HyperDual, ActiveSubsetOrder) {
  VarLayout l({"q", "v", "s"});
  const double pt[] = {1.0, 2.0, 3.0};
  HyperDual r = eval_hyperdual(parse("q*v^2*s^3"), l, pt, std::vector<std::string>{"s", "q"});
  EXPECT_EQ(r.grad(0), 1.0 * 4.0 * 27.0);  // d/ds
  EXPECT_EQ(r.grad(1), 4.0 * 27.0);        // d/dq
  EXPECT_EQ(r.hess(0, 1), 4.0 * 27.0);
  EXPECT_EQ(r.hess(0, 0), 1.0 * 4.0 * 18.0);
  EXPECT_THROW(eval_hyperdual(parse("q"), l, pt, std::vector<std::string>{"x"}), ValidationError);
  EXPECT_THROW(eval_hyperdual(parse("q"), l, pt, std::vector<std::string>{"q", "q"}), ValidationError);
}

TEST(HyperDual, MismatchedSizesAreAnError) {
  HyperDual a = HyperDual::variable(1.0, 0, 2);
  HyperDual b = HyperDual::variable(1.0, 0, 3);
  EXPECT_THROW(a + b, DimensionError);
  EXPECT_THROW(a * b, DimensionError);
}

TEST(HyperDual, DomainErrors) {
  VarLayout l({"q"});
  const double zero[] = {0.0};
  EXPECT_THROW(eval_hyperdual(parse("abs(q)"), l, zero), DomainError);
  EXPECT_THROW(eval_hyperdual(parse("sqrt(q)"), l, zero), DomainError);
  EXPECT_THROW(eval_hyperdual(parse("log(q)"), l, zero), DomainError);
  // constant with respect to the active set: fine
  EXPECT_EQ(eval_hyperdual(parse("abs(q)"), l, zero, std::vector<std::string>{}).value(), 0.0);
}

TEST(HyperDual, PowerRules) {
  VarLayout l({"x", "y"});
  const Vector pt{1.3, 0.4};
  auto check = [&](const char* text) {
    Expr e = parse(text);
    HyperDual r = eval_hyperdual(e, l, pt);
    auto f = [&](std::span<const double> x) { return eval(e, l, x); };
    const Vector g = fdtest::gradient(f, pt, 1e-4);
    const Matrix h = fdtest::hessian(f, pt, 1e-3);
    for (std::size_t i = 0; i < 2; ++i) {
      EXPECT_NEAR(r.grad(i), g[i], 1e-6 * std::max(1.0, std::fabs(g[i]))) << text;
      for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(r.hess(i, j), h(i, j), 1e-4 * std::max(1.0, std::fabs(h(i, j)))) << text;
    }
  };
  for (const char* t : {"x^y", "pow(x, 2.5)", "x^-3", "(x*y)^4", "x^y^2", "abs(x - 2*y)", "tan(x*y)", "sqrt(x)/log(x + y)"}) {
    check(t);
  }
}

// Property sweep over every supported function and random smooth trees.
TEST(HyperDual, FiniteDifferenceSweep) {
  std::mt19937_64 rng(2024);
  testgen::SmoothGen gen(rng, {"a", "b", "c"});
  VarLayout l({"a", "b", "c"});
  fdtest::Tally tally;
  for (int i = 0; i < 2000; ++i) {
    Expr e = gen.tree(4);
    const Vector pt = testgen::random_vector(rng, 3);
    tally.add(fdtest::compare(e, l, pt));
  }
  EXPECT_EQ(tally.grad_fail, 0) << tally.worst;
  EXPECT_EQ(tally.hess_fail, 0) << tally.worst;
}
