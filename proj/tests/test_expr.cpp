#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "lordiag/expr.hpp"

using namespace lordiag;

TEST(Expr, EvaluatesArithmeticAndPrecedence) {
  EXPECT_DOUBLE_EQ(parse_expr("1 + 2*3").eval(0, 0, 0), 7.0);
  EXPECT_DOUBLE_EQ(parse_expr("(1 + 2)*3").eval(0, 0, 0), 9.0);
  EXPECT_DOUBLE_EQ(parse_expr("2*x^3").eval(2, 0, 0), 16.0);
  EXPECT_DOUBLE_EQ(parse_expr("-x^2").eval(3, 0, 0), -9.0);
  EXPECT_DOUBLE_EQ(parse_expr("x - y - z").eval(5, 2, 1), 2.0);
  EXPECT_DOUBLE_EQ(parse_expr("8 / 2 / 2").eval(0, 0, 0), 2.0);
}

TEST(Expr, FunctionsAndConstants) {
  EXPECT_NEAR(parse_expr("sin(pi*y)").eval(0, 0.5, 0), 1.0, 1e-15);
  EXPECT_NEAR(parse_expr("exp(2*x)").eval(0.5, 0, 0), std::exp(1.0), 1e-15);
  EXPECT_NEAR(parse_expr("cos(z) + sqrt(x)").eval(4, 0, 0), 3.0, 1e-15);
  EXPECT_NEAR(parse_expr("1e-3 * 2.5E2").eval(0, 0, 0), 0.25, 1e-15);
}

TEST(Expr, RejectsMalformedInput) {
  EXPECT_THROW(parse_expr("1 +"), ParseError);
  EXPECT_THROW(parse_expr("(x"), ParseError);
  EXPECT_THROW(parse_expr("x)"), ParseError);
  EXPECT_THROW(parse_expr("w + 1"), ParseError);
  EXPECT_THROW(parse_expr("foo(x)"), ParseError);
  try {
    parse_expr("x + $");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 4u);
  }
}

TEST(Expr, PrintReparsesToSameValues) {
  for (const char* text : {"x*(y + 1)", "-exp(2*(x + 0.1*sin(pi*y)))", "x^2 - y/(z + 2)", "0.1*x*(0.1*z)", "-(x - y)"}) {
    const Expr e = parse_expr(text);
    const Expr back = parse_expr(print_expr(e));
    for (double t : {0.1, 0.4, 0.9}) EXPECT_DOUBLE_EQ(e.eval(t, 1 - t, 0.5 * t), back.eval(t, 1 - t, 0.5 * t)) << text;
  }
}

TEST(Expr, SubstituteComposes) {
  const Expr f = parse_expr("x*y + z");
  const Expr g = substitute(f, {parse_expr("y"), parse_expr("2"), parse_expr("x^2")});
  EXPECT_DOUBLE_EQ(g.eval(3, 5, 0), 5 * 2 + 9.0);
}

TEST(Expr, SimplifyFoldsIdentities) {
  EXPECT_EQ(print_expr(simplify(parse_expr("0*x + 1*y"))), "y");
  EXPECT_EQ(print_expr(simplify(parse_expr("2*3 + x*1"))), "6 + x");
  const Expr e = parse_expr("(x + 0)*(1*y) - 0");
  EXPECT_DOUBLE_EQ(simplify(e).eval(2, 3, 0), 6.0);
}
