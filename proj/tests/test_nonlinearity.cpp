// Right-hand-side catalog: parsing, evaluation of f, the exact antiderivative
// F, the explicit-z partials of F, and the windowed wrapper.

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <grushin/geometry.hpp>
#include <grushin/nonlinearity.hpp>

namespace {

using namespace grushin;

Point pt3(double a, double b, double c) {
  Point z = make_point();
  z[0] = a;
  z[1] = b;
  z[2] = c;
  return z;
}

TEST(NonlinearityParse, ConstantOne) {
  const auto nl = Nonlinearity::parse("1", 2, 1);
  const Point z = pt3(0.3, -0.7, 0.2);
  EXPECT_DOUBLE_EQ(nl.f(z, 5.0), 1.0);
  EXPECT_DOUBLE_EQ(nl.F(z, 5.0), 5.0);   // F = u
  EXPECT_DOUBLE_EQ(nl.F(z, -2.0), -2.0);
  const Point g = nl.dF_dz(z, 5.0);
  for (int k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(g[k], 0.0);
  EXPECT_FALSE(nl.depends_on_u());
}

TEST(NonlinearityParse, OddPower) {
  const auto nl = Nonlinearity::parse("abspow(u,3)", 2, 1);
  const Point z = pt3(0, 0, 0);
  EXPECT_DOUBLE_EQ(nl.f(z, 2.0), 8.0);    // |u|^2 u
  EXPECT_DOUBLE_EQ(nl.f(z, -2.0), -8.0);  // odd in u
  EXPECT_DOUBLE_EQ(nl.f(z, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(nl.F(z, -2.0), 4.0);   // |u|^4 / 4 is even
  EXPECT_DOUBLE_EQ(nl.F(z, 2.0), 4.0);
  EXPECT_TRUE(nl.depends_on_u());
}

TEST(NonlinearityParse, MixedCoefficientTerm) {
  const auto nl = Nonlinearity::parse("x1*u + 2", 2, 1);
  const Point z = pt3(0.5, -0.3, 0.8);
  const double u = 1.7;
  EXPECT_NEAR(nl.f(z, u), 0.5 * u + 2.0, 1e-15);
  EXPECT_NEAR(nl.F(z, u), 0.5 * 0.5 * u * u + 2.0 * u, 1e-15);
  // Explicit-z partial: dF/dx1 = u^2 / 2, others zero.
  const Point g = nl.dF_dz(z, u);
  EXPECT_NEAR(g[0], 0.5 * u * u, 1e-15);
  EXPECT_DOUBLE_EQ(g[1], 0.0);
  EXPECT_DOUBLE_EQ(g[2], 0.0);
  EXPECT_EQ(nl.terms().size(), 2u);
  EXPECT_EQ(nl.N(), 2);
  EXPECT_EQ(nl.l(), 1);
}

TEST(NonlinearityEval, AntiderivativeVanishesAtZero) {
  const std::vector<std::string> catalog = {"1", "abspow(u,2.5)", "x1*u + 2", "x2*y1",
                                            "3*x1*x1*u + abspow(u,3) + 1"};
  const Point z = pt3(0.4, -0.6, 0.9);
  for (const auto& text : catalog) {
    const auto nl = Nonlinearity::parse(text, 2, 1);
    EXPECT_DOUBLE_EQ(nl.F(z, 0.0), 0.0) << text;
  }
}

TEST(NonlinearityEval, DerivativeOfFInUReproducesF) {
  struct Case {
    std::string text;
    int N, l;
  };
  const std::vector<Case> catalog = {{"1", 2, 1},
                                     {"abspow(u,2.5)", 2, 1},
                                     {"x1*u + 2", 2, 1},
                                     {"y1*y2*u", 1, 2},
                                     {"3*x1*x1*u + abspow(u,3) + 1", 2, 1}};
  std::mt19937_64 rng(7331);
  std::uniform_real_distribution<double> zd(-0.9, 0.9), ud(-2.0, 2.0);
  const double h = 1e-5;
  for (const auto& c : catalog) {
    const auto nl = Nonlinearity::parse(c.text, c.N, c.l);
    for (int s = 0; s < 200; ++s) {
      Point z = make_point();
      for (int k = 0; k < c.N + c.l; ++k) z[k] = zd(rng);
      double u = ud(rng);
      if (std::abs(u) < 0.05) u = std::copysign(0.05, u == 0.0 ? 1.0 : u);
      const double fd = (nl.F(z, u + h) - nl.F(z, u - h)) / (2.0 * h);
      EXPECT_NEAR(fd, nl.f(z, u), 1e-6 * (1.0 + std::abs(nl.f(z, u)))) << c.text;
    }
  }
}

TEST(NonlinearityEval, ExplicitZGradientMatchesFiniteDifferences) {
  struct Case {
    std::string text;
    int N, l;
  };
  const std::vector<Case> catalog = {{"x1*u + 2", 2, 1},
                                     {"y1*y2*u", 1, 2},
                                     {"3*x1*x1*u + abspow(u,3) + 1", 2, 1},
                                     {"x1*x2*y1 + u", 2, 1}};
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> zd(-0.9, 0.9), ud(-2.0, 2.0);
  const double h = 1e-6;
  for (const auto& c : catalog) {
    const auto nl = Nonlinearity::parse(c.text, c.N, c.l);
    for (int s = 0; s < 100; ++s) {
      Point z = make_point();
      for (int k = 0; k < c.N + c.l; ++k) z[k] = zd(rng);
      const double u = ud(rng);
      const Point g = nl.dF_dz(z, u);
      for (int k = 0; k < c.N + c.l; ++k) {
        Point zp = z, zm = z;
        zp[k] += h;
        zm[k] -= h;
        const double fd = (nl.F(zp, u) - nl.F(zm, u)) / (2.0 * h);
        EXPECT_NEAR(g[k], fd, 1e-6 * (1.0 + std::abs(g[k]))) << c.text << " axis " << k;
      }
    }
  }
}

TEST(NonlinearityEval, ChainRuleAlongAPath) {
  // d/ds F(z, u(s)) = f(z, u(s)) u'(s).
  const auto nl = Nonlinearity::parse("x1*u + abspow(u,2) + 1", 2, 1);
  const Point z = pt3(0.35, -0.2, 0.6);
  const auto u_of = [](double s) { return std::sin(s) * (1.0 + 0.5 * s * s); };
  const auto du_of = [](double s) { return std::cos(s) * (1.0 + 0.5 * s * s) + std::sin(s) * s; };
  const double h = 1e-6;
  for (double s : {-1.2, -0.4, 0.3, 0.9, 1.7}) {
    const double fd = (nl.F(z, u_of(s + h)) - nl.F(z, u_of(s - h))) / (2.0 * h);
    EXPECT_NEAR(fd, nl.f(z, u_of(s)) * du_of(s), 1e-6);
  }
}

TEST(NonlinearityPrint, RoundTripPreservesEvaluation) {
  struct Case {
    std::string text;
    int N, l;
  };
  const std::vector<Case> catalog = {{"1", 2, 1},
                                     {"-u + 2*x1", 2, 1},
                                     {"abspow(u,2.5)", 2, 1},
                                     {"(x1 + y1)*(x1 - y1)*u", 1, 2},
                                     {"3*x1*x1*u + abspow(u,3) + 1", 2, 1}};
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> zd(-0.9, 0.9), ud(-2.0, 2.0);
  for (const auto& c : catalog) {
    const auto nl1 = Nonlinearity::parse(c.text, c.N, c.l);
    const auto nl2 = Nonlinearity::parse(nl1.print(), c.N, c.l);
    EXPECT_EQ(nl1.print(), nl2.print()) << c.text;
    for (int s = 0; s < 50; ++s) {
      Point z = make_point();
      for (int k = 0; k < c.N + c.l; ++k) z[k] = zd(rng);
      const double u = ud(rng);
      EXPECT_NEAR(nl1.f(z, u), nl2.f(z, u), 1e-14 * (1.0 + std::abs(nl1.f(z, u)))) << c.text;
      EXPECT_NEAR(nl1.F(z, u), nl2.F(z, u), 1e-14 * (1.0 + std::abs(nl1.F(z, u)))) << c.text;
    }
  }
}

TEST(NonlinearityParse, ReportsErrorsWithPosition) {
  // Dangling operator.
  try {
    Nonlinearity::parse("x1 *", 2, 1);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("expected a factor"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("at position"), std::string::npos);
    EXPECT_GT(e.position, 0u);
  }
  // Unknown coordinate beyond the declared block sizes.
  try {
    Nonlinearity::parse("x3*u", 2, 1);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown coordinate name 'x3'"), std::string::npos);
  }
  try {
    Nonlinearity::parse("y2 + 1", 2, 1);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown coordinate name 'y2'"), std::string::npos);
  }
  // Invalid abspow exponents.
  EXPECT_THROW(Nonlinearity::parse("abspow(u,0)", 2, 1), ParseError);
  EXPECT_THROW(Nonlinearity::parse("abspow(u,-1.5)", 2, 1), ParseError);
  // Trailing input after a complete expression.
  try {
    Nonlinearity::parse("2 2", 2, 1);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("unexpected trailing input"), std::string::npos);
  }
  // Products of two u-dependent factors are outside the catalog.
  EXPECT_THROW(Nonlinearity::parse("u*u", 2, 1), ParseError);
  EXPECT_THROW(Nonlinearity::parse("u*abspow(u,2)", 2, 1), ParseError);
  // Polynomial degree cap.
  EXPECT_THROW(Nonlinearity::parse("x1*x1*x1*x1*x1", 2, 1), ParseError);
  EXPECT_NO_THROW(Nonlinearity::parse("x1*x1*x1*x1", 2, 1));
  // Unbalanced parenthesis.
  EXPECT_THROW(Nonlinearity::parse("(x1 + u", 2, 1), ParseError);
}

TEST(NonlinearityParse, EffectiveUDependence) {
  EXPECT_FALSE(Nonlinearity::parse("1", 2, 1).depends_on_u());
  EXPECT_TRUE(Nonlinearity::parse("x1*u", 2, 1).depends_on_u());
  EXPECT_TRUE(Nonlinearity::parse("abspow(u,1.5)", 2, 1).depends_on_u());
  // Terms that cancel to zero coefficient do not count as u-dependence.
  EXPECT_FALSE(Nonlinearity::parse("u*0 + 1", 2, 1).depends_on_u());
  EXPECT_FALSE(Nonlinearity::parse("u - u + x1", 2, 1).depends_on_u());
}

TEST(WindowTest, BumpValueAndSupport) {
  Window w;
  w.dim = 3;
  w.center = pt3(0.1, -0.2, 0.3);
  w.halfwidth = pt3(0.5, 0.4, 0.6);
  EXPECT_DOUBLE_EQ(w.value(w.center), 1.0);
  // On and beyond the support boundary the window vanishes.
  EXPECT_DOUBLE_EQ(w.value(pt3(0.6, -0.2, 0.3)), 0.0);
  EXPECT_DOUBLE_EQ(w.value(pt3(0.9, -0.2, 0.3)), 0.0);
  const Point gz = w.grad(pt3(0.9, -0.2, 0.3));
  for (int k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(gz[k], 0.0);
  // Interior values stay in (0, 1] and match the tensor formula.
  const Point z = pt3(0.3, 0.0, 0.0);
  double expect = 1.0;
  expect *= std::pow(1.0 - std::pow((z[0] - 0.1) / 0.5, 2.0), 2.0);
  expect *= std::pow(1.0 - std::pow((z[1] + 0.2) / 0.4, 2.0), 2.0);
  expect *= std::pow(1.0 - std::pow((z[2] - 0.3) / 0.6, 2.0), 2.0);
  EXPECT_NEAR(w.value(z), expect, 1e-15);
  // Gradient agrees with central differences away from the interface.
  const double h = 1e-6;
  const Point g = w.grad(z);
  for (int k = 0; k < 3; ++k) {
    Point zp = z, zm = z;
    zp[k] += h;
    zm[k] -= h;
    EXPECT_NEAR(g[k], (w.value(zp) - w.value(zm)) / (2.0 * h), 1e-7);
  }
}

TEST(WindowedNonlinearityTest, ProductStructure) {
  Window w;
  w.dim = 3;
  w.center = pt3(0.0, 0.0, 0.0);
  w.halfwidth = pt3(0.7, 0.7, 0.7);
  const auto base = Nonlinearity::parse("x1*u + 2", 2, 1);
  const WindowedNonlinearity wn(base, w);

  const Point inside = pt3(0.2, -0.3, 0.1);
  const Point outside = pt3(0.9, 0.0, 0.0);
  const double u = 1.3;
  EXPECT_NEAR(wn.f(inside, u), w.value(inside) * base.f(inside, u), 1e-15);
  EXPECT_NEAR(wn.F(inside, u), w.value(inside) * base.F(inside, u), 1e-15);
  EXPECT_DOUBLE_EQ(wn.f(outside, u), 0.0);
  EXPECT_DOUBLE_EQ(wn.F(outside, u), 0.0);
  EXPECT_TRUE(wn.depends_on_u());
  EXPECT_FALSE(WindowedNonlinearity(Nonlinearity::parse("1", 2, 1), w).depends_on_u());

  // Product rule for the explicit-z gradient, cross-checked by differences.
  const double h = 1e-6;
  const Point g = wn.dF_dz(inside, u);
  for (int k = 0; k < 3; ++k) {
    Point zp = inside, zm = inside;
    zp[k] += h;
    zm[k] -= h;
    EXPECT_NEAR(g[k], (wn.F(zp, u) - wn.F(zm, u)) / (2.0 * h), 1e-7);
  }
}

}  // namespace
