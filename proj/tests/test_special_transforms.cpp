#include "bicsep/bessel.hpp"
#include "bicsep/transforms.hpp"
#include "profiles.hpp"

#include <random>

using namespace bicsep;
using namespace bicsep::testing;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST(SineTransform, ExponentialClosedForm) {
  const Eigen::VectorXd p = linear_momenta(0.0, 20.0, 401);
  for (double a : {0.5, 1.0, 2.0}) {
    const auto t = sine_transform(exponential(a), p);
    for (Index i = 0; i < p.size(); ++i) ASSERT_LT(rel(t.values[i], 1 / (a * a + p[i] * p[i])), 1e-8) << a << " " << p[i];
  }
  Eigen::VectorXd two(2);
  two << 0.0, 2.0;
  const auto t = sine_transform(exponential(), two);
  EXPECT_NEAR(t.values[0], 1.0, 1e-9);
  EXPECT_NEAR(t.values[1], 0.2, 1e-9);
}

TEST(SineTransform, TentClosedForm) {
  const Eigen::VectorXd p = linear_momenta(0.0, 20.0, 201);
  const auto t = sine_transform(tent(), p);
  EXPECT_NEAR(t.values[0], 1.0 / 6.0, 1e-10);
  for (Index i = 1; i < p.size(); ++i) {
    const double k = p[i];
    EXPECT_NEAR(t.values[i], (k - std::sin(k)) / (k * k * k), 1e-10) << k;
  }
}

TEST(SineTransform, RiemannLebesgue) {
  Eigen::VectorXd p(3);
  p << 100.0, 1000.0, 4000.0;
  const auto t = sine_transform(exponential(), p);
  for (Index i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i] * t.values[i], p[i] / (1 + p[i] * p[i]), 1e-9);
  EXPECT_LT(p[2] * t.values[2], 1e-3);
}

TEST(SineTransform, Parseval) {
  // int U^2 = (2/pi) int (p U~)^2 dp, U = e^{-r} and e^{-r^2}
  const auto pg = RadialGrid::log_spaced(1e-4, 2000.0, 3000);
  for (int which = 0; which < 2; ++which) {
    const auto u = which == 0 ? exponential()
                              : SampledFunction::sample(grid(), [](double r) { return std::exp(-r * r); },
                                                        TailModel::exponential(1.0));
    const auto t = sine_transform(u, pg.nodes());
    Eigen::VectorXd h = (t.values.array() * pg.nodes().array()).square();
    const SampledFunction hp(pg, h, fit_tail(pg.nodes(), h));
    const double lhs = integrate(product(u, u));
    EXPECT_NEAR(lhs, 2 / pi * integrate(hp), 1e-6 * lhs) << which;
  }
}

TEST(CosineTransform, ExponentialIsPositive) {
  const Eigen::VectorXd k = linear_momenta(0.0, 20.0, 201);
  const auto c = cosine_transform(exponential(), k);
  EXPECT_TRUE(c.convex_decreasing);
  EXPECT_GT(c.min_value, 0.0);
  for (Index i = 0; i < k.size(); ++i) EXPECT_NEAR(c.table.values[i], 1 / (1 + k[i] * k[i]), 1e-9);
}

TEST(CosineTransform, IndicatorChangesSign) {
  const double edge = 1.0 - 1e-9;
  const auto g = grid().with_nodes(std::vector<double>{edge, 1.0});
  const auto f = SampledFunction::sample(g, [](double r) { return r < 1.0 ? 1.0 : 0.0; }, TailModel::compact(1.0),
                                         {.breakpoints = {edge, 1.0}});
  const Eigen::VectorXd k = linear_momenta(0.5, 10.0, 96);
  const auto c = cosine_transform(f, k);
  EXPECT_FALSE(c.convex_decreasing);
  EXPECT_LT(c.min_value, 0.0);
  for (Index i = 0; i < k.size(); ++i) EXPECT_NEAR(c.table.values[i], std::sin(k[i]) / k[i], 1e-8);
}

TEST(CosineTransform, TentIsNonnegative) {
  const Eigen::VectorXd k = linear_momenta(0.1, 20.0, 200);
  const auto c = cosine_transform(tent(), k);
  EXPECT_TRUE(c.convex_decreasing);
  for (Index i = 0; i < k.size(); ++i) {
    EXPECT_NEAR(c.table.values[i], (1 - std::cos(k[i])) / (k[i] * k[i]), 1e-10);
    EXPECT_GE(c.table.values[i], -1e-12);
  }
}

TEST(TailFunction, Examples) {
  const auto w = tail_function(exponential());
  for (Index i = 0; i < w.size(); i += 50) EXPECT_NEAR(w.values()[i], std::exp(-w.grid()[i]), 5e-10);
  const auto wt = tail_function(tent());
  for (Index i = 0; i < wt.size(); ++i) {
    const double r = wt.grid()[i];
    EXPECT_NEAR(wt.values()[i], r < 1 ? 0.5 * (1 - r) * (1 - r) : 0.0, 1e-12) << r;
  }
  // r W -> 0 at both ends
  EXPECT_LT(w.grid().r_min() * w.values()[0], 1e-4);
  EXPECT_LT(w.grid().r_max() * w.values()[w.size() - 1], 1e-15);
}

TEST(SignedSplit, PositiveProfileHasNoMinusPart) {
  const auto s = signed_split(exponential());
  EXPECT_EQ(s.minus.values().cwiseAbs().maxCoeff(), 0.0);
}

TEST(SignedSplit, SignChangeAtOneHalf) {
  const auto u = signed_exponential();
  const auto s = signed_split(u);
  const auto& g = s.plus.grid();
  Index root = -1;
  for (Index i = 0; i + 1 < g.size(); ++i)
    if (s.plus.values()[i] > 0 && s.plus.values()[i + 1] == 0) root = i + 1;
  ASSERT_GE(root, 0);
  EXPECT_NEAR(g[root], 0.5, 1e-10);  // root of the interpolant
  for (Index i = 0; i < g.size(); ++i) {
    const double r = g[i];
    ASSERT_GE(s.plus.values()[i], 0.0);
    ASSERT_GE(s.minus.values()[i], 0.0);
    ASSERT_EQ(s.plus.values()[i] * s.minus.values()[i], 0.0);
    const double expected = i == root ? 0.0 : std::exp(-r) * (1 - 2 * r);
    ASSERT_NEAR(s.plus.values()[i] - s.minus.values()[i], expected, 1e-15) << r;
    if (r > 0.5 + 1e-12) {
      ASSERT_EQ(s.plus.values()[i], 0.0);
    }
  }
}

TEST(SignedSplit, NegationSwapsParts) {
  const auto u = signed_exponential();
  const auto a = signed_split(u);
  const auto b = signed_split(u.scaled(-1.0));
  EXPECT_EQ((a.plus.values() - b.minus.values()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((a.minus.values() - b.plus.values()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Omega, ZeroProfileGivesZeroKernel) {
  const auto z = SampledFunction::sample(grid(), [](double) { return 0.0; }, TailModel::compact(grid().r_max()));
  const auto om = omega_convolution(signed_split(z));
  EXPECT_EQ(om.values().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Omega, CosineTransformMatchesPrincipalValue) {
  // G(k) = pi (1 - k^2) / (4 (1 + k^2)^2) for U = e^{-r}
  const auto om = omega_convolution(signed_split(exponential()));
  for (double k : {0.5, 1.0, 2.0})
    EXPECT_NEAR(integrate(om, OscillatoryWeight::cosine(k)), pi * (1 - k * k) / (4 * std::pow(1 + k * k, 2)), 1e-6)
        << k;
  Eigen::VectorXd a = om.values().cwiseAbs();
  EXPECT_TRUE(std::isfinite(integrate(SampledFunction(om.grid(), a, om.tail()))));
}

TEST(Hankel, DecayingPairs) {
  const Eigen::VectorXd k = linear_momenta(0.1, 10.0, 100);
  const auto g = RadialGrid::log_spaced(1e-5, 40.0, 2000);
  const auto g_long = RadialGrid::log_spaced(1e-5, 400.0, 3000);
  for (double nu : {0.5, 1.5}) {
    const auto f1 = SampledFunction::sample(g, [](double r) { return std::exp(-r) / std::sqrt(r); },
                                            TailModel::exponential(1));
    const auto f2 = SampledFunction::sample_fitted(g_long, [](double r) { return 1 / std::sqrt(r * (r * r + 1)); });
    const auto f3 = SampledFunction::sample_fitted(g, [](double r) { return std::exp(-r * r) / std::sqrt(r); });
    const auto h1 = hankel_transform(f1, nu, k);
    const auto h2 = hankel_transform(f2, nu, k);
    const auto h3 = hankel_transform(f3, nu, k);
    for (Index i = 0; i < k.size(); ++i) {
      const double q = k[i], s = std::sqrt(1 + q * q);
      EXPECT_LT(rel(h1.values[i], std::pow(q, 0.5 - nu) / s * std::pow(s - 1, nu)), 1e-6);
      EXPECT_LT(rel(h2.values[i], std::sqrt(q) * bessel_i(nu / 2, q / 2) * bessel_k(nu / 2, q / 2)), 1e-6);
      EXPECT_LT(rel(h3.values[i], std::sqrt(pi) / 2 * std::sqrt(q) * std::exp(-q * q / 8) * bessel_i(nu / 2, q * q / 8)),
                1e-6);
    }
  }
}

TEST(Hankel, OrderBelowOneHalfUnsupported) {
  Eigen::VectorXd k(1);
  k << 1.0;
  EXPECT_EQ(code_of([&] { hankel_transform(exponential(), 0.25, k); }), ErrorCode::UnsupportedOrder);
}

TEST(Bessel, ClosedHalfIntegerForms) {
  EXPECT_NEAR(bessel_j(0.5, pi), 0.0, 1e-15);
  EXPECT_NEAR(bessel_j(0.5, 2.0), std::sqrt(2 / (pi * 2)) * std::sin(2.0), 1e-15);
  EXPECT_NEAR(bessel_k(0.5, 1.0), std::sqrt(pi / 2) * std::exp(-1.0), 1e-14);
  EXPECT_EQ(code_of([] { bessel_k(1.0, 0.0); }), ErrorCode::DomainError);
  EXPECT_EQ(code_of([] { bessel_j(-1.0, 1.0); }), ErrorCode::DomainError);
}

TEST(Bessel, MatchesStandardLibrary) {
  for (double nu : {0.0, 0.25, 0.5, 1.0, 1.5, 2.75, 5.0})
    for (double x = 0.01; x < 80; x *= 1.1) {
      const double j = std::cyl_bessel_j(nu, x);
      EXPECT_NEAR(bessel_j(nu, x), j, 1e-10 * std::max(1e-3, std::abs(j))) << nu << " " << x;
      EXPECT_LT(rel(bessel_i(nu, x), std::cyl_bessel_i(nu, x)), 1e-10) << nu << " " << x;
      EXPECT_LT(rel(bessel_k(nu, x), std::cyl_bessel_k(nu, x)), 1e-10) << nu << " " << x;
    }
}

TEST(Bessel, IAndKPositiveOnLogGrid) {
  for (double nu : {0.0, 0.5, 1.0, 3.5})
    for (double x = 1e-6; x < 500; x *= 1.3) {
      ASSERT_GT(bessel_i(nu, x), 0.0) << nu << " " << x;
      ASSERT_GT(bessel_k(nu, x), 0.0) << nu << " " << x;
    }
}

// Decreasing positive profiles have strictly positive sine transforms.
TEST(Property, DecreasingProfilesHavePositiveSineTransform) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> rate(0.2, 4.0), weight(0.05, 1.0), radius(0.3, 5.0);
  const Eigen::VectorXd k = linear_momenta(0.05, 20.0, 400);
  for (int trial = 0; trial < 10; ++trial) {
    const double a = rate(rng), wa = weight(rng), R = radius(rng), wt = weight(rng);
    const auto g = grid().with_nodes(std::vector<double>{R});
    const auto u = SampledFunction::sample(
        g, [=](double r) { return wa * std::exp(-a * r) + wt * std::max(0.0, 1 - r / R); }, TailModel::exponential(a),
        {.breakpoints = {R}});
    const auto t = sine_transform(u, k);
    EXPECT_GT(t.values.minCoeff(), 0.0) << "trial " << trial;
  }
}
