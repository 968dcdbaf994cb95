#include "bicsep/quadrature.hpp"
#include "profiles.hpp"

#include <random>

using namespace bicsep;
using namespace bicsep::testing;

TEST(RadialGrid, StandardGridIsLogSpacedAndIncreasing) {
  const auto& g = grid();
  EXPECT_EQ(g.size(), 2000);
  EXPECT_NEAR(g.r_min(), 1e-5, 1e-18);
  EXPECT_NEAR(g.r_max(), 40.0, 1e-12);
  for (Index i = 1; i < g.size(); ++i) ASSERT_GT(g[i], g[i - 1]);
  const double ratio = g[1] / g[0];
  EXPECT_NEAR(g[1000] / g[999], ratio, 1e-9);
}

TEST(RadialGrid, RejectsBadNodes) {
  Eigen::VectorXd bad(3);
  bad << 0.1, 0.1, 0.2;
  EXPECT_EQ(code_of([&] { RadialGrid{bad}; }), ErrorCode::InvalidArgument);
  bad << -1.0, 0.1, 0.2;
  EXPECT_EQ(code_of([&] { RadialGrid{bad}; }), ErrorCode::InvalidArgument);
}

TEST(RadialGrid, WithNodesSnapsAndMerges) {
  const auto& g = grid();
  const double existing = g[700];
  const auto merged = g.with_nodes(std::vector<double>{existing * (1 + 1e-14), 1.2345});
  EXPECT_EQ(merged.size(), g.size() + 1);
  EXPECT_GE(merged.find_node(1.2345), 0);
  EXPECT_EQ(merged.find_node(existing), 700);
}

TEST(Integrate, ExponentialMoments) {
  EXPECT_NEAR(integrate(exponential()), 1.0, 1e-10);
  const auto re = SampledFunction::sample(grid(), [](double r) { return r * std::exp(-r); }, TailModel::exponential(1));
  EXPECT_NEAR(integrate(re), 1.0, 1e-9);
}

TEST(Integrate, SineWeight) {
  // int e^{-r} sin(2r) dr = 2/5
  EXPECT_NEAR(integrate(exponential(), OscillatoryWeight::sine(2.0)), 0.4, 1e-9);
  EXPECT_NEAR(integrate(exponential(), OscillatoryWeight::cosine(2.0)), 0.2, 1e-9);
}

TEST(Integrate, AlgebraicTailIncluded) {
  // int 1/(1+r^3) = 2 pi/(3 sqrt 3); the r^{-3} model leaves a 2e-9 remainder beyond r = 40
  const auto f = SampledFunction::sample(grid(), [](double r) { return 1.0 / (1 + r * r * r); }, TailModel::algebraic(3));
  EXPECT_NEAR(integrate(f), 2 * pi / (3 * std::sqrt(3.0)), 1e-8);
}

TEST(Integrate, NonIntegrableTailIsReported) {
  const auto f = SampledFunction::sample(grid(), [](double r) { return std::pow(1 + r, -0.5); }, TailModel::algebraic(0.5));
  EXPECT_EQ(code_of([&] { integrate(f); }), ErrorCode::NonIntegrableTail);
}

TEST(Integrate, Linearity) {
  const auto f = exponential(0.7);
  const auto g = SampledFunction::sample(grid(), [](double r) { return std::exp(-r * r); }, TailModel::exponential(1.0));
  const auto h = combine(2.0, f, -3.0, g);
  EXPECT_NEAR(integrate(h), 2.0 * integrate(f) - 3.0 * integrate(g), 1e-10);
}

TEST(Integrate, TighterToleranceStaysWithinEstimate) {
  const auto f = SampledFunction::sample(grid(), [](double r) { return std::exp(-r) / (1 + r); },
                                         TailModel::exponential(1.0));
  QuadratureOptions loose{.abs_tol = 1e-8};
  QuadratureOptions tight{.abs_tol = 5e-9};
  const auto a = integrate_semi_infinite(f, OscillatoryWeight::sine(3.0), loose);
  const auto b = integrate_semi_infinite(f, OscillatoryWeight::sine(3.0), tight);
  EXPECT_LE(std::abs(a.value - b.value), a.error + b.error + 1e-12);
}

TEST(Gauss, ExactForPolynomials) {
  EXPECT_NEAR(gauss_integrate([](double x) { return std::pow(x, 15) - 3 * x * x; }, 0.0, 2.0, 8),
              std::pow(2.0, 16) / 16 - 8.0, 1e-9);
  EXPECT_EQ(code_of([] { gauss_legendre(0); }), ErrorCode::InvalidArgument);
}

// Running integrals of the interpolant carry its O(h^4) error, about 1e-10 here.
TEST(Cumulative, TailIntegralOfExponential) {
  const auto c = cumulative_to_infinity(exponential());
  for (Index i = 0; i < grid().size(); i += 97) EXPECT_NEAR(c[i], std::exp(-grid()[i]), 5e-10);
  const auto o = cumulative_from_origin(exponential());
  for (Index i = 0; i < grid().size(); i += 97) EXPECT_NEAR(o[i], 1 - std::exp(-grid()[i]), 5e-10);
}

TEST(Wynn, AcceleratesAlternatingSeries) {
  std::vector<double> partial;
  double s = 0.0;
  for (int n = 1; n <= 12; ++n) {
    s += (n % 2 ? 1.0 : -1.0) / n;
    partial.push_back(s);
  }
  const auto ex = wynn_epsilon(partial);
  EXPECT_NEAR(ex.value, std::log(2.0), 1e-8);
}

TEST(OscillatoryTail, SinOverR) {
  // int_pi^inf sin r / r dr = pi/2 - Si(pi)
  const auto ex = oscillatory_tail([](double r) { return std::sin(r) / r; }, pi, 1.0);
  EXPECT_NEAR(ex.value, pi / 2 - 1.851937051982466, 1e-9);
}

namespace {

SampledFunction momentum_profile(auto&& h, TailModel tail) {
  static const auto pg = RadialGrid::log_spaced(1e-4, 400.0, 4000);
  return SampledFunction::sample(pg, h, tail);
}

}  // namespace

TEST(PrincipalValue, DoubleZeroNumeratorIsOrdinaryIntegral) {
  // h = (p^2-k^2)^2/(1+p^2)^3, so the P-integral is (pi/16)(1 - 3k^2).
  for (double k : {0.5, 1.0, 2.0}) {
    const auto h = momentum_profile([k](double p) { return std::pow(p * p - k * k, 2) / std::pow(1 + p * p, 3); },
                                    TailModel::algebraic(2));
    EXPECT_NEAR(principal_value(h, k), pi / 16 * (1 - 3 * k * k), 1e-7) << "k = " << k;
  }
}

TEST(PrincipalValue, ClosedFormRational) {
  // P int p^2/((1+p^2)^2 (p^2-k^2)) dp = pi (1-k^2) / (4 (1+k^2)^2)
  const auto h = momentum_profile([](double p) { return p * p / std::pow(1 + p * p, 2); }, TailModel::algebraic(2));
  for (double k : {0.5, 1.0, 2.0, 5.0})
    EXPECT_NEAR(principal_value(h, k), pi * (1 - k * k) / (4 * std::pow(1 + k * k, 2)), 1e-7) << "k = " << k;
}

TEST(PrincipalValue, IndependentOfSubtractionWindow) {
  const auto h = momentum_profile([](double p) { return p * p / std::pow(1 + p * p, 2); }, TailModel::algebraic(2));
  for (double k : {0.5, 1.0, 3.0}) {
    const double a = principal_value(h, k, {.delta = 0.1});
    const double b = principal_value(h, k, {.delta = 0.05});
    EXPECT_NEAR(a, b, 1e-8) << "k = " << k;
  }
}

TEST(PrincipalValue, EndpointPoleRejected) {
  const auto h = momentum_profile([](double p) { return 1.0 / std::pow(1 + p * p, 2); }, TailModel::algebraic(4));
  EXPECT_EQ(code_of([&] { principal_value(h, 0.0); }), ErrorCode::PoleAtEndpoint);
}

TEST(PrincipalValue, SineLineIdentity) {
  // P int sin(xy)/(y - y0) dy = pi cos(x y0) for x > 0
  for (double y0 : {0.0, 0.7, 2.0})
    for (double x : {0.5, 1.0, 3.0})
      EXPECT_NEAR(principal_value_line([x](double y) { return std::sin(x * y); }, y0, x), pi * std::cos(x * y0), 1e-6)
          << "x = " << x << " y0 = " << y0;
}

TEST(PrincipalValue, SineLineIdentityFlipsForNegativeFrequency) {
  // For x < 0 the value is -pi cos(x y0).
  const double x = -1.0, y0 = 2.0;
  EXPECT_NEAR(principal_value_line([x](double y) { return std::sin(x * y); }, y0, std::abs(x)),
              -pi * std::cos(x * y0), 1e-6);
}

TEST(Shape, FlagsOnRandomDecreasingProfiles) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> rate(0.3, 3.0), weight(0.1, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const double a = rate(rng), b = rate(rng), wa = weight(rng), wb = weight(rng);
    const auto f = SampledFunction::sample(
        grid(), [=](double r) { return wa * std::exp(-a * r) + wb * std::exp(-b * r); },
        TailModel::exponential(std::min(a, b)));
    const auto fl = shape_flags(f);
    EXPECT_TRUE(fl.positive);
    EXPECT_TRUE(fl.nonincreasing);
    EXPECT_TRUE(fl.convex);
  }
  EXPECT_FALSE(shape_flags(signed_exponential()).positive);
}
