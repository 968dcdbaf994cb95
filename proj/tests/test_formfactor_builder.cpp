#include "bicsep/formfactor.hpp"
#include "bicsep/quadrature.hpp"
#include "profiles.hpp"

#include <random>

using namespace bicsep;
using namespace bicsep::testing;

namespace {

const LocalPotential& free_v() {
  static const LocalPotential v = LocalPotential::zero(grid());
  return v;
}
const ZeroEnergyPair& free_pair() {
  static const ZeroEnergyPair p = zero_energy_pair(free_v());
  return p;
}
const LocalPotential& manufactured_v() {
  static const LocalPotential v = manufactured(grid());
  return v;
}
const ZeroEnergyPair& manufactured_pair() {
  static const ZeroEnergyPair p = zero_energy_pair(manufactured_v());
  return p;
}

SourceFunction smooth_source(auto&& g, TailModel tail) {
  SourceFunction s;
  s.smooth = SampledFunction::sample(grid(), g, tail);
  return s;
}

SourceFunction exp_source() { return smooth_source([](double t) { return std::exp(-t); }, TailModel::exponential(1)); }

SourceFunction delta_source(double lambda, double r0) {
  SourceFunction s;
  s.deltas.push_back({lambda, r0});
  return s;
}

double max_abs_diff(const SampledFunction& u, auto&& exact) {
  double e = 0.0;
  for (Index i = 0; i < u.size(); ++i) e = std::max(e, std::abs(u.values()[i] - exact(u.grid()[i])));
  return e;
}

}  // namespace

TEST(Build, DeltaSourceGivesTent) {
  const auto u = build_from_source(free_pair(), delta_source(1.0, 1.0));
  EXPECT_LT(max_abs_diff(u.profile(), [](double r) { return std::max(0.0, 1 - r); }), 1e-10);
  EXPECT_EQ(u.provenance(), Provenance::built);
  EXPECT_TRUE(u.flags().positive);
  EXPECT_TRUE(u.flags().decreasing);
  EXPECT_TRUE(u.flags().convex);
  EXPECT_TRUE(u.flags().vanishes_at_infinity);
  // residual vanishes off the kink
  EXPECT_LT(ode_residual(u, free_v(), delta_source(1.0, 1.0)).max_residual, 1e-9);
}

TEST(Build, ExponentialSourceReproducesItself) {
  const auto u = build_from_source(free_pair(), exp_source());
  EXPECT_LT(max_abs_diff(u.profile(), [](double r) { return std::exp(-r); }), 1e-8);
  EXPECT_NEAR(u.profile()(0.0), 1.0, 1e-8);
  EXPECT_TRUE(u.flags().convex);
  EXPECT_TRUE(u.flags().decreasing);
  EXPECT_TRUE(ode_residual(u, free_v(), exp_source()).passed);
}

TEST(Build, ZeroSourceGivesZero) {
  const auto zero = smooth_source([](double) { return 0.0; }, TailModel::compact(grid().r_max()));
  const auto u = build_from_source(free_pair(), zero);
  EXPECT_EQ(u.profile().values().cwiseAbs().maxCoeff(), 0.0);
  const auto um = build_from_source(manufactured_pair(), zero);
  EXPECT_EQ(um.profile().values().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Build, ManufacturedResidualAndFlags) {
  const auto u = build_from_source(manufactured_pair(), exp_source());
  const auto rep = verify_ode_identity(u, manufactured_v(), exp_source());
  EXPECT_LT(rep.max_residual, 1e-6);
  EXPECT_GT(rep.checked, 500);
  const auto& f = u.flags();
  EXPECT_TRUE(f.positive && f.decreasing && f.convex && f.vanishes_at_infinity);
}

TEST(Build, ResidualDetectsWrongPotential) {
  const auto u = build_from_source(free_pair(), exp_source());
  EXPECT_EQ(code_of([&] { verify_ode_identity(u, manufactured_v(), exp_source()); }), ErrorCode::ResidualTooLarge);
}

TEST(Build, BracketAndNestedFormsAgree) {
  SourceFunction mix = exp_source();
  mix.deltas.push_back({0.5, 2.0});
  for (const auto* pair : {&free_pair(), &manufactured_pair()}) {
    const auto u = build_from_source(*pair, mix);
    const auto nested = build_nested(*pair, mix, u.profile().grid());
    EXPECT_LT((nested - u.profile().values()).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Build, OriginLimit) {
  const auto u = build_from_source(manufactured_pair(), exp_source());
  const double limit = origin_limit(manufactured_pair(), exp_source());
  // U(r) - U(0) = O(r ln r) since V ~ 1/r
  const double r0 = grid()[0];
  EXPECT_NEAR(u.profile()(0.0), limit, 2 * limit * r0 * std::abs(std::log(r0)));
  EXPECT_NEAR(build_from_source(free_pair(), exp_source()).profile()(0.0), 1.0, 1e-8);
  // int (2t - 1 + e^{-t}) e^{-t} dt = 2 - 1 + 1/2
  EXPECT_NEAR(limit, 1.5, 1e-6);
  SourceFunction mix = exp_source();
  mix.deltas.push_back({0.5, 2.0});
  EXPECT_NEAR(origin_limit(manufactured_pair(), mix), 1.5 + 0.5 * manufactured_phi0(2.0), 1e-6);
}

TEST(Build, LargeRadiusLaw) {
  // U(r) ~ int_r^inf (t - r) g(t) dt; for g = (1+t)^{-4} that is (1+r)^{-2}/6
  const auto src = smooth_source([](double t) { return std::pow(1 + t, -4.0); }, TailModel::algebraic(4));
  const auto u = build_from_source(free_pair(), src);
  const double r = grid().r_max() / 2;
  const double law = 1.0 / (6 * (1 + r) * (1 + r));
  EXPECT_LT(std::abs(u.profile()(r) - law) / law, 0.05);
  // the built U decays like r^{-2}, so r U does not approach a constant
  EXPECT_GT(u.profile()(10.0) * 10.0 / (u.profile()(r) * r), 1.5);
}

TEST(Build, SourceIntegrabilityEnforced) {
  const auto slow = smooth_source([](double t) { return std::pow(1 + t, -1.5); }, TailModel::algebraic(1.5));
  EXPECT_EQ(code_of([&] { build_from_source(free_pair(), slow); }), ErrorCode::SourceIntegrabilityViolation);
  const auto neg = smooth_source([](double t) { return -std::exp(-t); }, TailModel::exponential(1));
  EXPECT_EQ(code_of([&] { neg.validate(); }), ErrorCode::ValidationError);
  EXPECT_EQ(code_of([] { delta_source(0.0, 1.0).validate(); }), ErrorCode::ValidationError);
  EXPECT_EQ(code_of([] { delta_source(1.0, -1.0).validate(); }), ErrorCode::ValidationError);
}

TEST(Ledger, ExponentialSourceHoldsEverywhere) {
  const auto src = exp_source();
  const auto u = build_from_source(free_pair(), src);
  const auto L = integrability_ledger(src, u);
  EXPECT_TRUE(L.literal_consistent());
  EXPECT_TRUE(L.corrected_consistent());
  for (const auto& e : L.corrected) EXPECT_TRUE(e.hypothesis_holds) << e.hypothesis;
  EXPECT_TRUE(u.flags().l1_near_origin);
  EXPECT_TRUE(u.flags().rU_l1_at_infinity);
}

TEST(Ledger, OriginSingularSource) {
  // t^{-2.5} e^{-t}: t^2 g is integrable on (0, 1), so U is too
  const auto src = smooth_source([](double t) { return std::pow(t, -2.5) * std::exp(-t); }, TailModel::exponential(1));
  const auto u = build_from_source(free_pair(), src);
  EXPECT_TRUE(u.flags().l1_near_origin);
  EXPECT_TRUE(integrability_ledger(src, u).corrected_consistent());
}

TEST(Ledger, SlowSourceSeparatesLiteralFromCorrected) {
  // g = (1+t^2)^{-5/4} ~ t^{-2.5}: t g in L1 at infinity, but U ~ (4/3) r^{-1/2} is not in L1(1, inf)
  auto g = [](double t) { return std::pow(1 + t * t, -1.25); };
  const auto src = smooth_source(g, TailModel::algebraic(2.5));
  const auto u = build_from_source(free_pair(), src);
  const double r = 20.0, T = 1e4;
  const double oracle = gauss_integrate([&](double t) { return (t - r) * g(t); }, r, T, 32, 400) +
                        2 / std::sqrt(T) - r * (2.0 / 3.0) * std::pow(T, -1.5);
  EXPECT_NEAR(u.profile()(r), oracle, 1e-3 * oracle);
  EXPECT_TRUE(u.flags().vanishes_at_infinity);
  EXPECT_FALSE(u.flags().l1_at_infinity);
  const auto L = integrability_ledger(src, u);
  EXPECT_FALSE(L.literal_consistent());
  EXPECT_TRUE(L.corrected_consistent());
}

TEST(Property, RandomSourcesBuildConvexDecreasingProfiles) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> rate(0.3, 3.0), weight(0.1, 2.0), site(0.2, 8.0);
  for (int trial = 0; trial < 8; ++trial) {
    const double a = rate(rng), wa = weight(rng);
    auto src = smooth_source([=](double t) { return wa * std::exp(-a * t); }, TailModel::exponential(a));
    src.deltas.push_back({weight(rng), site(rng)});
    const auto u = build_from_source(manufactured_pair(), src);
    const auto& f = u.flags();
    EXPECT_TRUE(f.positive) << trial;
    EXPECT_TRUE(f.decreasing) << trial;
    EXPECT_TRUE(f.convex) << trial;
    EXPECT_TRUE(ode_residual(u, manufactured_v(), src).passed) << trial;
  }
}
