#include "bicsep/formfactor.hpp"

#include "bicsep/errors.hpp"
#include "bicsep/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bicsep {

namespace {

using Kind = TailModel::Kind;

bool tail_moment_finite(const TailModel& t, double power) {
  if (t.kind == Kind::compact || t.kind == Kind::exponential) return true;
  if (t.amplitude == 0.0 && t.kind != Kind::none) return true;
  if (t.kind == Kind::algebraic) return t.parameter > power + 1.0;
  return false;
}

bool head_moment_finite(const HeadModel& h, double power) {
  return !h.power_law || h.exponent + power > -1.0;
}

// int_R^inf g and int_R^inf t g for the smooth source.
std::pair<double, double> source_tail_moments(const SampledFunction& g, double R) {
  const double gr = g.grid().r_max();
  double m0 = 0.0, m1 = 0.0;
  double from = R;
  if (R < gr) {
    const int pieces = std::max(1, int(std::ceil((gr - R) / 0.05)));
    m0 += gauss_integrate([&](double t) { return g(t); }, R, gr, 8, pieces);
    m1 += gauss_integrate([&](double t) { return t * g(t); }, R, gr, 8, pieces);
    from = gr;
  }
  m0 += g.tail().integral_from(from);
  m1 += g.tail().first_moment_from(from) + from * g.tail().integral_from(from);
  return {m0, m1};
}

struct Brackets {
  RadialGrid grid;
  Eigen::VectorXd phi, chi, P, Q;
};

// P(r) = int_r^inf phi0 g, Q(r) = int_r^inf chi0 g at the nodes of the pair grid plus delta sites.
Brackets brackets(const ZeroEnergyPair& pair, const SourceFunction& src) {
  src.validate();
  const auto ig = source_integrability(src);
  if (!ig.rg_l1_at_infinity) raise(ErrorCode::SourceIntegrabilityViolation, "r g is not integrable at infinity");
  if (!ig.r2g_l1_near_origin) raise(ErrorCode::SourceIntegrabilityViolation, "r^2 g is not integrable at the origin");
  const auto sites = src.sites();
  const RadialGrid& base = pair.phi0.grid();
  for (double s : sites)
    if (s >= base.r_max() || s <= base.r_min()) raise(ErrorCode::InvalidArgument, "delta site outside the grid");
  Brackets b{base.with_nodes(sites), {}, {}, {}, {}};
  const auto& x = b.grid.nodes();
  const Index n = x.size();
  b.phi.resize(n);
  b.chi.resize(n);
  for (Index i = 0; i < n; ++i) {
    const Index j = base.find_node(x[i]);
    b.phi[i] = j >= 0 ? pair.phi0.values()[j] : pair.phi0(x[i]);
    b.chi[i] = j >= 0 ? pair.chi0.values()[j] : pair.chi0(x[i]);
  }
  b.P = Eigen::VectorXd::Zero(n);
  b.Q = Eigen::VectorXd::Zero(n);
  if (src.smooth) {
    const auto& g = *src.smooth;
    const auto [m0, m1] = source_tail_moments(g, x[n - 1]);
    b.P[n - 1] = pair.A * m1 + pair.B * m0;
    b.Q[n - 1] = m0 / pair.A;
    const auto& gl = gauss_legendre(8);
    SegmentCursor phi0(pair.phi0), chi0(pair.chi0), gc(g);
    for (Index i = n - 2; i >= 0; --i) {
      const double mid = 0.5 * (x[i] + x[i + 1]), half = 0.5 * (x[i + 1] - x[i]);
      double p = 0.0, q = 0.0;
      for (std::size_t k = gl.x.size(); k-- > 0;) {
        const double t = mid + half * gl.x[k];
        const double gv = gc(t);
        p += gl.w[k] * phi0(t) * gv;
        q += gl.w[k] * chi0(t) * gv;
      }
      b.P[i] = b.P[i + 1] + half * p;
      b.Q[i] = b.Q[i + 1] + half * q;
    }
  }
  for (const auto& d : src.deltas) {
    const double pd = pair.phi0(d.r0), cd = pair.chi0(d.r0);
    for (Index i = 0; i < n && x[i] < d.r0 * (1.0 - 1e-14); ++i) {
      b.P[i] += d.lambda * pd;
      b.Q[i] += d.lambda * cd;
    }
  }
  return b;
}

// Fornberg weights for the m-th derivative at z from nodes x[0..k).
template <int K>
std::array<double, K> fornberg(const double* x, double z, int m) {
  double c[K][3] = {};
  double c1 = 1.0, c4 = x[0] - z;
  c[0][0] = 1.0;
  for (int i = 1; i < K; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int l = mn; l >= 1; --l) c[i][l] = c1 * (l * c[i - 1][l - 1] - c5 * c[i - 1][l]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int l = mn; l >= 1; --l) c[j][l] = (c4 * c[j][l] - l * c[j][l - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::array<double, K> w{};
  for (int i = 0; i < K; ++i) w[std::size_t(i)] = c[i][m];
  return w;
}

bool l1_tail(const TailModel& t, double power) { return tail_moment_finite(t, power); }

}  // namespace

void SourceFunction::validate() const {
  if (smooth) {
    const auto& v = smooth->values();
    if (!(v.minCoeff() >= 0.0)) raise(ErrorCode::ValidationError, "source g must be nonnegative at every node");
  }
  for (const auto& d : deltas) {
    if (!(d.lambda > 0.0)) raise(ErrorCode::ValidationError, "delta weight must be positive");
    if (!(d.r0 > 0.0)) raise(ErrorCode::ValidationError, "delta site must be positive");
  }
}

std::vector<double> SourceFunction::sites() const {
  std::vector<double> s;
  for (const auto& d : deltas) s.push_back(d.r0);
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

SourceIntegrability source_integrability(const SourceFunction& src) {
  SourceIntegrability s;
  if (!src.smooth) return s;
  const auto& t = src.smooth->tail();
  s.g_l1_at_infinity = tail_moment_finite(t, 0.0);
  s.rg_l1_at_infinity = tail_moment_finite(t, 1.0);
  s.r2g_l1_at_infinity = tail_moment_finite(t, 2.0);
  s.r3g_l1_at_infinity = tail_moment_finite(t, 3.0);
  s.r2g_l1_near_origin = head_moment_finite(src.smooth->head(), 2.0);
  return s;
}

FormFactorFlags measure_flags(const SampledFunction& u, double tol, std::span<const double> kinks) {
  FormFactorFlags f;
  const auto sf = shape_flags(u, tol, kinks);
  f.positive = sf.positive;
  f.decreasing = sf.nonincreasing;
  f.convex = sf.convex;
  const auto& t = u.tail();
  f.vanishes_at_infinity = t.kind == Kind::compact || (t.kind != Kind::none && t.decays());
  f.l1_near_origin = head_moment_finite(u.head(), 0.0);
  f.l1_at_infinity = l1_tail(t, 0.0);
  f.rU_l1_at_infinity = l1_tail(t, 1.0);
  f.r2U_l1_at_infinity = l1_tail(t, 2.0);
  return f;
}

FormFactor::FormFactor(SampledFunction u, double tol) : u_(std::move(u)) { flags_ = measure_flags(u_, tol); }

FormFactor FormFactor::built(SampledFunction u, SourceFunction src, double tol) {
  FormFactor f(std::move(u), tol);
  f.provenance_ = Provenance::built;
  const auto kinks = src.sites();
  f.flags_ = measure_flags(f.u_, tol, kinks);
  f.source_ = std::move(src);
  return f;
}

std::vector<double> FormFactor::kink_sites() const { return source_ ? source_->sites() : std::vector<double>{}; }

FormFactor build_from_source(const ZeroEnergyPair& pair, const SourceFunction& src, const BuildOptions& o) {
  const Brackets b = brackets(pair, src);
  Eigen::VectorXd u = b.chi.cwiseProduct(b.P) - b.phi.cwiseProduct(b.Q);
  const double scale = u.cwiseAbs().maxCoeff();
  if (scale > 0.0 && u.minCoeff() < -o.positivity_tol * scale)
    raise(ErrorCode::NonPositiveResult, "built U is negative somewhere; quadrature failure");
  SampledFunction::Options opt;
  for (double s : src.sites()) opt.breakpoints.push_back(b.grid[b.grid.find_node(s)]);
  const TailModel tail = scale == 0.0 ? TailModel::compact(b.grid.r_max()) : fit_tail(b.grid.nodes(), u);
  return FormFactor::built(SampledFunction(b.grid, std::move(u), tail, opt), src);
}

Eigen::VectorXd build_nested(const ZeroEnergyPair& pair, const SourceFunction& src, const RadialGrid& grid) {
  SourceFunction smooth_only{src.smooth, {}};
  const Brackets b = brackets(pair, smooth_only);
  const auto& x = b.grid.nodes();
  const Index n = x.size();
  Eigen::VectorXd inner(n);
  Eigen::VectorXd q = b.P.cwiseQuotient(b.phi.cwiseAbs2());
  // int_r^inf P/phi0^2: beyond r_max P/phi0^2 is integrated with the fitted tail of q
  const SampledFunction qf(b.grid, q, src.smooth ? fit_tail(x, q) : TailModel::compact(x[n - 1]));
  const Eigen::VectorXd qi = cumulative_to_infinity(qf);
  const SampledFunction nested(b.grid, b.phi.cwiseProduct(qi), TailModel::none());
  const SampledFunction inv2 = SampledFunction::sample(
      pair.phi0.grid(), [&](double r) { return 1.0 / std::pow(pair.phi0(r), 2); }, TailModel::algebraic(2.0));
  Eigen::VectorXd out(grid.size());
  for (Index i = 0; i < grid.size(); ++i) {
    const double r = grid[i];
    const Index j = b.grid.find_node(r);
    double v = j >= 0 ? nested.values()[j] : nested(r);
    if (!src.smooth) v = 0.0;
    for (const auto& d : src.deltas)
      if (r < d.r0) v += d.lambda * pair.phi0(d.r0) * pair.phi0(r) * integrate_interval(inv2, r, d.r0);
    out[i] = v;
  }
  return out;
}

double origin_limit(const ZeroEnergyPair& pair, const SourceFunction& src) {
  double s = 0.0;
  if (src.smooth) {
    // phi0 ~ r below the first node
    s += head_integral(*src.smooth, [](double) { return 1.0; }, 1.0);
    s += brackets(pair, SourceFunction{src.smooth, {}}).P[0];
  }
  for (const auto& d : src.deltas) s += d.lambda * pair.phi0(d.r0);
  return s;
}

double second_derivative(const Eigen::VectorXd& x, const Eigen::VectorXd& v, Index i) {
  const Index n = x.size();
  const Index lo = std::clamp<Index>(i - 2, 0, n - 5);
  const auto w = fornberg<5>(x.data() + lo, x[i], 2);
  double s = 0.0;
  for (int k = 0; k < 5; ++k) s += w[std::size_t(k)] * v[lo + k];
  return s;
}

OdeResidualReport ode_residual(const FormFactor& uf, const LocalPotential& v, const SourceFunction& src, double tol) {
  const auto& u = uf.profile();
  const auto& x = u.grid().nodes();
  const auto& val = u.values();
  const Index n = x.size();
  const double umax = val.cwiseAbs().maxCoeff();
  std::vector<bool> skip(std::size_t(n), false);
  for (double s : src.sites()) {
    const Index c = u.grid().segment(s);
    for (Index j = std::max<Index>(0, c - 2); j <= std::min(n - 1, c + 3); ++j) skip[std::size_t(j)] = true;
  }
  // second differences amplify value noise by ~4/h^2: keep nodes where 1e-13 max|U| * 4/h^2 stays below tol/10
  OdeResidualReport rep;
  for (Index i = 2; i + 2 < n; ++i) {
    if (skip[std::size_t(i)]) continue;
    const double h = std::min(x[i] - x[i - 1], x[i + 1] - x[i]);
    const double g = src.smooth ? (*src.smooth)(x[i]) : 0.0;
    const double vu = v(x[i]) * val[i];
    const double denom = umax + std::abs(vu) + std::abs(g);
    if (denom == 0.0) continue;
    if (4e-13 * umax / (h * h) > 0.1 * tol * denom) continue;
    const double res = std::abs(second_derivative(x, val, i) - vu - g) / denom;
    ++rep.checked;
    if (res > rep.max_residual) {
      rep.max_residual = res;
      rep.at = x[i];
    }
  }
  rep.passed = rep.max_residual < tol;
  return rep;
}

OdeResidualReport verify_ode_identity(const FormFactor& u, const LocalPotential& v, const SourceFunction& src,
                                      double tol) {
  auto rep = ode_residual(u, v, src, tol);
  if (!rep.passed)
    raise(ErrorCode::ResidualTooLarge,
          "U'' - V U - g residual " + std::to_string(rep.max_residual) + " at r = " + std::to_string(rep.at));
  return rep;
}

bool IntegrabilityLedger::literal_consistent() const {
  return std::all_of(literal.begin(), literal.end(), [](const LedgerEntry& e) { return e.consistent(); });
}

bool IntegrabilityLedger::corrected_consistent() const {
  return std::all_of(corrected.begin(), corrected.end(), [](const LedgerEntry& e) { return e.consistent(); });
}

IntegrabilityLedger integrability_ledger(const SourceFunction& src, const FormFactor& built) {
  const auto s = source_integrability(src);
  const auto& m = built.flags();
  auto entry = [](std::string h, bool holds, std::string c, bool measured) {
    return LedgerEntry{std::move(h), std::move(c), holds, holds, measured};
  };
  IntegrabilityLedger l;
  l.literal.push_back(entry("g in L1(1,inf)", s.g_l1_at_infinity, "U(inf) = 0", m.vanishes_at_infinity));
  l.literal.push_back(entry("t g in L1(1,inf)", s.rg_l1_at_infinity, "U in L1(1,inf)", m.l1_at_infinity));
  l.literal.push_back(entry("t^2 g in L1(1,inf)", s.r2g_l1_at_infinity, "r U in L1(1,inf)", m.rU_l1_at_infinity));
  l.literal.push_back(entry("t^2 g in L1(0,1)", s.r2g_l1_near_origin, "U in L1(0,1)", m.l1_near_origin));
  l.corrected.push_back(entry("t g in L1(1,inf)", s.rg_l1_at_infinity, "U(inf) = 0", m.vanishes_at_infinity));
  l.corrected.push_back(entry("t^2 g in L1(1,inf)", s.r2g_l1_at_infinity, "U in L1(1,inf)", m.l1_at_infinity));
  l.corrected.push_back(entry("t^3 g in L1(1,inf)", s.r3g_l1_at_infinity, "r U in L1(1,inf)", m.rU_l1_at_infinity));
  l.corrected.push_back(entry("t^2 g in L1(0,1)", s.r2g_l1_near_origin, "U in L1(0,1)", m.l1_near_origin));
  return l;
}

}  // namespace bicsep
