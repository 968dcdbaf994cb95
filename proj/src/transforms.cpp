#include "bicsep/transforms.hpp"

#include "bicsep/bessel.hpp"
#include "bicsep/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace bicsep {

namespace {

void require_r_weighted_integrable(const SampledFunction& u, const char* what) {
  using K = TailModel::Kind;
  const auto& t = u.tail();
  if (t.kind == K::algebraic && t.amplitude != 0.0 && !(t.parameter > 2.0))
    raise(ErrorCode::IntegrabilityViolation, std::string(what) + ": r U is not integrable at infinity");
  if (u.head().power_law && !(u.head().exponent > -2.0))
    raise(ErrorCode::IntegrabilityViolation, std::string(what) + ": r U is not integrable at the origin");
}

struct WeightedPoints {
  std::vector<double> t, aw;
};

// Quadrature nodes t_q with weights times a(t_q) covering [0, inf).
WeightedPoints quadrature_points(const SampledFunction& a) {
  WeightedPoints out;
  const auto& x = a.grid().nodes();
  const auto& g = gauss_legendre(8);
  auto add = [&](double lo, double hi, auto&& fa) {
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    for (std::size_t q = 0; q < g.x.size(); ++q) {
      const double t = mid + half * g.x[q];
      const double v = fa(t);
      if (v != 0.0) {
        out.t.push_back(t);
        out.aw.push_back(g.w[q] * half * v);
      }
    }
  };
  add(0.0, x[0], [&](double t) { return a(t); });
  for (Index i = 0; i + 1 < x.size(); ++i) add(x[i], x[i + 1], [&](double t) { return a.eval_segment(i, t); });
  const auto& tl = a.tail();
  if (tl.amplitude != 0.0) {
    const double R = tl.anchor;
    if (tl.kind == TailModel::Kind::exponential) {
      const double span = 60.0 / tl.parameter;
      const int pieces = std::max(8, int(std::ceil(span / 0.5)));
      for (int j = 0; j < pieces; ++j)
        add(R + span * j / pieces, R + span * (j + 1) / pieces, [&](double t) { return tl(t); });
    } else if (tl.kind == TailModel::Kind::algebraic) {
      if (!(tl.parameter > 1.0)) raise(ErrorCode::IntegrabilityViolation, "profile is not integrable at infinity");
      // geometric panels out to 1e4 R
      double lo = R;
      while (lo < 1e4 * R) {
        const double hi = lo * 1.25;
        add(lo, hi, [&](double t) { return tl(t); });
        lo = hi;
      }
    }
  }
  return out;
}

SampledFunction part(const RadialGrid& grid, Eigen::VectorXd v, const TailModel& utail, std::vector<double> breaks,
                     double sign) {
  TailModel t;
  const Index n = v.size();
  if (v[n - 1] == 0.0) {
    t = fit_tail(grid.nodes(), v);
  } else {
    t = utail;
    t.amplitude *= sign;
  }
  SampledFunction::Options opt;
  opt.breakpoints = std::move(breaks);
  return SampledFunction(grid, std::move(v), t, opt);
}

}  // namespace

SampledFunction TransformTable::as_function() const {
  std::vector<double> p, v;
  for (Index i = 0; i < momenta.size(); ++i)
    if (momenta[i] > 0.0) {
      p.push_back(momenta[i]);
      v.push_back(values[i]);
    }
  RadialGrid g(Eigen::Map<Eigen::VectorXd>(p.data(), Index(p.size())));
  Eigen::VectorXd vals = Eigen::Map<Eigen::VectorXd>(v.data(), Index(v.size()));
  return SampledFunction(g, vals, fit_tail(g.nodes(), vals));
}

Eigen::VectorXd linear_momenta(double lo, double hi, Index count) {
  return Eigen::VectorXd::LinSpaced(count, lo, hi);
}

TransformTable sine_transform(const SampledFunction& u, std::span<const double> momenta,
                              const QuadratureOptions& options) {
  require_r_weighted_integrable(u, "sine transform");
  TransformTable t;
  t.kind = TransformKind::sine;
  t.momenta.resize(Index(momenta.size()));
  t.values.resize(Index(momenta.size()));
  for (std::size_t i = 0; i < momenta.size(); ++i) {
    const double p = momenta[i];
    if (p < 0.0) raise(ErrorCode::InvalidArgument, "momenta must be nonnegative");
    t.momenta[Index(i)] = p;
    t.values[Index(i)] = p == 0.0 ? integrate_weighted(u, [](double r) { return r; }, 0.0, 1.0, options)
                                  : integrate(u, OscillatoryWeight::sine(p), options) / p;
  }
  return t;
}

TransformTable sine_transform(const SampledFunction& u, const Eigen::VectorXd& momenta,
                              const QuadratureOptions& options) {
  return sine_transform(u, std::span<const double>(momenta.data(), std::size_t(momenta.size())), options);
}

CosineTransform cosine_transform(const SampledFunction& f, const Eigen::VectorXd& momenta,
                                 const QuadratureOptions& options) {
  CosineTransform out;
  const auto flags = shape_flags(f);
  const bool bounded = !f.head().power_law;
  const bool vanishing = f.tail().decays() && f.tail().kind != TailModel::Kind::none
                             ? true
                             : std::abs(f.values()[f.size() - 1]) <= 1e-9 * f.values().cwiseAbs().maxCoeff();
  out.convex_decreasing = bounded && flags.positive && flags.nonincreasing && flags.convex && vanishing;
  const bool l1 = f.tail().absolutely_integrable() && (!f.head().power_law || f.head().exponent > -1.0);
  if (!l1 && !out.convex_decreasing) raise(ErrorCode::IntegrabilityViolation, "cosine transform needs f in L1 or convex decreasing");
  out.table.kind = TransformKind::cosine;
  out.table.momenta = momenta;
  out.table.values.resize(momenta.size());
  for (Index i = 0; i < momenta.size(); ++i) {
    const double k = momenta[i];
    if (k == 0.0 && !l1) raise(ErrorCode::IntegrabilityViolation, "cosine transform at k = 0 diverges for non-L1 f");
    out.table.values[i] = integrate(f, OscillatoryWeight::cosine(k), options);
  }
  out.min_value = momenta.size() ? out.table.values.minCoeff() : 0.0;
  return out;
}

SampledFunction tail_function(const SampledFunction& u) {
  using K = TailModel::Kind;
  require_r_weighted_integrable(u, "tail function");
  Eigen::VectorXd w = cumulative_to_infinity(u);
  TailModel t = u.tail();
  if (t.kind == K::algebraic) t = TailModel::algebraic(t.parameter - 1.0);
  if (t.kind == K::exponential) t = TailModel::exponential(t.parameter);
  if (t.kind == K::compact) {
    for (Index i = 0; i < w.size(); ++i)
      if (u.grid()[i] >= t.parameter) w[i] = 0.0;
  }
  SampledFunction::Options opt;
  opt.breakpoints = u.breakpoint_radii();
  return SampledFunction(u.grid(), std::move(w), t, opt);
}

SignedSplit signed_split(const SampledFunction& u) {
  const auto& x = u.grid().nodes();
  const auto& v = u.values();
  std::vector<double> roots;
  for (Index i = 0; i + 1 < x.size(); ++i) {
    if (v[i] * v[i + 1] < 0.0) {
      double lo = x[i], hi = x[i + 1];
      const double slo = v[i];
      for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (u.eval_segment(i, mid) * slo > 0.0) lo = mid;
        else hi = mid;
      }
      roots.push_back(0.5 * (lo + hi));
    }
  }
  const RadialGrid grid = u.grid().with_nodes(roots);
  Eigen::VectorXd vals(grid.size());
  for (Index i = 0; i < grid.size(); ++i) {
    const Index j = u.grid().find_node(grid[i]);
    vals[i] = j >= 0 ? v[j] : 0.0;
  }
  auto breaks = u.breakpoint_radii();
  for (double r : roots) breaks.push_back(grid[grid.find_node(r)]);
  std::sort(breaks.begin(), breaks.end());
  Eigen::VectorXd plus = vals.cwiseMax(0.0);
  Eigen::VectorXd minus = (-vals).cwiseMax(0.0);
  const double last = v[v.size() - 1];
  TailModel tail = u.tail();
  SignedSplit s{part(grid, plus, last > 0.0 ? tail : TailModel::compact(grid.r_max()), breaks, 1.0),
                part(grid, minus, last < 0.0 ? tail : TailModel::compact(grid.r_max()), breaks, -1.0)};
  return s;
}

SampledFunction omega_term(const SampledFunction& a, const SampledFunction& wb, const RadialGrid& grid) {
  const auto pts = quadrature_points(a);
  Eigen::VectorXd out(grid.size());
  SegmentCursor left(wb), right(wb);
  const std::size_t nq = pts.t.size();
  for (Index i = 0; i < grid.size(); ++i) {
    const double r = grid[i];
    double s = 0.0;
    for (std::size_t q = 0; q < nq; ++q) {
      const double t = pts.t[q];
      s += pts.aw[q] * (left(std::abs(r - t)) - right(r + t));
    }
    out[i] = 0.25 * std::numbers::pi * s;
  }
  SampledFunction::Options opt;
  for (double b : a.breakpoint_radii())
    if (grid.find_node(b) >= 0) opt.breakpoints.push_back(b);
  return SampledFunction(grid, out, fit_tail(grid.nodes(), out), opt);
}

SampledFunction omega_convolution(const SignedSplit& split) {
  const auto& grid = split.plus.grid();
  const bool has_plus = split.plus.values().cwiseAbs().maxCoeff() > 0.0;
  const bool has_minus = split.minus.values().cwiseAbs().maxCoeff() > 0.0;
  Eigen::VectorXd total = Eigen::VectorXd::Zero(grid.size());
  std::vector<double> breaks;
  if (has_plus) {
    const auto wp = tail_function(split.plus);
    total += omega_term(split.plus, wp, grid).values();
    if (has_minus) total -= 2.0 * omega_term(split.minus, wp, grid).values();
  }
  if (has_minus) {
    const auto wm = tail_function(split.minus);
    total += omega_term(split.minus, wm, grid).values();
  }
  // the assembled kernel must be integrable
  SampledFunction omega(grid, total, fit_tail(grid.nodes(), total));
  if (!omega.tail().absolutely_integrable()) raise(ErrorCode::IntegrabilityViolation, "omega is not integrable");
  return omega;
}

TransformTable hankel_transform(const SampledFunction& f, double nu, const Eigen::VectorXd& momenta,
                                const QuadratureOptions& options) {
  if (!(nu >= 0.5)) raise(ErrorCode::UnsupportedOrder, "Hankel order must be at least 1/2");
  if (f.head().power_law && !(f.head().exponent + nu + 0.5 > -1.0))
    raise(ErrorCode::IntegrabilityViolation, "f sqrt(kr) J(kr) is not integrable at the origin");
  if (f.tail().kind == TailModel::Kind::algebraic && f.tail().amplitude != 0.0 && !(f.tail().parameter > 0.5))
    raise(ErrorCode::IntegrabilityViolation, "f decays too slowly for the Hankel transform");
  TransformTable t;
  t.kind = TransformKind::hankel;
  t.order = nu;
  t.momenta = momenta;
  t.values.resize(momenta.size());
  for (Index i = 0; i < momenta.size(); ++i) {
    const double k = momenta[i];
    if (k < 0.0) raise(ErrorCode::InvalidArgument, "momenta must be nonnegative");
    if (k == 0.0) {
      t.values[i] = 0.0;
      continue;
    }
    auto w = [k, nu](double r) { return std::sqrt(k * r) * bessel_j(nu, k * r); };
    t.values[i] = integrate_weighted(f, w, k, nu + 0.5, options);
  }
  return t;
}

}  // namespace bicsep
