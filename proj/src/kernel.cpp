#include "bicsep/kernel.hpp"

#include "bicsep/errors.hpp"
#include "bicsep/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bicsep {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// t(tau) = h_max [tau + g ln(1 + C e^{-tau/g}) - g ln(1 + C)], slope h_min at 0 and h_max far out.
struct GradedMap {
  double h_max, g, C;
  double operator()(double tau) const {
    return h_max * (tau + g * std::log1p(C * std::exp(-tau / g)) - g * std::log1p(C));
  }
};

Eigen::VectorXd graded_nodes(const GradedMap& map, Index last, int refine) {
  Eigen::VectorXd t(last * refine + 1);
  for (Index m = 0; m < t.size(); ++m) t[m] = map(double(m) / refine);
  t[0] = 0.0;
  return t;
}

std::vector<Index> domain_rows(const Eigen::VectorXd& t, double r_ext) {
  std::vector<Index> bmax(std::size_t(t.size()));
  for (Index a = 0; a < t.size(); ++a) {
    Index b = a;
    while (b > 0 && t[a] + t[b] > r_ext * (1.0 + 1e-12)) --b;
    bmax[std::size_t(a)] = t[a] + t[b] <= r_ext * (1.0 + 1e-12) ? b : -1;
  }
  return bmax;
}

struct Level {
  RowMatrix h;
  int iterations = 0;
  double residual = 0.0;
};

// Picard iteration of H = S + T[H] on one node set, row by row so that only
// the current and previous rows of the inner integrals are kept.
Level picard(const Eigen::VectorXd& t, const Eigen::VectorXd& phi1, const std::vector<Index>& bmax,
             const LocalPotential& v, const KernelOptions& o) {
  const Index n = t.size();
  RowMatrix w = RowMatrix::Zero(n, n);
  Level out;
  out.h = RowMatrix::Zero(n, n);
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b <= bmax[std::size_t(a)]; ++b) {
      w(a, b) = v(t[a] + t[b]);
      out.h(a, b) = 0.5 * (phi1[a] - phi1[b]);
    }
  Eigen::VectorXd g_prev(n), g_cur(n), t_row(n);
  for (int it = 1; it <= o.max_iterations; ++it) {
    double change = 0.0;
    g_prev.setZero();
    t_row.setZero();
    for (Index i = 0; i < n; ++i) {
      const Index top = bmax[std::size_t(i)];
      if (top < 0) break;
      g_cur[0] = 0.0;
      for (Index j = 1; j <= top; ++j)
        g_cur[j] = g_cur[j - 1] + 0.5 * (t[j] - t[j - 1]) * (w(i, j - 1) * out.h(i, j - 1) + w(i, j) * out.h(i, j));
      const double ds = i > 0 ? t[i] - t[i - 1] : 0.0;
      for (Index j = 0; j <= top; ++j) {
        if (j == i) {
          t_row[j] = 0.0;
          continue;
        }
        t_row[j] += 0.5 * ds * (g_prev[j] + g_cur[j]);
        const double next = 0.5 * (phi1[i] - phi1[j]) + t_row[j];
        change = std::max(change, std::abs(next - out.h(i, j)));
        out.h(i, j) = next;
      }
      std::swap(g_prev, g_cur);
    }
    out.iterations = it;
    out.residual = change;
    if (!std::isfinite(change)) raise(ErrorCode::IterationDivergence, "kernel iteration produced non-finite values");
    if (change < o.tol) return out;
  }
  raise(ErrorCode::IterationDivergence, "kernel iteration did not converge within the iteration limit");
}

// Lagrange weights for 4 nodes starting at i0.
std::array<double, 4> lagrange4(const Eigen::VectorXd& t, Index i0, double x) {
  std::array<double, 4> l{};
  for (int p = 0; p < 4; ++p) {
    double v = 1.0;
    for (int q = 0; q < 4; ++q)
      if (q != p) v *= (x - t[i0 + q]) / (t[i0 + p] - t[i0 + q]);
    l[std::size_t(p)] = v;
  }
  return l;
}

Index stencil_start(const Eigen::VectorXd& t, double x) {
  const Index n = t.size();
  const Index seg = Index(std::upper_bound(t.data(), t.data() + n, x) - t.data()) - 1;
  return std::clamp<Index>(seg - 1, 0, n - 4);
}

double sinc_k(double k, double x) { return k == 0.0 ? x : std::sin(k * x) / k; }

// 2 int_0^{top} H(s0 + c u, u) w(u) du over the node intervals in u (c = -1 or +1 for the two line families).
template <class Weight>
double line_integral(const KernelTable& kt, double s0, double c, double top, Weight&& w) {
  if (top <= 0.0) return 0.0;
  const auto& t = kt.nodes();
  const auto& g = gauss_legendre(4);
  double sum = 0.0;
  for (Index b = 0; b + 1 < t.size() && t[b] < top; ++b) {
    const double lo = t[b], hi = std::min(t[b + 1], top);
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    for (std::size_t q = 0; q < g.x.size(); ++q) {
      const double u = mid + half * g.x[q];
      sum += g.w[q] * half * kt.rotated(s0 + c * u, u) * w(u);
    }
  }
  return 2.0 * sum;
}

}  // namespace

bool KernelTable::in_domain(Index a, Index b) const {
  const Index hi = std::max(a, b), lo = std::min(a, b);
  return lo >= 0 && hi < t_.size() && bmax_[std::size_t(hi)] >= lo;
}

double KernelTable::rotated(double s, double u) const {
  if (u > s) return -rotated(u, s);
  if (u < 0.0 || s + u > R_ext_ * (1.0 + 1e-12)) raise(ErrorCode::InvalidArgument, "point outside the kernel triangle");
  const Index a0 = stencil_start(t_, s), b0 = stencil_start(t_, u);
  const auto ls = lagrange4(t_, a0, s), lu = lagrange4(t_, b0, u);
  double sum = 0.0;
  for (int p = 0; p < 4; ++p) {
    double row = 0.0;
    for (int q = 0; q < 4; ++q) {
      const Index a = a0 + p, b = b0 + q;
      if (!in_domain(a, b)) raise(ErrorCode::InvalidArgument, "interpolation stencil leaves the kernel triangle");
      row += lu[std::size_t(q)] * node_value(a, b);
    }
    sum += ls[std::size_t(p)] * row;
  }
  return sum;
}

double KernelTable::operator()(double r, double x) const {
  if (x < 0.0 || x > r) raise(ErrorCode::InvalidArgument, "kernel needs 0 <= x <= r");
  return rotated(0.5 * (r + x), 0.5 * (r - x));
}

double KernelTable::potential_integral(double t) const {
  const auto& prof = v_.profile();
  const double rmax = prof.grid().r_max();
  if (t <= rmax) return integrate_interval(prof, 0.0, t);
  return integrate_interval(prof, 0.0, rmax) + prof.tail().integral_from(rmax) - prof.tail().integral_from(t);
}

KernelTable solve_kernel(const LocalPotential& v, const KernelOptions& o) {
  if (!(o.R > 0.0) || !(o.h_max > 0.0) || !(o.h_min > 0.0) || o.h_min > o.h_max || !(o.grading > 0.0))
    raise(ErrorCode::InvalidArgument, "kernel options out of range");
  if (o.R > v.grid().r_max()) raise(ErrorCode::InvalidArgument, "kernel extent exceeds the potential grid");
  const auto& head = v.profile().head();
  if (head.power_law && !(head.exponent > -1.0))
    raise(ErrorCode::IntegrabilityViolation, "V is not integrable at the origin; regularize it first");

  KernelTable kt(v);
  kt.R_ = o.R;
  kt.c_ = v.rV_l1();
  const GradedMap map{o.h_max, o.grading, o.h_max / o.h_min - 1.0};
  // margin for the interpolation stencil
  const double target = o.R + 6.0 * o.h_max;
  Index last = 1;
  while (map(double(last)) < target) ++last;
  last = std::max<Index>(last, 4);

  const Eigen::VectorXd tc = graded_nodes(map, last, 1);
  kt.R_ext_ = tc[tc.size() - 1];
  kt.t_ = tc;
  kt.bmax_ = domain_rows(tc, kt.R_ext_);
  kt.phi1_.resize(tc.size());
  for (Index a = 0; a < tc.size(); ++a) kt.phi1_[a] = kt.potential_integral(tc[a]);

  Level coarse = picard(tc, kt.phi1_, kt.bmax_, v, o);
  kt.iterations_ = coarse.iterations;
  kt.residual_ = coarse.residual;
  if (!o.richardson) {
    kt.h_ = std::move(coarse.h);
    return kt;
  }
  const Eigen::VectorXd tf = graded_nodes(map, last, 2);
  Eigen::VectorXd phi1f(tf.size());
  for (Index a = 0; a < tf.size(); ++a) phi1f[a] = kt.potential_integral(tf[a]);
  const auto bmaxf = domain_rows(tf, kt.R_ext_);
  Level fine = picard(tf, phi1f, bmaxf, v, o);
  kt.iterations_ = std::max(kt.iterations_, fine.iterations);
  kt.residual_ = std::max(kt.residual_, fine.residual);
  kt.h_ = Eigen::MatrixXd::Zero(tc.size(), tc.size());
  double diff = 0.0;
  for (Index a = 0; a < tc.size(); ++a)
    for (Index b = 0; b <= kt.bmax_[std::size_t(a)]; ++b) {
      const double hf = fine.h(2 * a, 2 * b), hc = coarse.h(a, b);
      diff = std::max(diff, std::abs(hf - hc));
      kt.h_(a, b) = (4.0 * hf - hc) / 3.0;
    }
  kt.richardson_change_ = diff;
  return kt;
}

RegularSolution phi_via_kernel(const KernelTable& kt, double k, const RadialGrid& radii) {
  if (k < 0.0) raise(ErrorCode::InvalidArgument, "momentum must be nonnegative");
  if (radii.r_max() > kt.R() * (1.0 + 1e-12)) raise(ErrorCode::InvalidArgument, "radii exceed the kernel extent");
  RegularSolution out;
  out.k = k;
  out.grid = radii;
  out.phi.resize(radii.size());
  for (Index i = 0; i < radii.size(); ++i) {
    const double r = radii[i];
    // x = r - 2u, s = r - u
    out.phi[i] = sinc_k(k, r) + line_integral(kt, r, -1.0, 0.5 * r, [&](double u) { return sinc_k(k, r - 2.0 * u); });
  }
  const SampledFunction f(radii, out.phi);
  out.dphi.resize(radii.size());
  for (Index i = 0; i < radii.size(); ++i) out.dphi[i] = f.derivative(radii[i]);
  return out;
}

FProfile make_profile(SampledFunction f, double tol) {
  FProfile p;
  const auto& v = f.values();
  const double scale = v.cwiseAbs().maxCoeff();
  const auto flags = shape_flags(f, tol);
  p.positive = v.minCoeff() > 0.0;
  p.l1_near_origin = !f.head().power_law || f.head().exponent > -1.0;
  p.decreasing = flags.nonincreasing;
  p.convex = flags.convex;
  const auto& tl = f.tail();
  p.vanishing_at_infinity = tl.kind == TailModel::Kind::compact || (tl.decays() && tl.kind != TailModel::Kind::none) ||
                            std::abs(v[v.size() - 1]) <= tol * scale;
  p.f = std::move(f);
  return p;
}

FProfile f_transform(const KernelTable& kt, const SampledFunction& u, const FTransformOptions& o) {
  const auto& ut = u.tail();
  const bool u_vanishes = ut.kind == TailModel::Kind::compact || (ut.kind != TailModel::Kind::none && ut.decays());
  if (!u_vanishes) raise(ErrorCode::IntegrabilityViolation, "U must vanish at infinity");
  const double R = kt.R();
  const RadialGrid grid = u.grid().truncated(R);
  const double umax = u.values().cwiseAbs().maxCoeff();

  // int_R^inf |U|
  const double urmax = u.grid().r_max();
  double u_tail = std::abs(ut.integral_from(urmax));
  if (R < urmax) {
    const int pieces = std::max(1, int(std::ceil((urmax - R) / 0.05)));
    u_tail += gauss_integrate([&](double r) { return std::abs(u(r)); }, R, urmax, 8, pieces);
  }
  const auto& prof = kt.potential().profile();
  const double v_total = kt.potential_integral(prof.grid().r_max()) + prof.tail().integral_from(prof.grid().r_max());
  const double pref = 0.5 * std::exp(kt.first_moment()) * u_tail;

  Eigen::VectorXd vals(grid.size());
  double bound = 0.0;
  for (Index i = 0; i < grid.size(); ++i) {
    const double x = grid[i];
    const double top = 0.5 * (R - x);
    vals[i] = u(x) + line_integral(kt, x, 1.0, top, [&](double w) { return u(x + 2.0 * w); });
    bound = std::max(bound, pref * (v_total - kt.potential_integral(std::max(top, 0.0))));
  }
  if (bound > o.tail_tolerance * umax)
    raise(ErrorCode::TailBoundTooLarge, "kernel tail beyond R is not negligible; increase R");
  SampledFunction::Options opt;
  for (double b : u.breakpoint_radii())
    if (b <= R && grid.find_node(b) >= 0) opt.breakpoints.push_back(b);
  FProfile p = make_profile(SampledFunction(grid, std::move(vals), ut, opt), o.flag_tolerance);
  p.vanishing_at_infinity = p.vanishing_at_infinity && u_vanishes;
  p.tail_bound = bound;
  return p;
}

Verdict check_requirements(const FProfile& f) {
  Verdict v;
  const auto& vals = f.f.values();
  auto add = [&](std::string name, bool ok, std::string detail) {
    v.conditions.push_back({std::move(name), ok, std::move(detail)});
  };
  add("positive", f.positive, "min f = " + std::to_string(vals.minCoeff()));
  add("integrable_near_origin", f.l1_near_origin,
      f.f.head().power_law ? "head exponent " + std::to_string(f.f.head().exponent) : "bounded at the origin");
  add("decreasing", f.decreasing, f.decreasing ? "nonincreasing on the grid" : "increase detected");
  add("vanishing_at_infinity", f.vanishing_at_infinity, "last value " + std::to_string(vals[vals.size() - 1]));
  v.passed = std::all_of(v.conditions.begin(), v.conditions.end(), [](const Condition& c) { return c.passed; });
  return v;
}

KernelDiagnostics kernel_diagnostics(const KernelTable& kt) {
  KernelDiagnostics d;
  const auto& t = kt.nodes();
  const auto& p1 = kt.potential_integral();
  const double e = 0.5 * std::exp(kt.first_moment());
  double hmax = 0.0, hmin = std::numeric_limits<double>::infinity();
  d.bound_margin = std::numeric_limits<double>::infinity();
  for (Index a = 0; a < t.size(); ++a) {
    // keep to r <= R
    for (Index b = 0; b <= a; ++b) {
      if (!kt.in_domain(a, b) || t[a] + t[b] > kt.R() * (1.0 + 1e-12)) break;
      const double h = kt.node_value(a, b);
      hmax = std::max(hmax, std::abs(h));
      hmin = std::min(hmin, h);
      d.bound_margin = std::min(d.bound_margin, e * (p1[a] - p1[b]) - h);
    }
    if (2.0 * t[a] <= kt.R() * (1.0 + 1e-12)) d.max_axis_value = std::max(d.max_axis_value, std::abs(kt.node_value(a, a)));
  }
  const double tol = 1e-9 * std::max(1.0, hmax);
  d.nonnegative = hmin >= -tol;
  d.bound_holds = d.bound_margin >= -tol;
  double vmax = 0.0, err = 0.0;
  for (Index a = 0; a + 1 < t.size() && t[a + 1] <= kt.R(); ++a) {
    const double mid = 0.5 * (t[a] + t[a + 1]);
    const double slope = (kt.node_value(a + 1, 0) - kt.node_value(a, 0)) / (t[a + 1] - t[a]);
    const double half_v = 0.5 * kt.potential()(mid);
    vmax = std::max(vmax, half_v);
    err = std::max(err, std::abs(slope - half_v));
  }
  d.diagonal_error = vmax > 0.0 ? err / vmax : err;
  return d;
}

}  // namespace bicsep
