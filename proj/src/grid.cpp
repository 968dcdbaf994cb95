#include "bicsep/grid.hpp"

#include "bicsep/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bicsep {

namespace {

constexpr double kSnap = 1e-12;

double lagrange_slope(const double* x, const double* y, int n, double at) {
  // derivative at `at` of the polynomial through (x[j], y[j]), j < n
  double d = 0.0;
  for (int j = 0; j < n; ++j) {
    double denom = 1.0;
    for (int m = 0; m < n; ++m)
      if (m != j) denom *= x[j] - x[m];
    double sum = 0.0;
    for (int l = 0; l < n; ++l) {
      if (l == j) continue;
      double prod = 1.0;
      for (int m = 0; m < n; ++m)
        if (m != j && m != l) prod *= at - x[m];
      sum += prod;
    }
    d += y[j] * sum / denom;
  }
  return d;
}

// Spline slopes on nodes [b, e] (inclusive) with end slopes from a local cubic.
void spline_slopes(const Eigen::VectorXd& x, const Eigen::VectorXd& y, Index b, Index e, Eigen::VectorXd& m) {
  const Index n = e - b + 1;
  if (n == 2) {
    m[b] = m[e] = (y[e] - y[b]) / (x[e] - x[b]);
    return;
  }
  if (n == 3) {
    for (Index i = b; i <= e; ++i) m[i] = lagrange_slope(&x[b], &y[b], 3, x[i]);
    return;
  }
  const double left = lagrange_slope(&x[b], &y[b], 4, x[b]);
  const double right = lagrange_slope(&x[e - 3], &y[e - 3], 4, x[e]);
  // Thomas algorithm on interior unknowns b+1 .. e-1
  const Index k = n - 2;
  std::vector<double> sub(k), diag(k), sup(k), rhs(k);
  for (Index j = 0; j < k; ++j) {
    const Index i = b + 1 + j;
    const double h0 = x[i] - x[i - 1], h1 = x[i + 1] - x[i];
    const double d0 = (y[i] - y[i - 1]) / h0, d1 = (y[i + 1] - y[i]) / h1;
    sub[j] = h1;
    diag[j] = 2.0 * (h0 + h1);
    sup[j] = h0;
    rhs[j] = 3.0 * (h1 * d0 + h0 * d1);
  }
  rhs[0] -= sub[0] * left;
  rhs[k - 1] -= sup[k - 1] * right;
  for (Index j = 1; j < k; ++j) {
    const double w = sub[j] / diag[j - 1];
    diag[j] -= w * sup[j - 1];
    rhs[j] -= w * rhs[j - 1];
  }
  m[e - 1] = rhs[k - 1] / diag[k - 1];
  for (Index j = k - 2; j >= 0; --j) m[b + 1 + j] = (rhs[j] - sup[j] * m[b + 2 + j]) / diag[j];
  m[b] = left;
  m[e] = right;
}

void limit_slopes(const Eigen::VectorXd& x, const Eigen::VectorXd& y, Index b, Index e, Eigen::VectorXd& m) {
  for (Index i = b; i <= e; ++i) {
    const double dl = i > b ? (y[i] - y[i - 1]) / (x[i] - x[i - 1]) : std::numeric_limits<double>::quiet_NaN();
    const double dr = i < e ? (y[i + 1] - y[i]) / (x[i + 1] - x[i]) : std::numeric_limits<double>::quiet_NaN();
    double bound;
    if (std::isnan(dl)) {
      bound = 3.0 * std::abs(dr);
      if (m[i] * dr <= 0.0) m[i] = 0.0;
    } else if (std::isnan(dr)) {
      bound = 3.0 * std::abs(dl);
      if (m[i] * dl <= 0.0) m[i] = 0.0;
    } else if (dl * dr <= 0.0) {
      m[i] = 0.0;
      continue;
    } else {
      bound = 3.0 * std::min(std::abs(dl), std::abs(dr));
      if (m[i] * dl <= 0.0) m[i] = 0.0;
    }
    m[i] = std::copysign(std::min(std::abs(m[i]), bound), m[i]);
  }
}

}  // namespace

RadialGrid::RadialGrid(Eigen::VectorXd nodes, bool origin_refined)
    : nodes_(std::move(nodes)), origin_refined_(origin_refined) {
  if (nodes_.size() < 2) raise(ErrorCode::InvalidArgument, "radial grid needs at least 2 nodes");
  if (!(nodes_[0] > 0.0)) raise(ErrorCode::InvalidArgument, "radial grid nodes must be positive");
  for (Index i = 1; i < nodes_.size(); ++i)
    if (!(nodes_[i] > nodes_[i - 1])) raise(ErrorCode::InvalidArgument, "radial grid nodes must increase strictly");
}

RadialGrid RadialGrid::log_spaced(double r_min, double r_max, Index count) {
  if (!(r_min > 0.0) || !(r_max > r_min) || count < 2)
    raise(ErrorCode::InvalidArgument, "log grid needs 0 < r_min < r_max and count >= 2");
  Eigen::VectorXd v(count);
  const double lo = std::log(r_min), hi = std::log(r_max);
  for (Index i = 0; i < count; ++i) v[i] = std::exp(lo + (hi - lo) * double(i) / double(count - 1));
  v[0] = r_min;
  v[count - 1] = r_max;
  return RadialGrid(std::move(v), true);
}

RadialGrid RadialGrid::uniform(double r_max, Index count) {
  if (!(r_max > 0.0) || count < 2) raise(ErrorCode::InvalidArgument, "uniform grid needs r_max > 0 and count >= 2");
  Eigen::VectorXd v(count);
  for (Index i = 0; i < count; ++i) v[i] = r_max * double(i + 1) / double(count);
  return RadialGrid(std::move(v), false);
}

RadialGrid RadialGrid::standard(double r_max, Index count) { return log_spaced(1e-5, r_max, count); }

RadialGrid RadialGrid::with_nodes(std::span<const double> extra) const {
  std::vector<double> all(nodes_.data(), nodes_.data() + nodes_.size());
  for (double r : extra) {
    if (!(r > 0.0)) raise(ErrorCode::InvalidArgument, "inserted node must be positive");
    if (find_node(r) < 0) all.push_back(r);
  }
  std::sort(all.begin(), all.end());
  Eigen::VectorXd v = Eigen::Map<Eigen::VectorXd>(all.data(), Index(all.size()));
  return RadialGrid(std::move(v), origin_refined_);
}

RadialGrid RadialGrid::truncated(double r_end) const {
  Index n = 0;
  while (n < size() && nodes_[n] <= r_end * (1.0 + kSnap)) ++n;
  if (n < 2) raise(ErrorCode::InvalidArgument, "truncated grid would have fewer than 2 nodes");
  return RadialGrid(nodes_.head(n), origin_refined_);
}

Index RadialGrid::segment(double r) const {
  const double* b = nodes_.data();
  const double* e = b + nodes_.size();
  Index i = Index(std::upper_bound(b, e, r) - b) - 1;
  return std::clamp<Index>(i, 0, nodes_.size() - 2);
}

Index RadialGrid::find_node(double r) const {
  const double* b = nodes_.data();
  const double* e = b + nodes_.size();
  auto it = std::lower_bound(b, e, r);
  for (auto c : {it - 1, it}) {
    if (c >= b && c < e && std::abs(*c - r) <= kSnap * std::max(1.0, std::abs(r))) return Index(c - b);
  }
  return -1;
}

TailModel TailModel::attached(double at, double value) const {
  TailModel t = *this;
  t.anchor = at;
  t.amplitude = kind == Kind::compact ? 0.0 : value;
  if (kind == Kind::none) t.amplitude = 0.0;
  return t;
}

TailModel TailModel::scaled(double c) const {
  TailModel t = *this;
  t.amplitude *= c;
  return t;
}

double TailModel::operator()(double r) const {
  switch (kind) {
    case Kind::exponential:
      return amplitude * std::exp(-parameter * (r - anchor));
    case Kind::algebraic:
      return amplitude * std::pow(r / anchor, -parameter);
    case Kind::compact:
    case Kind::none:
      return 0.0;
  }
  return 0.0;
}

double TailModel::integral_from(double r) const {
  switch (kind) {
    case Kind::exponential:
      return (*this)(r) / parameter;
    case Kind::algebraic:
      if (amplitude == 0.0) return 0.0;
      if (!(parameter > 1.0)) raise(ErrorCode::NonIntegrableTail, "algebraic tail with power <= 1");
      return (*this)(r) * r / (parameter - 1.0);
    case Kind::compact:
    case Kind::none:
      return 0.0;
  }
  return 0.0;
}

double TailModel::first_moment_from(double r) const {
  switch (kind) {
    case Kind::exponential:
      return (*this)(r) / (parameter * parameter);
    case Kind::algebraic: {
      if (amplitude == 0.0) return 0.0;
      if (!(parameter > 2.0)) raise(ErrorCode::NonIntegrableTail, "first moment of algebraic tail with power <= 2");
      const double s = parameter;
      return (*this)(r) * r * r * (1.0 / (s - 2.0) - 1.0 / (s - 1.0));
    }
    case Kind::compact:
    case Kind::none:
      return 0.0;
  }
  return 0.0;
}

bool TailModel::absolutely_integrable() const {
  return kind != Kind::algebraic || parameter > 1.0 || amplitude == 0.0;
}

bool TailModel::decays() const { return kind != Kind::algebraic || parameter > 0.0 || amplitude == 0.0; }

TailModel fit_tail(const Eigen::VectorXd& r, const Eigen::VectorXd& v) {
  const Index n = r.size();
  if (v[n - 1] == 0.0) {
    Index last = n - 1;
    while (last > 0 && v[last - 1] == 0.0) --last;
    return TailModel::compact(r[last]).attached(r[n - 1], 0.0);
  }
  // window: nodes in [0.9 r_max, r_max], at least 3
  Index a = n - 1;
  while (a > 0 && (r[a - 1] >= 0.9 * r[n - 1] || n - a < 3)) --a;
  const Index mid = (a + n - 1) / 2;
  for (Index i = a; i < n; ++i)
    if (v[i] * v[n - 1] <= 0.0) return TailModel::none().attached(r[n - 1], v[n - 1]);
  const double l0 = std::log(std::abs(v[a])), l1 = std::log(std::abs(v[mid])), l2 = std::log(std::abs(v[n - 1]));
  const double exp_s1 = (l1 - l0) / (r[mid] - r[a]);
  const double exp_s2 = (l2 - l1) / (r[n - 1] - r[mid]);
  const double alg_s1 = (l1 - l0) / std::log(r[mid] / r[a]);
  const double alg_s2 = (l2 - l1) / std::log(r[n - 1] / r[mid]);
  if (!(exp_s2 < 0.0)) return TailModel::none().attached(r[n - 1], v[n - 1]);
  const double exp_var = std::abs(exp_s2 - exp_s1) / std::abs(exp_s2);
  const double alg_var = std::abs(alg_s2 - alg_s1) / std::abs(alg_s2);
  TailModel t = exp_var <= alg_var ? TailModel::exponential(-exp_s2) : TailModel::algebraic(-alg_s2);
  return t.attached(r[n - 1], v[n - 1]);
}

SampledFunction::SampledFunction(RadialGrid grid, Eigen::VectorXd values, TailModel tail)
    : SampledFunction(std::move(grid), std::move(values), tail, Options{}) {}

SampledFunction::SampledFunction(RadialGrid grid, Eigen::VectorXd values, TailModel tail, Options options)
    : grid_(std::move(grid)), values_(std::move(values)), tail_(tail), monotone_(options.monotone) {
  if (values_.size() != grid_.size()) raise(ErrorCode::InvalidArgument, "values do not match grid size");
  for (Index i = 0; i < values_.size(); ++i)
    if (!std::isfinite(values_[i])) raise(ErrorCode::InvalidArgument, "sampled values must be finite");
  if (tail_.kind == TailModel::Kind::exponential && !(tail_.parameter > 0.0))
    raise(ErrorCode::InvalidArgument, "exponential tail rate must be positive");
  if (tail_.kind == TailModel::Kind::algebraic && !(tail_.parameter > 0.0))
    raise(ErrorCode::InvalidArgument, "algebraic tail power must be positive");
  tail_ = tail_.attached(grid_.r_max(), values_[values_.size() - 1]);
  std::vector<Index> br{0};
  for (double b : options.breakpoints) {
    const Index i = grid_.find_node(b);
    if (i < 0) raise(ErrorCode::InvalidArgument, "breakpoint is not a grid node");
    br.push_back(i);
  }
  if (tail_.kind == TailModel::Kind::compact) {
    for (Index i = 0; i < grid_.size(); ++i)
      if (grid_[i] > tail_.parameter * (1.0 + kSnap) && values_[i] != 0.0)
        raise(ErrorCode::InvalidArgument, "compact tail requires exact zeros beyond the cutoff");
    const Index c = grid_.find_node(tail_.parameter);
    if (c >= 0) br.push_back(c);
  }
  br.push_back(grid_.size() - 1);
  std::sort(br.begin(), br.end());
  br.erase(std::unique(br.begin(), br.end()), br.end());
  breaks_ = std::move(br);
  build();
}

void SampledFunction::build() {
  const auto& x = grid_.nodes();
  const Index n = x.size();
  Eigen::VectorXd m(n);
  coeffs_.resize(n - 1, 4);
  for (std::size_t p = 0; p + 1 < breaks_.size(); ++p) {
    const Index b = breaks_[p], e = breaks_[p + 1];
    spline_slopes(x, values_, b, e, m);
    if (monotone_) limit_slopes(x, values_, b, e, m);
    for (Index i = b; i < e; ++i) {
      const double h = x[i + 1] - x[i];
      const double d = (values_[i + 1] - values_[i]) / h;
      const double ml = m[i];
      const double mr = m[i + 1];
      coeffs_(i, 0) = values_[i];
      coeffs_(i, 1) = ml;
      coeffs_(i, 2) = (3.0 * d - 2.0 * ml - mr) / h;
      coeffs_(i, 3) = (ml + mr - 2.0 * d) / (h * h);
    }
  }

  head_ = {};
  const double v0 = values_[0], v1 = values_[1];
  if (v0 != 0.0 && v0 * v1 > 0.0) {
    const double alpha = std::log(v1 / v0) / std::log(x[1] / x[0]);
    if (alpha < -0.05) {
      head_.power_law = true;
      head_.exponent = alpha;
      head_.coefficient = v0 / std::pow(x[0], alpha);
    }
  }
}

std::array<double, 4> SampledFunction::segment(Index i) const {
  return {coeffs_(i, 0), coeffs_(i, 1), coeffs_(i, 2), coeffs_(i, 3)};
}

double SampledFunction::eval_segment(Index i, double r) const {
  const double t = r - grid_[i];
  return coeffs_(i, 0) + t * (coeffs_(i, 1) + t * (coeffs_(i, 2) + t * coeffs_(i, 3)));
}

double SampledFunction::operator()(double r) const {
  if (r > grid_.r_max()) return tail_(r);
  if (r < grid_.r_min()) {
    if (head_.power_law) return head_.coefficient * std::pow(r, head_.exponent);
    return eval_segment(0, r);
  }
  return eval_segment(grid_.segment(r), r);
}

double SampledFunction::derivative(double r) const {
  if (r > grid_.r_max()) {
    switch (tail_.kind) {
      case TailModel::Kind::exponential:
        return -tail_.parameter * tail_(r);
      case TailModel::Kind::algebraic:
        return -tail_.parameter * tail_(r) / r;
      default:
        return 0.0;
    }
  }
  if (r < grid_.r_min() && head_.power_law) return head_.coefficient * head_.exponent * std::pow(r, head_.exponent - 1.0);
  const Index i = grid_.segment(r);
  const double t = r - grid_[i];
  return coeffs_(i, 1) + t * (2.0 * coeffs_(i, 2) + 3.0 * t * coeffs_(i, 3));
}

std::vector<double> SampledFunction::breakpoint_radii() const {
  std::vector<double> out;
  for (std::size_t p = 1; p + 1 < breaks_.size(); ++p) out.push_back(grid_[breaks_[p]]);
  return out;
}

SampledFunction SampledFunction::scaled(double c) const {
  SampledFunction out = *this;
  out.values_ *= c;
  out.coeffs_ *= c;
  out.tail_ = tail_.scaled(c);
  out.head_.coefficient *= c;
  if (c == 0.0) out.head_ = {};
  return out;
}

SampledFunction SampledFunction::resampled(const RadialGrid& grid) const {
  Eigen::VectorXd v(grid.size());
  for (Index i = 0; i < grid.size(); ++i) v[i] = (*this)(grid[i]);
  Options opt;
  opt.monotone = monotone_;
  for (double b : breakpoint_radii())
    if (grid.find_node(b) >= 0) opt.breakpoints.push_back(b);
  TailModel t = tail_;
  if (t.kind == TailModel::Kind::compact && grid.r_max() < t.parameter) t = fit_tail(grid.nodes(), v);
  return SampledFunction(grid, std::move(v), t, std::move(opt));
}

namespace {

TailModel merge_tails(double a, const TailModel& f, double b, const TailModel& g) {
  using K = TailModel::Kind;
  if (a == 0.0) return g;
  if (b == 0.0) return f;
  if (f.kind == g.kind && (f.kind == K::none || std::abs(f.parameter - g.parameter) <= 1e-12 * std::abs(f.parameter)))
    return f;
  if (f.kind == K::compact && g.kind == K::compact) return TailModel::compact(std::max(f.parameter, g.parameter));
  if (f.kind == K::compact || f.kind == K::none) return g;
  if (g.kind == K::compact || g.kind == K::none) return f;
  // slower decay dominates
  if (f.kind == K::algebraic && g.kind == K::exponential) return f;
  if (g.kind == K::algebraic && f.kind == K::exponential) return g;
  return f.parameter < g.parameter ? f : g;
}

std::vector<double> merged_breaks(const SampledFunction& f, const SampledFunction& g) {
  auto out = f.breakpoint_radii();
  for (double r : g.breakpoint_radii()) out.push_back(r);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

SampledFunction combine(double a, const SampledFunction& f, double b, const SampledFunction& g) {
  if (f.grid().nodes().size() != g.grid().nodes().size() || f.grid().nodes() != g.grid().nodes())
    raise(ErrorCode::InvalidArgument, "combine requires a shared grid");
  SampledFunction::Options opt;
  opt.monotone = f.monotone() && g.monotone();
  opt.breakpoints = merged_breaks(f, g);
  return SampledFunction(f.grid(), a * f.values() + b * g.values(), merge_tails(a, f.tail(), b, g.tail()), opt);
}

SampledFunction product(const SampledFunction& f, const SampledFunction& g) {
  if (f.grid().nodes().size() != g.grid().nodes().size() || f.grid().nodes() != g.grid().nodes())
    raise(ErrorCode::InvalidArgument, "product requires a shared grid");
  SampledFunction::Options opt;
  opt.breakpoints = merged_breaks(f, g);
  Eigen::VectorXd v = f.values().cwiseProduct(g.values());
  using K = TailModel::Kind;
  TailModel t;
  const auto& tf = f.tail();
  const auto& tg = g.tail();
  if (tf.kind == K::compact || tg.kind == K::compact)
    t = TailModel::compact(std::min(tf.kind == K::compact ? tf.parameter : 1e300, tg.kind == K::compact ? tg.parameter : 1e300));
  else if (tf.kind == K::exponential && tg.kind == K::exponential)
    t = TailModel::exponential(tf.parameter + tg.parameter);
  else if (tf.kind == K::algebraic && tg.kind == K::algebraic)
    t = TailModel::algebraic(tf.parameter + tg.parameter);
  else if (tf.kind == K::exponential || tg.kind == K::exponential)
    t = fit_tail(f.grid().nodes(), v);
  else
    t = fit_tail(f.grid().nodes(), v);
  if (t.kind == K::compact && t.parameter > f.grid().r_max()) t = TailModel::compact(f.grid().r_max());
  return SampledFunction(f.grid(), std::move(v), t, opt);
}

ShapeFlags shape_flags(const SampledFunction& f, double tol, std::span<const double> skip_sites) {
  const auto& x = f.grid().nodes();
  const auto& v = f.values();
  const Index n = v.size();
  ShapeFlags s;
  const double scale = std::max(v.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  const double floor = tol * scale;
  std::vector<bool> skip(n, false);
  for (double site : skip_sites) {
    const Index c = f.grid().segment(site);
    for (Index j = std::max<Index>(0, c - 2); j <= std::min(n - 1, c + 3); ++j) skip[j] = true;
  }
  s.min_value = v.minCoeff();
  s.positive = s.min_value > -floor;
  s.strictly_positive = s.min_value > 0.0;
  s.nonincreasing = true;
  s.strictly_decreasing_on_support = true;
  s.max_first_difference = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i + 1 < n; ++i) {
    const double d = v[i + 1] - v[i];
    s.max_first_difference = std::max(s.max_first_difference, d / scale);
    if (d > floor) s.nonincreasing = false;
    if (std::abs(v[i]) > floor && !(d < 0.0)) s.strictly_decreasing_on_support = false;
  }
  if (!s.nonincreasing) s.strictly_decreasing_on_support = false;
  s.convex = true;
  s.min_second_difference = std::numeric_limits<double>::infinity();
  for (Index i = 1; i + 1 < n; ++i) {
    if (skip[i]) continue;
    const double h0 = x[i] - x[i - 1], h1 = x[i + 1] - x[i];
    const double d2 = ((v[i + 1] - v[i]) / h1 - (v[i] - v[i - 1]) / h0) * 0.5 * (h0 + h1);
    s.min_second_difference = std::min(s.min_second_difference, d2 / scale);
    if (d2 < -floor) s.convex = false;
  }
  return s;
}

}  // namespace bicsep
