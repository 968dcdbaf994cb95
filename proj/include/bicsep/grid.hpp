#pragma once

#include <Eigen/Core>

#include <array>
#include <span>
#include <vector>

namespace bicsep {

using Index = Eigen::Index;

// Strictly increasing positive nodes on the half-line.
class RadialGrid {
 public:
  RadialGrid() = default;
  explicit RadialGrid(Eigen::VectorXd nodes, bool origin_refined = false);

  static RadialGrid log_spaced(double r_min, double r_max, Index count);
  // count nodes h, 2h, ..., r_max
  static RadialGrid uniform(double r_max, Index count);
  // Default radial grid: 2000 log-spaced nodes on [1e-5, 40].
  static RadialGrid standard(double r_max = 40.0, Index count = 2000);

  // Returns a grid with the extra points merged in; points within a relative
  // 1e-12 of an existing node snap onto it.
  RadialGrid with_nodes(std::span<const double> extra) const;
  RadialGrid truncated(double r_end) const;

  const Eigen::VectorXd& nodes() const noexcept { return nodes_; }
  double operator[](Index i) const { return nodes_[i]; }
  Index size() const noexcept { return nodes_.size(); }
  double r_min() const { return nodes_[0]; }
  double r_max() const { return nodes_[nodes_.size() - 1]; }
  bool origin_refined() const noexcept { return origin_refined_; }

  // Segment i such that nodes[i] <= r < nodes[i+1], clamped to [0, size-2].
  Index segment(double r) const;
  // Node index within a relative 1e-12 of r, or -1.
  Index find_node(double r) const;

 private:
  Eigen::VectorXd nodes_;
  bool origin_refined_ = false;
};

struct TailModel {
  enum class Kind { none, exponential, algebraic, compact };

  Kind kind = Kind::none;
  double parameter = 0.0;  // rate a, power s, or cutoff R
  double amplitude = 0.0;  // value at the anchor
  double anchor = 0.0;     // radius where the model takes over

  static TailModel none() { return {}; }
  static TailModel exponential(double rate) { return {Kind::exponential, rate, 0.0, 0.0}; }
  static TailModel algebraic(double power) { return {Kind::algebraic, power, 0.0, 0.0}; }
  static TailModel compact(double cutoff) { return {Kind::compact, cutoff, 0.0, 0.0}; }

  TailModel attached(double at, double value) const;
  TailModel scaled(double c) const;

  // Model value for r >= anchor.
  double operator()(double r) const;
  // Integral of the model over [r, inf), r >= anchor.
  double integral_from(double r) const;
  // Integral of (t - r) times the model over [r, inf).
  double first_moment_from(double r) const;
  bool absolutely_integrable() const;
  bool decays() const;
};

// Classify the far end of a sampled profile: exactly zero tail -> compact,
// otherwise whichever of exponential and algebraic decay fits the last
// nodes with the steadier local slope.
TailModel fit_tail(const Eigen::VectorXd& r, const Eigen::VectorXd& values);

struct HeadModel {
  bool power_law = false;
  double exponent = 0.0;
  double coefficient = 0.0;
};

// Piecewise-cubic profile on a radial grid with an analytic tail.
class SampledFunction {
 public:
  struct Options {
    bool monotone = false;
    std::vector<double> breakpoints;  // must be nodes; derivative may jump there
  };

  SampledFunction() = default;
  SampledFunction(RadialGrid grid, Eigen::VectorXd values, TailModel tail = {});
  SampledFunction(RadialGrid grid, Eigen::VectorXd values, TailModel tail, Options options);

  template <class F>
  static SampledFunction sample(const RadialGrid& grid, F&& f, TailModel tail = {}, Options options = {}) {
    Eigen::VectorXd v(grid.size());
    for (Index i = 0; i < grid.size(); ++i) v[i] = f(grid[i]);
    return SampledFunction(grid, std::move(v), tail, std::move(options));
  }
  // Sample and classify the tail automatically.
  template <class F>
  static SampledFunction sample_fitted(const RadialGrid& grid, F&& f, Options options = {}) {
    Eigen::VectorXd v(grid.size());
    for (Index i = 0; i < grid.size(); ++i) v[i] = f(grid[i]);
    auto tail = fit_tail(grid.nodes(), v);
    return SampledFunction(grid, std::move(v), tail, std::move(options));
  }

  double operator()(double r) const;
  double derivative(double r) const;
  // Polynomial coefficients on segment i in x = r - r_i.
  std::array<double, 4> segment(Index i) const;
  double eval_segment(Index i, double r) const;

  const RadialGrid& grid() const noexcept { return grid_; }
  const Eigen::VectorXd& values() const noexcept { return values_; }
  const TailModel& tail() const noexcept { return tail_; }
  const HeadModel& head() const noexcept { return head_; }
  const std::vector<Index>& breakpoints() const noexcept { return breaks_; }
  std::vector<double> breakpoint_radii() const;
  bool monotone() const noexcept { return monotone_; }
  Index size() const noexcept { return grid_.size(); }

  SampledFunction scaled(double c) const;
  // Same profile resampled through the interpolant on another grid.
  SampledFunction resampled(const RadialGrid& grid) const;

 private:
  void build();

  RadialGrid grid_;
  Eigen::VectorXd values_;
  TailModel tail_;
  HeadModel head_;
  std::vector<Index> breaks_;
  bool monotone_ = false;
  Eigen::Matrix<double, Eigen::Dynamic, 4> coeffs_;
};

// Evaluator for monotone-ish query sequences; walks from the last segment.
class SegmentCursor {
 public:
  explicit SegmentCursor(const SampledFunction& f) : f_(&f), last_(f.grid().size() - 2) {}

  double operator()(double r) {
    const auto& x = f_->grid().nodes();
    if (r > x[x.size() - 1] || r < x[0]) return (*f_)(r);
    while (i_ > 0 && r < x[i_]) --i_;
    while (i_ < last_ && r >= x[i_ + 1]) ++i_;
    return f_->eval_segment(i_, r);
  }

 private:
  const SampledFunction* f_;
  Index last_;
  Index i_ = 0;
};

// a*f + b*g on a shared grid; tails must be compatible.
SampledFunction combine(double a, const SampledFunction& f, double b, const SampledFunction& g);

// Nodewise product; tail chosen from the faster-decaying factor when both decay.
SampledFunction product(const SampledFunction& f, const SampledFunction& g);

// Shape diagnostics from divided differences.
struct ShapeFlags {
  bool positive = false;     // all values > -tol
  bool strictly_positive = false;
  bool nonincreasing = false;
  bool strictly_decreasing_on_support = false;
  bool convex = false;
  double min_value = 0.0;
  double max_first_difference = 0.0;
  double min_second_difference = 0.0;
};

ShapeFlags shape_flags(const SampledFunction& f, double tol = 1e-9, std::span<const double> skip_sites = {});

}  // namespace bicsep
