#pragma once

#include "bicsep/grid.hpp"

#include <functional>
#include <span>
#include <vector>

namespace bicsep {

struct GaussRule {
  std::vector<double> x;  // on [-1, 1]
  std::vector<double> w;
};

// Cached Gauss-Legendre rule, 1 <= n <= 128.
const GaussRule& gauss_legendre(int n);

// Integral of f over [a, b] with an n-point rule on `pieces` equal subintervals.
double gauss_integrate(const std::function<double(double)>& f, double a, double b, int n = 16, int pieces = 1);

struct OscillatoryWeight {
  enum class Kind { none, sine, cosine };
  Kind kind = Kind::none;
  double frequency = 0.0;

  static OscillatoryWeight sine(double p) { return {Kind::sine, p}; }
  static OscillatoryWeight cosine(double p) { return {Kind::cosine, p}; }
};

struct QuadratureOptions {
  double abs_tol = 1e-10;
  int max_tail_cycles = 4000;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
};

// Integral over [0, inf) of f times the optional weight, tail analytic.
// The error estimate compares against the same rule on every other node.
QuadratureResult integrate_semi_infinite(const SampledFunction& f, OscillatoryWeight weight = {},
                                         const QuadratureOptions& options = {});

// Value only, without the error estimate pass.
double integrate(const SampledFunction& f, OscillatoryWeight weight = {}, const QuadratureOptions& options = {});

// Integral of the tail model over [anchor, inf) against the weight.
double tail_integral(const TailModel& tail, OscillatoryWeight weight = {}, const QuadratureOptions& options = {});

// Integral over [0, inf) of f(r) w(r); w smooth with the given asymptotic
// angular frequency (0 when not oscillatory). head_power is the power of r
// that w behaves like at the origin.
double integrate_weighted(const SampledFunction& f, const std::function<double(double)>& w, double frequency,
                          double head_power = 0.0, const QuadratureOptions& options = {});

// Exact interpolant integral over [a, b] inside the grid span (head model below r_min).
double integrate_interval(const SampledFunction& f, double a, double b);

// Integral of f over [0, r_i] at every node.
Eigen::VectorXd cumulative_from_origin(const SampledFunction& f);
// Integral of f over [r_i, inf) at every node, tail included.
Eigen::VectorXd cumulative_to_infinity(const SampledFunction& f);

// Head integral over [0, r_min] of f(r) r^extra s(r) with s smooth.
double head_integral(const SampledFunction& f, const std::function<double(double)>& smooth, double extra_power = 0.0);

// Wynn epsilon extrapolation of a sequence of partial sums.
struct Extrapolation {
  double value = 0.0;
  double error = 0.0;
};
Extrapolation wynn_epsilon(std::span<const double> partial_sums);

// Integral over [start, inf) of g where g oscillates with half period pi/frequency;
// sums between consecutive zeros of the phase and accelerates.
Extrapolation oscillatory_tail(const std::function<double(double)>& g, double start, double frequency, double phase = 0.0,
                               const QuadratureOptions& options = {});

struct PrincipalValueOptions {
  double delta = 0.0;  // 0 selects min(0.1, k/2)
  double tol = 1e-8;
  bool check_smoothness = true;
};

// P-integral over [0, inf) of h(p)/(p^2 - k^2). The sampled h lives on a momentum grid.
double principal_value(const SampledFunction& h, double k, const PrincipalValueOptions& options = {});

// P-integral over (-inf, inf) of phi(y)/(y - y0) for a callable phi that is
// smooth near y0 and whose product with 1/y is absolutely or oscillatory-integrable.
double principal_value_line(const std::function<double(double)>& phi, double y0, double frequency, double delta = 0.5,
                            const QuadratureOptions& options = {});

}  // namespace bicsep
