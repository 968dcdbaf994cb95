#pragma once

#include "bicsep/grid.hpp"
#include "bicsep/quadrature.hpp"

#include <span>
#include <vector>

namespace bicsep {

enum class TransformKind { sine, cosine, weighted, hankel };

struct TransformTable {
  TransformKind kind = TransformKind::sine;
  double order = 0.0;  // Hankel order
  Eigen::VectorXd momenta;
  Eigen::VectorXd values;

  Index size() const noexcept { return momenta.size(); }
  // Cubic interpolant over the positive momenta, algebraic tail fitted.
  SampledFunction as_function() const;
};

// Momentum grid helpers.
Eigen::VectorXd linear_momenta(double lo, double hi, Index count);

// U(p) = int U(r) sin(pr)/p dr; the p = 0 entry is int r U(r) dr.
TransformTable sine_transform(const SampledFunction& u, std::span<const double> momenta,
                              const QuadratureOptions& options = {});
TransformTable sine_transform(const SampledFunction& u, const Eigen::VectorXd& momenta,
                              const QuadratureOptions& options = {});

struct CosineTransform {
  TransformTable table;
  // Divided-difference verdict that f is bounded, convex and decreases to zero.
  bool convex_decreasing = false;
  double min_value = 0.0;
};

CosineTransform cosine_transform(const SampledFunction& f, const Eigen::VectorXd& momenta,
                                 const QuadratureOptions& options = {});

// W(r) = int_r^inf U(t) dt on U's grid.
SampledFunction tail_function(const SampledFunction& u);

struct SignedSplit {
  SampledFunction plus;
  SampledFunction minus;
};

// Positive and negative parts; interior sign changes are inserted as grid nodes.
SignedSplit signed_split(const SampledFunction& u);

// Cosine kernel omega with G(k) = int omega(r) cos(kr) dr, where G is the
// principal-value integral of U~^2 p^2/(p^2-k^2). Assembled from the signed
// parts with weights +1, +1, -2 on the (plus, plus), (minus, minus) and
// (minus, plus) kernels.
SampledFunction omega_convolution(const SignedSplit& split);

// The single-sign convolution kernel (pi/4) int a(t) [Wb(|r-t|) - Wb(r+t)] dt.
SampledFunction omega_term(const SampledFunction& a, const SampledFunction& wb, const RadialGrid& grid);

// F(k) = int f(r) sqrt(kr) J_nu(kr) dr
TransformTable hankel_transform(const SampledFunction& f, double nu, const Eigen::VectorXd& momenta,
                                const QuadratureOptions& options = {});

}  // namespace bicsep
