#pragma once

#include "bicsep/grid.hpp"
#include "bicsep/local_potential.hpp"
#include "bicsep/verdict.hpp"

#include <span>
#include <string>
#include <vector>

namespace bicsep {

struct KernelOptions {
  double R = 10.0;         // triangle extent in r
  double h_max = 0.025;    // node spacing away from the origin
  double h_min = 2.5e-5;   // node spacing at the origin
  double grading = 64.0;   // transition length in node counts
  double tol = 1e-10;      // sup-norm change that stops the iteration
  int max_iterations = 50;
  bool richardson = true;  // combine node sets with steps 1 and 1/2
};

// Transformation kernel K(r, x) on 0 <= x <= r <= R, stored in rotated
// coordinates s = (r + x)/2, u = (r - x)/2 as H(s, u) on a graded node set.
class KernelTable {
 public:
  const Eigen::VectorXd& nodes() const noexcept { return t_; }
  // H at node pair (a, b); extended by H(b, a) = -H(a, b) across the diagonal.
  double node_value(Index a, Index b) const { return a >= b ? h_(a, b) : -h_(b, a); }
  bool in_domain(Index a, Index b) const;
  // H(s, u) by bicubic interpolation.
  double rotated(double s, double u) const;
  // K(r, x)
  double operator()(double r, double x) const;

  double R() const noexcept { return R_; }
  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }
  double richardson_change() const noexcept { return richardson_change_; }
  // integral of u V(u) over (0, inf)
  double first_moment() const noexcept { return c_; }
  // integral of V over (0, t) at the nodes
  const Eigen::VectorXd& potential_integral() const noexcept { return phi1_; }
  double potential_integral(double t) const;
  const LocalPotential& potential() const noexcept { return v_; }

 private:
  friend KernelTable solve_kernel(const LocalPotential&, const KernelOptions&);
  explicit KernelTable(LocalPotential v) : v_(std::move(v)) {}

  LocalPotential v_;
  Eigen::VectorXd t_;
  Eigen::MatrixXd h_;
  std::vector<Index> bmax_;
  Eigen::VectorXd phi1_;
  double R_ = 0.0;
  double R_ext_ = 0.0;
  double c_ = 0.0;
  int iterations_ = 0;
  double residual_ = 0.0;
  double richardson_change_ = 0.0;
};

KernelTable solve_kernel(const LocalPotential& v, const KernelOptions& options = {});

// phi(k, r) = sin(kr)/k + int_0^r K(r, x) sin(kx)/k dx at the given radii (<= R).
RegularSolution phi_via_kernel(const KernelTable& k, double momentum, const RadialGrid& radii);

struct FProfile {
  SampledFunction f;
  bool positive = false;
  bool l1_near_origin = false;
  bool decreasing = false;
  bool vanishing_at_infinity = false;
  bool convex = false;
  double tail_bound = 0.0;
};

// Flags from divided differences of the sampled values.
FProfile make_profile(SampledFunction f, double tol = 1e-9);

struct FTransformOptions {
  double tail_tolerance = 1e-6;  // relative to max |U|
  double flag_tolerance = 1e-9;
};

// f(x) = U(x) + int_x^R K(r, x) U(r) dr on U's nodes up to R.
FProfile f_transform(const KernelTable& k, const SampledFunction& u, const FTransformOptions& options = {});

// Positivity, integrability near 0, steady decrease and decay of f.
Verdict check_requirements(const FProfile& f);

struct KernelDiagnostics {
  double bound_margin = 0.0;      // min over nodes of bound - K (>= 0 when the bound holds)
  bool bound_holds = false;
  bool nonnegative = false;
  double max_axis_value = 0.0;    // max |K(r, 0)|
  double diagonal_error = 0.0;    // max |dH/ds(s, 0) - V(s)/2| relative to max V/2 on the checked range
};

KernelDiagnostics kernel_diagnostics(const KernelTable& k);

}  // namespace bicsep
