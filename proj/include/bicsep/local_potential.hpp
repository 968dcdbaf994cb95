#pragma once

#include "bicsep/grid.hpp"
#include "bicsep/transforms.hpp"

#include <optional>
#include <span>

namespace bicsep {

// Nonnegative local potential with r V integrable.
class LocalPotential {
 public:
  explicit LocalPotential(SampledFunction profile);

  static LocalPotential zero(const RadialGrid& grid);

  const SampledFunction& profile() const noexcept { return profile_; }
  double rV_l1() const noexcept { return rV_l1_; }
  double operator()(double r) const { return is_zero_ ? 0.0 : profile_(r); }
  bool is_zero() const noexcept { return is_zero_; }
  const RadialGrid& grid() const noexcept { return profile_.grid(); }

  // V frozen at V(r_eps) below r_eps; r_eps becomes a grid node and breakpoint.
  LocalPotential regularized(double r_eps) const;

  // Radius beyond which V is negligible (|V| r^2 below a floor), or r_max.
  double effective_support(double floor = 1e-12) const;

 private:
  SampledFunction profile_;
  double rV_l1_ = 0.0;
  bool is_zero_ = false;
};

struct RegularSolution {
  double k = 0.0;
  RadialGrid grid;
  Eigen::VectorXd phi;
  Eigen::VectorXd dphi;

  SampledFunction as_function() const;
};

struct OdeOptions {
  double rtol = 1e-12;
  double atol = 1e-14;
  int max_steps_per_segment = 200000;
};

// phi'' + k^2 phi = V phi with phi(0) = 0, phi'(0) = 1 on V's grid.
RegularSolution solve_regular(const LocalPotential& v, double k, const OdeOptions& options = {});

struct ZeroEnergyPair {
  SampledFunction phi0;
  SampledFunction chi0;
  Eigen::VectorXd dphi0;
  Eigen::VectorXd dchi0;
  double A = 1.0;
  double B = 0.0;

  // phi0' chi0 - phi0 chi0' at every node
  Eigen::VectorXd wronskian() const;
};

struct PairOptions {
  double window_start = 0.25;  // fit window [window_start * r_max, r_max]
  double fit_tolerance = 1e-6;
  OdeOptions ode;
};

ZeroEnergyPair zero_energy_pair(const LocalPotential& v, const PairOptions& options = {});

// Independent chi0 by integrating inward from r_max with chi = 1/A, chi' = 0.
Eigen::VectorXd chi0_inward(const LocalPotential& v, double A, const OdeOptions& options = {});

struct JostModulus {
  Eigen::VectorXd momenta;
  Eigen::VectorXd values;  // |F(k)|^2
  Eigen::VectorXd spread;  // relative disagreement between matching radii
};

struct JostOptions {
  double agreement = 1e-6;
  OdeOptions ode;
};

JostModulus jost_modulus(const LocalPotential& v, const Eigen::VectorXd& momenta, const JostOptions& options = {});

// U(k) = int U(r) phi(k, r) dr
TransformTable weighted_transform(const SampledFunction& u, const LocalPotential& v, const Eigen::VectorXd& momenta,
                                  const OdeOptions& options = {});

struct WeightedSpectrum {
  TransformTable transform;
  Eigen::VectorXd jost;  // k^2 phi^2 + phi'^2 at U's last node, i.e. |F(k)|^2 once V has died out
};

// Transform and Jost modulus from the same integration.
WeightedSpectrum weighted_spectrum(const SampledFunction& u, const LocalPotential& v, const Eigen::VectorXd& momenta,
                                   const OdeOptions& options = {});

// Sample of the potential family that makes phi0 = 2r - 1 + exp(-r) exact.
double manufactured_potential(double r);
double manufactured_phi0(double r);
LocalPotential manufactured(const RadialGrid& grid);

}  // namespace bicsep
