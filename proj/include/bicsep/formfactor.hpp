#pragma once

#include "bicsep/grid.hpp"
#include "bicsep/local_potential.hpp"

#include <optional>
#include <vector>

namespace bicsep {

struct DeltaSource {
  double lambda = 1.0;
  double r0 = 1.0;
};

// g = smooth part + sum of lambda_i delta(r - r_i).
struct SourceFunction {
  std::optional<SampledFunction> smooth;
  std::vector<DeltaSource> deltas;

  bool empty() const { return !smooth && deltas.empty(); }
  // Throws ValidationError for negative samples or non-positive weights/sites.
  void validate() const;
  std::vector<double> sites() const;
};

struct SourceIntegrability {
  bool g_l1_at_infinity = true;
  bool rg_l1_at_infinity = true;
  bool r2g_l1_at_infinity = true;
  bool r3g_l1_at_infinity = true;
  bool r2g_l1_near_origin = true;
};

SourceIntegrability source_integrability(const SourceFunction& src);

struct FormFactorFlags {
  bool positive = false;
  bool decreasing = false;
  bool convex = false;
  bool vanishes_at_infinity = false;
  bool l1_near_origin = false;
  bool l1_at_infinity = false;
  bool rU_l1_at_infinity = false;
  bool r2U_l1_at_infinity = false;
};

enum class Provenance { user, built };

class FormFactor {
 public:
  explicit FormFactor(SampledFunction u, double tol = 1e-9);
  static FormFactor built(SampledFunction u, SourceFunction src, double tol = 1e-9);

  const SampledFunction& profile() const noexcept { return u_; }
  Provenance provenance() const noexcept { return provenance_; }
  const std::optional<SourceFunction>& source() const noexcept { return source_; }
  const FormFactorFlags& flags() const noexcept { return flags_; }
  // radii where U' may jump (delta sites)
  std::vector<double> kink_sites() const;

 private:
  SampledFunction u_;
  Provenance provenance_ = Provenance::user;
  std::optional<SourceFunction> source_;
  FormFactorFlags flags_;
};

FormFactorFlags measure_flags(const SampledFunction& u, double tol = 1e-9, std::span<const double> kinks = {});

struct BuildOptions {
  double positivity_tol = 1e-9;  // relative to max |U|
};

// U(r) = int_r^inf [chi0(r) phi0(t) - phi0(r) chi0(t)] g(t) dt, deltas included.
FormFactor build_from_source(const ZeroEnergyPair& pair, const SourceFunction& src, const BuildOptions& options = {});

// Same U from the nested form phi0(r) int_r^inf P(u)/phi0(u)^2 du with P(u) = int_u^inf phi0 g.
Eigen::VectorXd build_nested(const ZeroEnergyPair& pair, const SourceFunction& src, const RadialGrid& grid);

// int_0^inf phi0 g plus delta terms; the value U(0) must take.
double origin_limit(const ZeroEnergyPair& pair, const SourceFunction& src);

struct OdeResidualReport {
  double max_residual = 0.0;  // |U'' - V U - g| / (max|U| + |V U| + |g|)
  double at = 0.0;
  Index checked = 0;
  bool passed = false;
};

OdeResidualReport ode_residual(const FormFactor& u, const LocalPotential& v, const SourceFunction& src,
                               double tol = 1e-6);
// Throws ResidualTooLarge when the scaled residual exceeds tol.
OdeResidualReport verify_ode_identity(const FormFactor& u, const LocalPotential& v, const SourceFunction& src,
                                      double tol = 1e-6);

struct LedgerEntry {
  std::string hypothesis;
  std::string conclusion;
  bool hypothesis_holds = false;
  bool predicted = false;  // conclusion asserted (hypothesis holds)
  bool measured = false;
  bool consistent() const { return !predicted || measured; }
};

struct IntegrabilityLedger {
  std::vector<LedgerEntry> literal;    // as printed: t^a g -> r^{a-1} U
  std::vector<LedgerEntry> corrected;  // t^{a+1} g -> r^{a-1} U
  bool literal_consistent() const;
  bool corrected_consistent() const;
};

IntegrabilityLedger integrability_ledger(const SourceFunction& src, const FormFactor& built);

// Second derivative at node i from up to five neighbouring nodes (Fornberg weights).
double second_derivative(const Eigen::VectorXd& x, const Eigen::VectorXd& v, Index i);

}  // namespace bicsep
