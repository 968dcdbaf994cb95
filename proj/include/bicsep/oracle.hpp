#pragma once

#include "bicsep/grid.hpp"
#include "bicsep/local_potential.hpp"

#include <optional>
#include <vector>

namespace bicsep {

// Smallest r with int_r^inf |U| <= fraction * int_0^inf |U|.
double effective_support(const SampledFunction& u, double fraction = 1e-4);

// -psi'' + V psi + eps U <U, psi> on a uniform Dirichlet box (0, L) with n interior nodes.
// The rank-one term is eps * (sqrt(h) U)(sqrt(h) U)^T, which keeps the matrix symmetric.
class BoxHamiltonian {
 public:
  BoxHamiltonian(Eigen::VectorXd diagonal, double off, Eigen::VectorXd w, int epsilon, double L);

  Index size() const noexcept { return diag_.size(); }
  double length() const noexcept { return L_; }
  double step() const noexcept { return L_ / double(size() + 1); }
  int epsilon() const noexcept { return eps_; }
  const Eigen::VectorXd& diagonal() const noexcept { return diag_; }
  double off_diagonal() const noexcept { return off_; }
  const Eigen::VectorXd& rank_one() const noexcept { return w_; }

  Eigen::MatrixXd dense() const;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  // Full spectrum from the dense matrix.
  Eigen::VectorXd eigenvalues() const;
  // Number of eigenvalues below x, from the inertia of the tridiagonal part plus the rank-one sign rule.
  Index count_below(double x) const;
  // Eigenvalues in [lo, hi) by bisection on count_below; same matrix, O(n) per step.
  Eigen::VectorXd eigenvalues_in(double lo, double hi) const;
  // Eigenvector for an eigenvalue of this matrix, by shifted inverse iteration.
  Eigen::VectorXd eigenvector(double lambda) const;
  double norm_estimate() const;

 private:
  Eigen::VectorXd diag_;
  double off_;
  Eigen::VectorXd w_;
  int eps_;
  double L_;
};

struct AssembleOptions {
  double support_factor = 4.0;  // L >= factor * effective support of U and V
  double resolution = 20.0;     // n >= resolution * L * k_target / pi
};

BoxHamiltonian assemble(const LocalPotential* v, const SampledFunction& u, int epsilon, double L, Index n,
                        double k_target, const AssembleOptions& options = {});

struct BoxLevel {
  double lambda = 0.0;
  double participation = 0.0;  // (sum v^2)^2 / (n sum v^4)
  double tail_mass = 0.0;      // fraction of |v|^2 beyond the support region
  double residual = 0.0;       // |H v - lambda v| / |H|
};

struct BoxResult {
  double L = 0.0;
  double window = 0.0;
  std::vector<BoxLevel> levels;    // eigenvalues inside the window
  std::optional<BoxLevel> candidate;  // most localized level in the window
};

enum class ScanVerdict { confirmed, refuted, ambiguous };

struct SpectralScan {
  double k0 = 0.0;
  double support_region = 0.0;
  std::vector<BoxResult> boxes;
  std::vector<double> drift;            // candidate shift between consecutive boxes
  std::vector<double> continuum_shift;  // k0^2 (1 - (L_i / L_{i+1})^2)
  ScanVerdict verdict = ScanVerdict::refuted;
  std::string reason;
};

struct ScanOptions {
  std::vector<double> lengths{40.0, 60.0, 80.0};
  double h = 0.0125;
  double tail_limit = 0.05;       // localized below this tail mass
  double ambiguous_limit = 0.25;  // borderline between tail_limit and this
  double drift_fraction = 0.2;    // of the continuum shift
  double support_multiple = 2.0;  // support region = multiple * effective support
  AssembleOptions assemble;
};

SpectralScan embedded_scan(const LocalPotential* v, const SampledFunction& u, int epsilon, double k0,
                           const ScanOptions& options = {});

const char* to_string(ScanVerdict v);

struct CandidateWavefunction {
  SampledFunction psi;      // normalized to int psi^2 = 1 on the grid span
  double tail_mass = 0.0;   // beyond 5x effective support
  double self_consistency = 0.0;  // eps <U, chi> - 1, zero iff D(k0) = 0
  double residual = 0.0;    // max |psi'' + k0^2 psi - eps U <U, psi>| on the grid
};

struct CandidateOptions {
  double h = 0.005;
  double tail_limit = 0.02;
  double root_tol = 1e-6;  // |U~(k0)| relative to max |U|
};

// Free standing-wave Green's function solution at k0; V = 0 only.
CandidateWavefunction candidate_wavefunction(const SampledFunction& u, int epsilon, double k0,
                                             const CandidateOptions& options = {});

}  // namespace bicsep
