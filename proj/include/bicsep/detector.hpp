#pragma once

#include "bicsep/formfactor.hpp"
#include "bicsep/local_potential.hpp"
#include "bicsep/quadrature.hpp"
#include "bicsep/transforms.hpp"
#include "bicsep/verdict.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace bicsep {

// Linear spacing up to linear_to, then geometric steps of ratio up to p_max.
Eigen::VectorXd scan_momenta(double step, double linear_to, double ratio, double p_max);

// U~ and |F|^2 sampled on a momentum grid, plus pointwise evaluation of U~ for root refinement.
struct Spectrum {
  TransformTable u_tilde;
  Eigen::VectorXd weight;  // |F(p)|^2 (ones for V = 0)
  std::function<double(double)> evaluate;
  bool unit_weight = true;

  // U~^2 p^2 / |F|^2 as a function of p
  SampledFunction dispersion_numerator() const;
};

struct SpectrumOptions {
  double step = 0.01;        // linear momentum step
  double linear_to = 40.0;
  double ratio = 1.02;
  double p_max = 4000.0;     // V = 0
  double p_max_local = 200.0;
  double step_local = 0.02;
};

Spectrum spectrum(const SampledFunction& u, const LocalPotential* v, const SpectrumOptions& options = {});

struct DispersionCurve {
  int epsilon = 1;
  Eigen::VectorXd momenta;
  Eigen::VectorXd values;
  bool unit_weight = true;
};

// D(k) = eps + (2/pi) P int U~^2 p^2 / ((p^2 - k^2) |F|^2) dp
double dispersion_at(const SampledFunction& numerator, int epsilon, double k, const PrincipalValueOptions& pv = {});
DispersionCurve dispersion(const Spectrum& s, int epsilon, const Eigen::VectorXd& momenta,
                           const PrincipalValueOptions& pv = {});

struct Zero {
  double k = 0.0;
  double lo = 0.0, hi = 0.0;  // bracket
  double value = 0.0;         // U~(k)
  bool double_zero = false;
};

struct ZeroOptions {
  double root_tol = 1e-8;     // |U~| relative to max |U~|
  double touch_ratio = 1e-3;  // candidate double zero when a local minimum of |U~| is below this fraction
  double k_min = 0.0;
  double k_max = 40.0;
};

std::vector<Zero> find_zeros(const TransformTable& t, const std::function<double(double)>& evaluate,
                             const ZeroOptions& options = {});

struct EmbeddedState {
  double k = 0.0;
  double u_tilde = 0.0;
  double dispersion = 0.0;
};

struct DetectOptions {
  double k_max = 40.0;
  double k_limit = 320.0;
  double ceiling_tol = 0.1;
  double match_tol = 1e-6;  // scaled by 1 + |eps|
  double scan_step = 0.25;
  ZeroOptions zeros;
  SpectrumOptions spectrum;
  PrincipalValueOptions pv;
};

struct DetectionReport {
  int epsilon = 1;
  double k_ceiling = 0.0;
  std::vector<Zero> zeros;
  std::vector<double> zero_dispersion;
  std::vector<EmbeddedState> embedded;
  DispersionCurve curve;
  TransformTable u_tilde;
  bool unit_weight = true;
};

DetectionReport detect(const SampledFunction& u, const LocalPotential* v, int epsilon, const DetectOptions& options = {});
DetectionReport detect(const Spectrum& s, int epsilon, const DetectOptions& options = {});

// A with D(k0) = 0 for U = A * shape, or nullopt when no real A exists (including D(k0) independent of A).
struct EngineeredAmplitude {
  double amplitude = 0.0;
  double integral = 0.0;  // (2/pi) P-integral for the unit-amplitude shape
};
std::optional<EngineeredAmplitude> solve_engineered_amplitude(const Spectrum& unit_shape, int epsilon, double k0,
                                                              double degenerate_tol = 1e-8);

struct CosineCheck {
  double k = 0.0;
  double direct = 0.0;         // P int U~^2 p^2 / (p^2 - k^2)
  double literal_product = 0.0;  // (pi/2) U~_c W~_c
  double split = 0.0;          // two-term form
  double omega = 0.0;          // int omega cos kr
};

struct CosineRepresentation {
  SampledFunction omega;
  double omega_l1 = 0.0;
  std::vector<CosineCheck> checks;
  double max_corrected_mismatch = 0.0;
  double max_literal_mismatch = 0.0;
};

// Throws IdentityMismatch when the direct, split and omega values disagree beyond tol.
CosineRepresentation cosine_representation(const SampledFunction& u, const std::vector<double>& ks, double tol = 1e-6,
                                           const SpectrumOptions& options = {});

struct Certificate {
  std::string theorem;
  bool passed = false;
  bool degenerate = false;
  std::string warning;
  std::vector<Condition> conditions;
};

Certificate certify_theorem_A(const SampledFunction& u, double tol = 1e-9);

struct TheoremBOptions {
  double residual_tol = 1e-6;
  double sign_tol = 1e-6;  // recovered g >= -sign_tol * scale
};

Certificate certify_theorem_B(const FormFactor& u, const LocalPotential& v, const TheoremBOptions& options = {});

}  // namespace bicsep
