#include "bicsep/bessel.hpp"

#include "bicsep/errors.hpp"
#include "bicsep/quadrature.hpp"

#include <cmath>
#include <numbers>

namespace bicsep {

namespace {

constexpr double kPi = std::numbers::pi;

bool half_integer(double nu) {
  const double t = nu - 0.5;
  return t >= 0.0 && t == std::floor(t) && t < 64.0;
}

// Ascending series sum_m (-+1)^m (x/2)^{2m+nu} / (m! Gamma(m+nu+1)).
double ascending(double nu, double x, double sign) {
  const double q = 0.25 * x * x;
  double term = std::exp(nu * std::log(0.5 * x) - std::lgamma(nu + 1.0));
  double sum = term;
  for (int m = 1; m < 500; ++m) {
    term *= sign * q / (m * (m + nu));
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return sum;
}

// Hankel asymptotic P, Q sums for J.
double j_asymptotic(double nu, double x) {
  const double mu = 4.0 * nu * nu;
  double a = 1.0;  // a_k / x^k
  double P = 1.0, Q = 0.0;
  double prev = 1e300;
  for (int k = 1; k < 60; ++k) {
    a *= (mu - (2.0 * k - 1.0) * (2.0 * k - 1.0)) / (k * 8.0 * x);
    if (std::abs(a) > prev) break;
    prev = std::abs(a);
    const int r = k % 4;  // P gets even k with sign (-1)^{k/2}, Q odd k with sign (-1)^{(k-1)/2}
    if (r == 0) P += a;
    else if (r == 2) P -= a;
    else if (r == 1) Q += a;
    else Q -= a;
    if (prev < 1e-17) break;
  }
  const double chi = x - (0.5 * nu + 0.25) * kPi;
  return std::sqrt(2.0 / (kPi * x)) * (P * std::cos(chi) - Q * std::sin(chi));
}

// Spherical j_n via closed forms and recurrence; J_{n+1/2}(x) = sqrt(2x/pi) j_n(x).
double j_half(int n, double x) {
  if (x < 0.5 + n) return ascending(n + 0.5, x, -1.0);
  double j0 = std::sin(x) / x;
  if (n == 0) return std::sqrt(2.0 * x / kPi) * j0;
  double j1 = std::sin(x) / (x * x) - std::cos(x) / x;
  for (int l = 1; l < n; ++l) {
    const double j2 = (2.0 * l + 1.0) / x * j1 - j0;
    j0 = j1;
    j1 = j2;
  }
  return std::sqrt(2.0 * x / kPi) * j1;
}

// Schlafli integral; bounded integrands, so no cancellation where the series has it.
double j_integral(double nu, double x) {
  double s = gauss_integrate([=](double t) { return std::cos(nu * t - x * std::sin(t)); }, 0.0, kPi, 32,
                             8 + int(x));
  s /= kPi;
  const double sn = std::sin(nu * kPi);
  if (sn != 0.0) {
    // e^{-x sinh t - nu t} < 1e-18 well before sinh t = 42/x
    const double T = std::asinh(42.0 / x);
    s -= sn / kPi * gauss_integrate([=](double t) { return std::exp(-x * std::sinh(t) - nu * t); }, 0.0, T, 32, 8);
  }
  return s;
}

}  // namespace

double bessel_j(double nu, double x) {
  if (nu < 0.0 || !std::isfinite(nu) || !std::isfinite(x)) raise(ErrorCode::DomainError, "J requires nu >= 0 and finite x");
  if (x < 0.0) raise(ErrorCode::DomainError, "J evaluated at negative argument");
  if (x == 0.0) return nu == 0.0 ? 1.0 : 0.0;
  if (half_integer(nu)) return j_half(int(nu - 0.5), x);
  if (x < 4.0) return ascending(nu, x, -1.0);
  if (x < 17.0 + 1.5 * nu) return j_integral(nu, x);
  return j_asymptotic(nu, x);
}

double bessel_i(double nu, double x) {
  if (nu < 0.0 || !std::isfinite(nu) || !std::isfinite(x)) raise(ErrorCode::DomainError, "I requires nu >= 0 and finite x");
  if (x < 0.0) raise(ErrorCode::DomainError, "I evaluated at negative argument");
  if (x == 0.0) return nu == 0.0 ? 1.0 : 0.0;
  if (x <= 30.0 + nu * nu) return ascending(nu, x, 1.0);
  const double mu = 4.0 * nu * nu;
  double a = 1.0, sum = 1.0, prev = 1e300;
  for (int k = 1; k < 60; ++k) {
    a *= -(mu - (2.0 * k - 1.0) * (2.0 * k - 1.0)) / (k * 8.0 * x);
    if (std::abs(a) > prev) break;
    prev = std::abs(a);
    sum += a;
    if (prev < 1e-17) break;
  }
  return std::exp(x) / std::sqrt(2.0 * kPi * x) * sum;
}

double bessel_k(double nu, double x) {
  if (nu < 0.0 || !std::isfinite(nu) || !(x > 0.0) || !std::isfinite(x))
    raise(ErrorCode::DomainError, "K requires nu >= 0 and x > 0");
  if (x > 700.0) return 0.0;
  // K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt; the trapezoid rule is
  // spectrally accurate for this analytic, rapidly decaying integrand.
  const double h = 0.05;
  double sum = 0.5 * std::exp(-x);
  for (int j = 1; j < 100000; ++j) {
    const double t = j * h;
    const double e = -x * std::cosh(t) + nu * t;
    const double term = 0.5 * (std::exp(e) + std::exp(-x * std::cosh(t) - nu * t));
    sum += term;
    if (x * std::cosh(t) > 745.0 || (term < 1e-18 * sum && x * std::sinh(t) > nu)) break;
  }
  return h * sum;
}

double bessel(BesselKind kind, double nu, double x) {
  switch (kind) {
    case BesselKind::J:
      return bessel_j(nu, x);
    case BesselKind::I:
      return bessel_i(nu, x);
    case BesselKind::K:
      return bessel_k(nu, x);
  }
  return 0.0;
}

}  // namespace bicsep
