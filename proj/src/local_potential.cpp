#include "bicsep/local_potential.hpp"

#include "bicsep/errors.hpp"
#include "bicsep/quadrature.hpp"
#include "ode.hpp"

#include <algorithm>
#include <cmath>

namespace bicsep {

namespace {

// Series start at r0 for phi'' = (V - k^2) phi with V ~ c r^alpha.
std::array<double, 2> series_start(const SampledFunction& v, double k, bool zero) {
  const double r0 = v.grid().r_min();
  double phi = r0 - k * k * r0 * r0 * r0 / 6.0;
  double dphi = 1.0 - 0.5 * k * k * r0 * r0;
  if (!zero) {
    double c = v.values()[0], alpha = 0.0;
    if (v.head().power_law) {
      c = v.head().coefficient;
      alpha = v.head().exponent;
    }
    phi += c * std::pow(r0, alpha + 3.0) / ((alpha + 2.0) * (alpha + 3.0));
    dphi += c * std::pow(r0, alpha + 2.0) / (alpha + 2.0);
  }
  return {phi, dphi};
}

}  // namespace

LocalPotential::LocalPotential(SampledFunction profile) : profile_(std::move(profile)) {
  const auto& v = profile_.values();
  const double scale = v.cwiseAbs().maxCoeff();
  for (Index i = 0; i < v.size(); ++i)
    if (v[i] < -1e-14 * scale) raise(ErrorCode::ValidationError, "local potential must be nonnegative");
  is_zero_ = scale == 0.0;
  if (profile_.head().power_law && !(profile_.head().exponent > -2.0))
    raise(ErrorCode::ValidationError, "r V is not integrable at the origin");
  if (!is_zero_) {
    const auto& t = profile_.tail();
    if (t.kind == TailModel::Kind::algebraic && t.amplitude != 0.0 && !(t.parameter > 2.0))
      raise(ErrorCode::ValidationError, "r V is not integrable at infinity");
    rV_l1_ = integrate_weighted(profile_, [](double r) { return r; }, 0.0, 1.0);
  }
}

LocalPotential LocalPotential::zero(const RadialGrid& grid) {
  return LocalPotential(SampledFunction(grid, Eigen::VectorXd::Zero(grid.size()), TailModel::compact(grid.r_min())));
}

LocalPotential LocalPotential::regularized(double r_eps) const {
  const double frozen = profile_(r_eps);
  const std::array<double, 1> extra{r_eps};
  const RadialGrid g = grid().with_nodes(extra);
  Eigen::VectorXd v(g.size());
  for (Index i = 0; i < g.size(); ++i) v[i] = g[i] <= r_eps ? frozen : profile_(g[i]);
  SampledFunction::Options opt;
  opt.breakpoints = {g[g.find_node(r_eps)]};
  for (double b : profile_.breakpoint_radii()) opt.breakpoints.push_back(b);
  std::sort(opt.breakpoints.begin(), opt.breakpoints.end());
  return LocalPotential(SampledFunction(g, std::move(v), profile_.tail(), opt));
}

double LocalPotential::effective_support(double floor) const {
  if (is_zero_) return grid().r_min();
  const auto& x = grid().nodes();
  const auto& v = profile_.values();
  for (Index i = x.size() - 1; i >= 0; --i)
    if (std::abs(v[i]) * x[i] * x[i] > floor) return x[std::min(i + 1, x.size() - 1)];
  return x[0];
}

SampledFunction RegularSolution::as_function() const {
  return SampledFunction(grid, phi, TailModel::none());
}

RegularSolution solve_regular(const LocalPotential& v, double k, const OdeOptions& options) {
  if (k < 0.0) raise(ErrorCode::InvalidArgument, "momentum must be nonnegative");
  const auto& prof = v.profile();
  const auto& x = v.grid().nodes();
  const Index n = x.size();
  RegularSolution out{k, v.grid(), Eigen::VectorXd(n), Eigen::VectorXd(n)};
  const auto s = series_start(prof, k, v.is_zero());
  detail::DormandPrince<2> dp(options.rtol, options.atol, options.max_steps_per_segment);
  std::array<double, 2> y{s[0], s[1]};
  out.phi[0] = y[0];
  out.dphi[0] = y[1];
  const double k2 = k * k;
  double h = x[1] - x[0];
  for (Index i = 0; i + 1 < n; ++i) {
    const bool zero = v.is_zero();
    auto rhs = [&](double r, const std::array<double, 2>& yy, std::array<double, 2>& dy) {
      const double pot = zero ? 0.0 : prof.eval_segment(i, r);
      dy[0] = yy[1];
      dy[1] = (pot - k2) * yy[0];
    };
    dp.advance(rhs, x[i], x[i + 1], y, h);
    out.phi[i + 1] = y[0];
    out.dphi[i + 1] = y[1];
  }
  return out;
}

Eigen::VectorXd ZeroEnergyPair::wronskian() const {
  const auto& x = chi0.grid().nodes();
  Eigen::VectorXd w(x.size());
  for (Index i = 0; i < x.size(); ++i) w[i] = dphi0[i] * chi0.values()[i] - phi0.values()[i] * dchi0[i];
  return w;
}

ZeroEnergyPair zero_energy_pair(const LocalPotential& v, const PairOptions& options) {
  const auto sol = solve_regular(v, 0.0, options.ode);
  const auto& x = v.grid().nodes();
  const Index n = x.size();
  const double rmax = x[n - 1];
  // least squares phi0 ~ A r + B on the asymptotic window
  double s1 = 0, sx = 0, sxx = 0, sy = 0, sxy = 0;
  for (Index i = 0; i < n; ++i) {
    if (x[i] < options.window_start * rmax) continue;
    s1 += 1;
    sx += x[i];
    sxx += x[i] * x[i];
    sy += sol.phi[i];
    sxy += x[i] * sol.phi[i];
  }
  if (s1 < 3) raise(ErrorCode::AsymptoticFitFailure, "fit window holds fewer than 3 nodes");
  const double det = s1 * sxx - sx * sx;
  const double A = (s1 * sxy - sx * sy) / det;
  const double B = (sxx * sy - sx * sxy) / det;
  double rms = 0.0;
  for (Index i = 0; i < n; ++i)
    if (x[i] >= options.window_start * rmax) rms += std::pow(sol.phi[i] - (A * x[i] + B), 2);
  rms = std::sqrt(rms / s1);
  if (!(A > 0.0) || rms > options.fit_tolerance * A * rmax)
    raise(ErrorCode::AsymptoticFitFailure, "regular zero-energy solution is not affine on the fit window");

  // J(r) = int_r^inf du / phi0^2 by product integration of q = u^2/phi0^2 against u^-2
  Eigen::VectorXd q(n);
  for (Index i = 0; i < n; ++i) q[i] = x[i] * x[i] / (sol.phi[i] * sol.phi[i]);
  const SampledFunction qf(v.grid(), q, TailModel::none());
  const auto& g = gauss_legendre(8);
  Eigen::VectorXd J(n);
  // closed tail with the local affine continuation phi0(R) + phi0'(R)(u - R), which matches
  // the integrated phi0 exactly; the fitted A, B would leave a slope of order their error in chi0
  J[n - 1] = 1.0 / (sol.dphi[n - 1] * sol.phi[n - 1]);
  for (Index i = n - 2; i >= 0; --i) {
    const double a = x[i], b = x[i + 1];
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double s = 0.0;
    for (int j = 0; j < 8; ++j) {
      const double u = mid + half * g.x[j];
      s += g.w[j] * qf.eval_segment(i, u) / (u * u);
    }
    J[i] = J[i + 1] + s * half;
  }
  Eigen::VectorXd chi = sol.phi.cwiseProduct(J);
  ZeroEnergyPair pair;
  pair.A = A;
  pair.B = B;
  pair.phi0 = SampledFunction(v.grid(), sol.phi, TailModel::none());
  pair.dphi0 = sol.dphi;
  pair.chi0 = SampledFunction(v.grid(), chi, TailModel::none());
  pair.dchi0.resize(n);
  for (Index i = 0; i < n; ++i) pair.dchi0[i] = pair.chi0.derivative(x[i]);
  return pair;
}

Eigen::VectorXd chi0_inward(const LocalPotential& v, double A, const OdeOptions& options) {
  const auto& x = v.grid().nodes();
  const Index n = x.size();
  const auto& prof = v.profile();
  detail::DormandPrince<2> dp(options.rtol, options.atol, options.max_steps_per_segment);
  std::array<double, 2> y{1.0 / A, 0.0};
  Eigen::VectorXd out(n);
  out[n - 1] = y[0];
  double h = x[n - 1] - x[n - 2];
  for (Index i = n - 2; i >= 0; --i) {
    auto rhs = [&](double r, const std::array<double, 2>& yy, std::array<double, 2>& dy) {
      dy[0] = yy[1];
      dy[1] = (v.is_zero() ? 0.0 : prof.eval_segment(i, r)) * yy[0];
    };
    dp.advance(rhs, x[i + 1], x[i], y, h);
    out[i] = y[0];
  }
  return out;
}

JostModulus jost_modulus(const LocalPotential& v, const Eigen::VectorXd& momenta, const JostOptions& options) {
  JostModulus out{momenta, Eigen::VectorXd(momenta.size()), Eigen::VectorXd(momenta.size())};
  const auto& x = v.grid().nodes();
  const Index n = x.size();
  const double rmax = x[n - 1];
  const std::array<Index, 3> at{n - 1, v.grid().segment(0.85 * rmax), v.grid().segment(0.7 * rmax)};
  for (Index j = 0; j < momenta.size(); ++j) {
    const double k = momenta[j];
    if (!(k > 0.0)) raise(ErrorCode::InvalidArgument, "Jost modulus needs positive momenta");
    if (v.is_zero()) {
      out.values[j] = 1.0;
      out.spread[j] = 0.0;
      continue;
    }
    const auto sol = solve_regular(v, k, options.ode);
    double lo = 1e300, hi = -1e300, sum = 0.0;
    for (Index i : at) {
      const double m = k * k * sol.phi[i] * sol.phi[i] + sol.dphi[i] * sol.dphi[i];
      lo = std::min(lo, m);
      hi = std::max(hi, m);
      sum += m;
    }
    const double mean = sum / 3.0;
    out.values[j] = mean;
    out.spread[j] = (hi - lo) / mean;
    if (out.spread[j] > options.agreement)
      raise(ErrorCode::MatchingRadiusDisagreement, "amplitude extraction differs between matching radii");
  }
  return out;
}

TransformTable weighted_transform(const SampledFunction& u, const LocalPotential& v, const Eigen::VectorXd& momenta,
                                  const OdeOptions& options) {
  return weighted_spectrum(u, v, momenta, options).transform;
}

WeightedSpectrum weighted_spectrum(const SampledFunction& u, const LocalPotential& v, const Eigen::VectorXd& momenta,
                                   const OdeOptions& options) {
  const auto& x = u.grid().nodes();
  const Index n = x.size();
  const auto& prof = v.profile();
  WeightedSpectrum out;
  TransformTable& t = out.transform;
  t.kind = TransformKind::weighted;
  t.momenta = momenta;
  t.values.resize(momenta.size());
  out.jost.resize(momenta.size());
  const double head = head_integral(u, [](double) { return 1.0; }, 1.0);
  const bool zero = v.is_zero();
  for (Index j = 0; j < momenta.size(); ++j) {
    const double k = momenta[j];
    if (k < 0.0) raise(ErrorCode::InvalidArgument, "momenta must be nonnegative");
    const double k2 = k * k;
    // series start uses V's own head model
    const double r0 = x[0];
    std::array<double, 3> y{r0 - k2 * r0 * r0 * r0 / 6.0, 1.0 - 0.5 * k2 * r0 * r0, head};
    if (!zero) {
      double c = prof(r0), alpha = 0.0;
      if (prof.head().power_law && r0 <= prof.grid().r_min() * (1 + 1e-12)) {
        c = prof.head().coefficient;
        alpha = prof.head().exponent;
      }
      y[0] += c * std::pow(r0, alpha + 3.0) / ((alpha + 2.0) * (alpha + 3.0));
      y[1] += c * std::pow(r0, alpha + 2.0) / (alpha + 2.0);
    }
    detail::DormandPrince<3> dp(options.rtol, options.atol, options.max_steps_per_segment);
    SegmentCursor vc(prof);
    double h = x[1] - x[0];
    for (Index i = 0; i + 1 < n; ++i) {
      auto rhs = [&](double r, const std::array<double, 3>& yy, std::array<double, 3>& dy) {
        dy[0] = yy[1];
        dy[1] = ((zero ? 0.0 : vc(r)) - k2) * yy[0];
        dy[2] = u.eval_segment(i, r) * yy[0];
      };
      dp.advance(rhs, x[i], x[i + 1], y, h);
    }
    // free continuation beyond r_max
    const double R = x[n - 1];
    double tail;
    if (k == 0.0) {
      tail = y[0] * u.tail().integral_from(R) + y[1] * u.tail().first_moment_from(R);
    } else {
      const double a = y[0] * std::sin(k * R) + y[1] * std::cos(k * R) / k;
      const double b = y[0] * std::cos(k * R) - y[1] * std::sin(k * R) / k;
      tail = a * tail_integral(u.tail(), OscillatoryWeight::sine(k)) +
             b * tail_integral(u.tail(), OscillatoryWeight::cosine(k));
    }
    t.values[j] = y[2] + tail;
    out.jost[j] = k2 * y[0] * y[0] + y[1] * y[1];
  }
  return out;
}

double manufactured_phi0(double r) { return 2.0 * r + std::expm1(-r); }

double manufactured_potential(double r) { return std::exp(-r) / manufactured_phi0(r); }

LocalPotential manufactured(const RadialGrid& grid) {
  return LocalPotential(SampledFunction::sample(grid, manufactured_potential, TailModel::exponential(1.0)));
}

}  // namespace bicsep
