#include "bicsep/detector.hpp"

#include "bicsep/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace bicsep {

namespace {

constexpr double pi = std::numbers::pi;

double max_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

double bisect(const std::function<double(double)>& f, double lo, double hi, double flo) {
  for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double golden_min(const std::function<double(double)>& f, double a, double b) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 200 && b - a > 1e-12 * std::max(1.0, b); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Nodes where second differences are not swamped by rounding.
bool resolvable(const Eigen::VectorXd& x, Index i, double umax, double denom, double tol) {
  const double h = std::min(x[i] - x[i - 1], x[i + 1] - x[i]);
  return 4e-13 * umax / (h * h) <= 0.1 * tol * denom;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

}  // namespace

Eigen::VectorXd scan_momenta(double step, double linear_to, double ratio, double p_max) {
  if (!(step > 0.0) || !(linear_to >= step) || !(ratio > 1.0)) raise(ErrorCode::InvalidArgument, "bad momentum grid");
  std::vector<double> p;
  const auto n = static_cast<long>(std::floor(linear_to / step + 1e-9));
  for (long i = 1; i <= n; ++i) p.push_back(double(i) * step);
  double q = p.back();
  while (q < p_max) {
    q *= ratio;
    p.push_back(q);
  }
  return Eigen::Map<Eigen::VectorXd>(p.data(), Index(p.size()));
}

SampledFunction Spectrum::dispersion_numerator() const {
  const auto& p = u_tilde.momenta;
  Eigen::VectorXd h = u_tilde.values.cwiseAbs2().cwiseProduct(p.cwiseAbs2()).cwiseQuotient(weight);
  RadialGrid g(p);
  return SampledFunction(g, h, fit_tail(g.nodes(), h));
}

Spectrum spectrum(const SampledFunction& u, const LocalPotential* v, const SpectrumOptions& o) {
  Spectrum s;
  if (v == nullptr || v->is_zero()) {
    const Eigen::VectorXd p = scan_momenta(o.step, o.linear_to, o.ratio, o.p_max);
    s.u_tilde = sine_transform(u, p);
    s.weight = Eigen::VectorXd::Ones(p.size());
    s.evaluate = [u](double k) {
      return k == 0.0 ? integrate_weighted(u, [](double r) { return r; }, 0.0, 1.0)
                      : integrate(u, OscillatoryWeight::sine(k)) / k;
    };
    return s;
  }
  const Eigen::VectorXd p = scan_momenta(o.step_local, o.linear_to, o.ratio, std::max(o.p_max_local, 5.0 * o.linear_to));
  auto ws = weighted_spectrum(u, *v, p);
  if (!(ws.jost.minCoeff() > 0.0)) raise(ErrorCode::ValidationError, "Jost modulus vanishes on the scan");
  s.u_tilde = std::move(ws.transform);
  s.weight = std::move(ws.jost);
  s.unit_weight = false;
  s.evaluate = [u, pot = *v](double k) {
    Eigen::VectorXd m(1);
    m[0] = k;
    return weighted_transform(u, pot, m).values[0];
  };
  return s;
}

double dispersion_at(const SampledFunction& numerator, int epsilon, double k, const PrincipalValueOptions& pv) {
  return double(epsilon) + 2.0 / pi * principal_value(numerator, k, pv);
}

DispersionCurve dispersion(const Spectrum& s, int epsilon, const Eigen::VectorXd& momenta,
                           const PrincipalValueOptions& pv) {
  DispersionCurve c;
  c.epsilon = epsilon;
  c.momenta = momenta;
  c.values.resize(momenta.size());
  c.unit_weight = s.unit_weight;
  const auto num = s.dispersion_numerator();
  for (Index i = 0; i < momenta.size(); ++i) c.values[i] = dispersion_at(num, epsilon, momenta[i], pv);
  return c;
}

std::vector<Zero> find_zeros(const TransformTable& t, const std::function<double(double)>& f, const ZeroOptions& o) {
  std::vector<Zero> out;
  const auto& p = t.momenta;
  const auto& v = t.values;
  const double scale = max_abs(v);
  if (scale == 0.0) return out;
  const double accept = o.root_tol * scale;
  std::vector<Index> idx;
  for (Index i = 0; i < p.size(); ++i)
    if (p[i] > o.k_min && p[i] <= o.k_max) idx.push_back(i);
  for (std::size_t m = 0; m + 1 < idx.size(); ++m) {
    const Index i = idx[m], j = idx[m + 1];
    if (v[i] == 0.0) {
      out.push_back({p[i], p[i], p[i], 0.0, false});
      continue;
    }
    if (v[i] * v[j] < 0.0) {
      const double k = bisect(f, p[i], p[j], v[i]);
      const double val = f(k);
      if (std::abs(val) < accept) out.push_back({k, p[i], p[j], val, false});
    }
  }
  // touching zeros: local minima of |U~| without a sign change
  for (std::size_t m = 1; m + 1 < idx.size(); ++m) {
    const Index a = idx[m - 1], i = idx[m], b = idx[m + 1];
    const double ai = std::abs(v[i]);
    if (!(ai <= std::abs(v[a]) && ai <= std::abs(v[b]))) continue;
    if (v[a] * v[i] <= 0.0 || v[i] * v[b] <= 0.0) continue;
    if (ai > o.touch_ratio * scale) continue;
    const double k = golden_min([&](double x) { return std::abs(f(x)); }, p[a], p[b]);
    const double val = f(k);
    if (std::abs(val) < accept) out.push_back({k, p[a], p[b], val, true});
  }
  std::sort(out.begin(), out.end(), [](const Zero& x, const Zero& y) { return x.k < y.k; });
  return out;
}

DetectionReport detect(const Spectrum& s, int epsilon, const DetectOptions& o) {
  if (epsilon != 1 && epsilon != -1) raise(ErrorCode::InvalidArgument, "epsilon must be +1 or -1");
  DetectionReport r;
  r.epsilon = epsilon;
  r.k_ceiling = o.k_max;
  r.unit_weight = s.unit_weight;
  r.u_tilde = s.u_tilde;
  ZeroOptions zo = o.zeros;
  zo.k_max = o.k_max;
  r.zeros = find_zeros(s.u_tilde, s.evaluate, zo);
  const auto num = s.dispersion_numerator();
  const double scale = max_abs(s.u_tilde.values);
  for (const auto& z : r.zeros) {
    const double d = dispersion_at(num, epsilon, z.k, o.pv);
    r.zero_dispersion.push_back(d);
    if (std::abs(d) < o.match_tol * (1.0 + std::abs(epsilon)) && std::abs(z.value) < zo.root_tol * scale)
      r.embedded.push_back({z.k, z.value, d});
  }
  const auto n = static_cast<Index>(std::floor(o.k_max / o.scan_step + 1e-9));
  Eigen::VectorXd ks(n);
  for (Index i = 0; i < n; ++i) ks[i] = double(i + 1) * o.scan_step;
  r.curve = dispersion(s, epsilon, ks, o.pv);
  return r;
}

namespace {

bool settled(const DispersionCurve& c, double k_max, double tol) {
  for (Index i = 0; i < c.momenta.size(); ++i)
    if (c.momenta[i] >= 0.5 * k_max && std::abs(c.values[i] - c.epsilon) >= tol) return false;
  return true;
}

}  // namespace

DetectionReport detect(const SampledFunction& u, const LocalPotential* v, int epsilon, const DetectOptions& options) {
  DetectOptions o = options;
  for (;;) {
    o.spectrum.linear_to = std::max(options.spectrum.linear_to, o.k_max);
    o.spectrum.p_max = std::max(options.spectrum.p_max, 20.0 * o.k_max);
    const auto s = spectrum(u, v, o.spectrum);
    auto r = detect(s, epsilon, o);
    if (settled(r.curve, o.k_max, o.ceiling_tol)) return r;
    if (2.0 * o.k_max > o.k_limit) {
      raise(ErrorCode::ToleranceNotMet, "D(k) has not approached epsilon below the scan limit");
    }
    o.k_max *= 2.0;
  }
}

std::optional<EngineeredAmplitude> solve_engineered_amplitude(const Spectrum& unit, int epsilon, double k0,
                                                              double degenerate_tol) {
  const double I = 2.0 / pi * principal_value(unit.dispersion_numerator(), k0);
  if (std::abs(I) < degenerate_tol) return std::nullopt;
  const double a2 = -double(epsilon) / I;
  if (!(a2 > 0.0)) return std::nullopt;
  return EngineeredAmplitude{std::sqrt(a2), I};
}

CosineRepresentation cosine_representation(const SampledFunction& u, const std::vector<double>& ks, double tol,
                                           const SpectrumOptions& options) {
  CosineRepresentation out;
  const auto s = spectrum(u, nullptr, options);
  const auto num = s.dispersion_numerator();
  const auto w = tail_function(u);
  out.omega = omega_convolution(signed_split(u));
  {
    const auto& om = out.omega;
    const auto& x = om.grid().nodes();
    double l1 = std::abs(om(0.5 * x[0])) * x[0];
    for (Index i = 0; i + 1 < x.size(); ++i)
      l1 += gauss_integrate([&](double r) { return std::abs(om.eval_segment(i, r)); }, x[i], x[i + 1], 8);
    if (om.tail().kind != TailModel::Kind::compact) l1 += std::abs(om.tail().integral_from(x[x.size() - 1]));
    out.omega_l1 = l1;
  }
  const auto& x = u.grid().nodes();
  const Index n = x.size();
  const auto& gl = gauss_legendre(8);
  for (double k : ks) {
    CosineCheck c;
    c.k = k;
    c.direct = principal_value(num, k);
    c.literal_product = 0.5 * pi * integrate(u, OscillatoryWeight::cosine(k)) * integrate(w, OscillatoryWeight::cosine(k));
    // C(r) = int_0^r W cos, S(r) = int_r^inf W sin
    Eigen::VectorXd C(n), S(n), f(n);
    C[0] = gauss_integrate([&](double t) { return w(t) * std::cos(k * t); }, 0.0, x[0], 8);
    S[n - 1] = tail_integral(w.tail(), OscillatoryWeight::sine(k));
    for (Index i = 0; i + 1 < n; ++i) {
      const double mid = 0.5 * (x[i] + x[i + 1]), half = 0.5 * (x[i + 1] - x[i]);
      double acc = 0.0;
      for (std::size_t q = 0; q < gl.x.size(); ++q) {
        const double t = mid + half * gl.x[q];
        acc += gl.w[q] * w.eval_segment(i, t) * std::cos(k * t);
      }
      C[i + 1] = C[i] + half * acc;
    }
    for (Index i = n - 2; i >= 0; --i) {
      const double mid = 0.5 * (x[i] + x[i + 1]), half = 0.5 * (x[i + 1] - x[i]);
      double acc = 0.0;
      for (std::size_t q = 0; q < gl.x.size(); ++q) {
        const double t = mid + half * gl.x[q];
        acc += gl.w[q] * w.eval_segment(i, t) * std::sin(k * t);
      }
      S[i] = S[i + 1] + half * acc;
    }
    for (Index i = 0; i < n; ++i) f[i] = u.values()[i] * (std::cos(k * x[i]) * C[i] - std::sin(k * x[i]) * S[i]);
    const SampledFunction fs(u.grid(), f, fit_tail(x, f));
    c.split = 0.5 * pi * integrate(fs);
    c.omega = integrate(out.omega, OscillatoryWeight::cosine(k));
    out.max_corrected_mismatch =
        std::max({out.max_corrected_mismatch, std::abs(c.direct - c.split), std::abs(c.direct - c.omega),
                  std::abs(c.split - c.omega)});
    out.max_literal_mismatch = std::max(out.max_literal_mismatch, std::abs(c.literal_product - c.direct));
    out.checks.push_back(c);
  }
  if (out.max_corrected_mismatch > tol)
    raise(ErrorCode::IdentityMismatch, "direct, split and omega routes disagree by " + fmt(out.max_corrected_mismatch));
  return out;
}

Certificate certify_theorem_A(const SampledFunction& u, double tol) {
  Certificate c;
  c.theorem = "A";
  const auto f = measure_flags(u, tol);
  const auto sf = shape_flags(u, tol);
  if (max_abs(u.values()) == 0.0) {
    c.passed = true;
    c.degenerate = true;
    c.warning = "U vanishes identically; U~ has no sign";
    return c;
  }
  c.conditions.push_back({"positive", sf.positive, "min U = " + fmt(sf.min_value)});
  c.conditions.push_back({"strictly_decreasing_on_support", sf.strictly_decreasing_on_support,
                          "max first difference / max U = " + fmt(sf.max_first_difference)});
  c.conditions.push_back({"integrable_near_origin", f.l1_near_origin, ""});
  c.conditions.push_back({"rU_integrable_at_infinity", f.rU_l1_at_infinity, ""});
  c.passed = std::all_of(c.conditions.begin(), c.conditions.end(), [](const Condition& x) { return x.passed; });
  return c;
}

Certificate certify_theorem_B(const FormFactor& uf, const LocalPotential& v, const TheoremBOptions& o) {
  Certificate c;
  c.theorem = "B";
  const auto& u = uf.profile();
  const double umax = max_abs(u.values());
  if (umax == 0.0) {
    c.passed = true;
    c.degenerate = true;
    c.warning = "U vanishes identically; U~ has no sign";
    return c;
  }
  auto all = [&] {
    return std::all_of(c.conditions.begin(), c.conditions.end(), [](const Condition& x) { return x.passed; });
  };
  if (uf.provenance() == Provenance::built && uf.source()) {
    const auto& src = *uf.source();
    bool valid = true;
    std::string why;
    try {
      src.validate();
    } catch (const Error& e) {
      valid = false;
      why = e.what();
    }
    const auto ig = source_integrability(src);
    c.conditions.push_back({"source_positive", valid, why});
    c.conditions.push_back({"r2g_integrable_near_origin", ig.r2g_l1_near_origin, ""});
    c.conditions.push_back({"rg_integrable_at_infinity", ig.rg_l1_at_infinity, ""});
    const auto rep = ode_residual(uf, v, src, o.residual_tol);
    c.conditions.push_back({"source_matches_potential", rep.passed, "scaled residual " + fmt(rep.max_residual)});
    c.passed = all();
    return c;
  }
  // recover g = U'' - V U
  const auto& x = u.grid().nodes();
  const auto& val = u.values();
  const Index n = x.size();
  std::vector<double> rr, gg;
  double worst = 0.0, worst_at = 0.0;
  for (Index i = 2; i + 2 < n; ++i) {
    const double vu = v(x[i]) * val[i];
    const double denom = umax + std::abs(vu);
    if (!resolvable(x, i, umax, denom, o.sign_tol)) continue;
    const double g = second_derivative(x, val, i) - vu;
    rr.push_back(x[i]);
    gg.push_back(g);
    if (-g / denom > worst) {
      worst = -g / denom;
      worst_at = x[i];
    }
  }
  if (rr.size() < 20) raise(ErrorCode::RecoveryFailed, "too few resolvable nodes to recover g");
  c.conditions.push_back({"recovered_g_nonnegative", worst <= o.sign_tol,
                          worst > 0.0 ? "most negative scaled g " + fmt(-worst) + " at r = " + fmt(worst_at) : ""});
  const Eigen::VectorXd gr = Eigen::Map<Eigen::VectorXd>(rr.data(), Index(rr.size()));
  const Eigen::VectorXd gv = Eigen::Map<Eigen::VectorXd>(gg.data(), Index(gg.size()));
  const auto tail = fit_tail(gr, gv);
  const bool tail_ok = tail.kind == TailModel::Kind::compact || tail.kind == TailModel::Kind::exponential ||
                       (tail.kind == TailModel::Kind::algebraic && tail.parameter > 2.0);
  c.conditions.push_back({"rg_integrable_at_infinity", tail_ok, ""});
  // near the origin U'' - V U is dominated by V U when U(0) != 0; r^2 g is then integrable iff r^2 V is
  const auto& vh = v.profile().head();
  const bool head_ok = (!vh.power_law || vh.exponent > -3.0) && (!u.head().power_law || u.head().exponent > -1.0);
  c.conditions.push_back({"r2g_integrable_near_origin", head_ok, ""});
  c.passed = all();
  return c;
}

}  // namespace bicsep
