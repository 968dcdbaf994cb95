#include "bicsep/quadrature.hpp"

#include "bicsep/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace bicsep {

namespace {

GaussRule make_rule(int n) {
  GaussRule g;
  g.x.resize(n);
  g.w.resize(n);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    double p0 = 1.0, p1 = 0.0;
    for (int j = 1; j <= n; ++j) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
    }
    dp = n * (z * p0 - p1) / (z * z - 1.0);
    g.x[i] = -z;
    g.w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return g;
}

double poly(const std::array<double, 4>& c, double t) { return c[0] + t * (c[1] + t * (c[2] + t * c[3])); }

double segment_plain(const std::array<double, 4>& c, double a, double b) {
  auto prim = [&](double t) { return t * (c[0] + t * (c[1] / 2.0 + t * (c[2] / 3.0 + t * c[3] / 4.0))); };
  return prim(b) - prim(a);
}

// Integral over local x in [a, b] of P(x) * trig(p (r0 + x)).
double segment_trig(const std::array<double, 4>& c, double r0, double a, double b, const OscillatoryWeight& w) {
  const double p = w.frequency;
  if (w.kind == OscillatoryWeight::Kind::none) return segment_plain(c, a, b);
  const bool sine = w.kind == OscillatoryWeight::Kind::sine;
  if (p * (b - a) < 1.0) {
    const auto& g = gauss_legendre(8);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double s = 0.0;
    for (std::size_t q = 0; q < g.x.size(); ++q) {
      const double x = mid + half * g.x[q];
      const double th = p * (r0 + x);
      s += g.w[q] * poly(c, x) * (sine ? std::sin(th) : std::cos(th));
    }
    return s * half;
  }
  auto prim = [&](double x) {
    const double P = poly(c, x);
    const double P1 = c[1] + x * (2.0 * c[2] + 3.0 * x * c[3]);
    const double P2 = 2.0 * c[2] + 6.0 * x * c[3];
    const double P3 = 6.0 * c[3];
    const double th = p * (r0 + x);
    const double s = std::sin(th), co = std::cos(th);
    if (sine) return -P * co / p + P1 * s / (p * p) + P2 * co / (p * p * p) - P3 * s / (p * p * p * p);
    return P * s / p + P1 * co / (p * p) - P2 * s / (p * p * p) - P3 * co / (p * p * p * p);
  };
  return prim(b) - prim(a);
}

double tail_weighted(const TailModel& t, const OscillatoryWeight& w, const QuadratureOptions& opt, double* err) {
  using K = TailModel::Kind;
  if (err) *err = 0.0;
  if (t.kind == K::none || t.kind == K::compact || t.amplitude == 0.0) return 0.0;
  const double R = t.anchor;
  if (w.kind == OscillatoryWeight::Kind::none || w.frequency == 0.0) {
    const double scale = w.kind == OscillatoryWeight::Kind::cosine || w.kind == OscillatoryWeight::Kind::none ? 1.0 : 0.0;
    return scale * t.integral_from(R);
  }
  const double p = w.frequency;
  const bool sine = w.kind == OscillatoryWeight::Kind::sine;
  if (t.kind == K::exponential) {
    const double a = t.parameter;
    const double s = std::sin(p * R), c = std::cos(p * R);
    return t.amplitude * (sine ? (a * s + p * c) : (a * c - p * s)) / (a * a + p * p);
  }
  if (!(t.parameter > 0.0)) raise(ErrorCode::NonIntegrableTail, "non-decaying algebraic tail under oscillatory weight");
  auto g = [&](double r) { return t(r) * (sine ? std::sin(p * r) : std::cos(p * r)); };
  const auto ex = oscillatory_tail(g, R, p, sine ? 0.0 : std::numbers::pi / 2.0, opt);
  if (err) *err = ex.error;
  return ex.value;
}

double head_weighted(const SampledFunction& f, const OscillatoryWeight& w) {
  const double p = w.frequency;
  switch (w.kind) {
    case OscillatoryWeight::Kind::none:
      return head_integral(f, [](double) { return 1.0; });
    case OscillatoryWeight::Kind::sine:
      return head_integral(f, [p](double r) { return p * r == 0.0 ? p : std::sin(p * r) / r; }, 1.0);
    case OscillatoryWeight::Kind::cosine:
      return head_integral(f, [p](double r) { return std::cos(p * r); });
  }
  return 0.0;
}

double body_weighted(const SampledFunction& f, const OscillatoryWeight& w) {
  const auto& x = f.grid().nodes();
  double s = 0.0;
  for (Index i = 0; i + 1 < x.size(); ++i) s += segment_trig(f.segment(i), x[i], 0.0, x[i + 1] - x[i], w);
  return s;
}

SampledFunction decimated(const SampledFunction& f) {
  const auto& x = f.grid().nodes();
  const Index n = x.size();
  std::vector<bool> keep(n, false);
  for (Index i = 0; i < n; i += 2) keep[i] = true;
  keep[n - 1] = true;
  for (Index b : f.breakpoints()) keep[b] = true;
  std::vector<double> r, v;
  for (Index i = 0; i < n; ++i)
    if (keep[i]) {
      r.push_back(x[i]);
      v.push_back(f.values()[i]);
    }
  RadialGrid g(Eigen::Map<Eigen::VectorXd>(r.data(), Index(r.size())));
  SampledFunction::Options opt;
  opt.monotone = f.monotone();
  opt.breakpoints = f.breakpoint_radii();
  TailModel t = f.tail();
  return SampledFunction(g, Eigen::Map<Eigen::VectorXd>(v.data(), Index(v.size())), t, opt);
}

}  // namespace

double tail_integral(const TailModel& tail, OscillatoryWeight weight, const QuadratureOptions& options) {
  double err = 0.0;
  const double v = tail_weighted(tail, weight, options, &err);
  if (err > options.abs_tol) raise(ErrorCode::ToleranceNotMet, "oscillatory tail acceleration stalled");
  return v;
}

const GaussRule& gauss_legendre(int n) {
  static const std::vector<GaussRule> rules = [] {
    std::vector<GaussRule> out(129);
    for (int k = 1; k <= 128; ++k) out[k] = make_rule(k);
    return out;
  }();
  if (n < 1 || n > 128) raise(ErrorCode::InvalidArgument, "Gauss-Legendre order out of range");
  return rules[n];
}

double gauss_integrate(const std::function<double(double)>& f, double a, double b, int n, int pieces) {
  const auto& g = gauss_legendre(n);
  const double step = (b - a) / pieces;
  double s = 0.0;
  for (int j = 0; j < pieces; ++j) {
    const double lo = a + j * step;
    const double mid = lo + 0.5 * step, half = 0.5 * step;
    double t = 0.0;
    for (int q = 0; q < n; ++q) t += g.w[q] * f(mid + half * g.x[q]);
    s += t * half;
  }
  return s;
}

double head_integral(const SampledFunction& f, const std::function<double(double)>& smooth, double extra_power) {
  const double r0 = f.grid().r_min();
  const auto& head = f.head();
  if (head.power_law) {
    const double beta = head.exponent + extra_power;
    if (!(beta > -1.0)) raise(ErrorCode::NonIntegrableTail, "profile is not integrable at the origin");
    const double gamma = 1.0 / (beta + 1.0);
    const double inner = gauss_integrate([&](double t) { return smooth(r0 * std::pow(t, gamma)); }, 0.0, 1.0, 24);
    return head.coefficient * std::pow(r0, beta + 1.0) * gamma * inner;
  }
  const auto c = f.segment(0);
  return gauss_integrate([&](double r) { return poly(c, r - r0) * std::pow(r, extra_power) * smooth(r); }, 0.0, r0, 16);
}

double integrate(const SampledFunction& f, OscillatoryWeight weight, const QuadratureOptions& options) {
  double tail_err = 0.0;
  const double tail = tail_weighted(f.tail(), weight, options, &tail_err);
  if (tail_err > options.abs_tol) raise(ErrorCode::ToleranceNotMet, "oscillatory tail acceleration stalled");
  if (weight.kind == OscillatoryWeight::Kind::none && f.size() >= 8) {
    // interpolant error is O(h^4); one Richardson step against the decimated grid
    const double fine = head_weighted(f, weight) + body_weighted(f, weight);
    const auto d = decimated(f);
    const double coarse = head_weighted(d, weight) + body_weighted(d, weight);
    return fine + (fine - coarse) / 15.0 + tail;
  }
  return head_weighted(f, weight) + body_weighted(f, weight) + tail;
}

QuadratureResult integrate_semi_infinite(const SampledFunction& f, OscillatoryWeight weight,
                                         const QuadratureOptions& options) {
  if (weight.kind == OscillatoryWeight::Kind::none && !f.tail().absolutely_integrable())
    raise(ErrorCode::NonIntegrableTail, "tail is not absolutely integrable");
  double tail_err = 0.0;
  const double tail = tail_weighted(f.tail(), weight, options, &tail_err);
  if (tail_err > options.abs_tol) raise(ErrorCode::ToleranceNotMet, "oscillatory tail acceleration stalled");
  const double fine = head_weighted(f, weight) + body_weighted(f, weight);
  double coarse = fine;
  if (f.size() >= 8) {
    const auto d = decimated(f);
    coarse = head_weighted(d, weight) + body_weighted(d, weight);
  }
  const double correction = (fine - coarse) / 15.0;
  return {fine + correction + tail, std::abs(correction) + tail_err};
}

double integrate_interval(const SampledFunction& f, double a, double b) {
  if (b < a) return -integrate_interval(f, b, a);
  const auto& x = f.grid().nodes();
  double s = 0.0;
  const double r0 = x[0];
  if (a < r0) {
    const double top = std::min(b, r0);
    const auto& head = f.head();
    if (head.power_law) {
      const double e = head.exponent + 1.0;
      if (!(e > 0.0)) raise(ErrorCode::NonIntegrableTail, "profile is not integrable at the origin");
      s += head.coefficient * (std::pow(top, e) - std::pow(a, e)) / e;
    } else {
      s += segment_plain(f.segment(0), a - r0, top - r0);
    }
    a = top;
  }
  const double rmax = x[x.size() - 1];
  if (b > rmax) {
    const double lo = std::max(a, rmax);
    s += f.tail().integral_from(lo) - f.tail().integral_from(b);
    b = rmax;
  }
  if (a >= b) return s;
  const Index ia = f.grid().segment(a), ib = f.grid().segment(b);
  for (Index i = ia; i <= ib; ++i) {
    const double lo = std::max(a, x[i]), hi = std::min(b, x[i + 1]);
    if (hi > lo) s += segment_plain(f.segment(i), lo - x[i], hi - x[i]);
  }
  return s;
}

Eigen::VectorXd cumulative_from_origin(const SampledFunction& f) {
  const auto& x = f.grid().nodes();
  Eigen::VectorXd c(x.size());
  c[0] = head_integral(f, [](double) { return 1.0; });
  for (Index i = 0; i + 1 < x.size(); ++i) c[i + 1] = c[i] + segment_plain(f.segment(i), 0.0, x[i + 1] - x[i]);
  return c;
}

Eigen::VectorXd cumulative_to_infinity(const SampledFunction& f) {
  const auto& x = f.grid().nodes();
  const Index n = x.size();
  Eigen::VectorXd c(n);
  c[n - 1] = f.tail().integral_from(x[n - 1]);
  for (Index i = n - 2; i >= 0; --i) c[i] = c[i + 1] + segment_plain(f.segment(i), 0.0, x[i + 1] - x[i]);
  return c;
}

double integrate_weighted(const SampledFunction& f, const std::function<double(double)>& w, double frequency,
                          double head_power, const QuadratureOptions& options) {
  const auto& x = f.grid().nodes();
  const auto& g = gauss_legendre(8);
  double body = 0.0;
  for (Index i = 0; i + 1 < x.size(); ++i) {
    const double h = x[i + 1] - x[i];
    const int pieces = std::max(1, int(std::ceil(frequency * h / 1.5)));
    const auto c = f.segment(i);
    const double step = h / pieces;
    for (int j = 0; j < pieces; ++j) {
      const double mid = (j + 0.5) * step, half = 0.5 * step;
      double t = 0.0;
      for (std::size_t q = 0; q < g.x.size(); ++q) {
        const double loc = mid + half * g.x[q];
        t += g.w[q] * poly(c, loc) * w(x[i] + loc);
      }
      body += t * half;
    }
  }
  const double head = head_integral(
      f, [&](double r) { return w(r) / std::pow(r, head_power); }, head_power);
  using K = TailModel::Kind;
  const auto& tl = f.tail();
  double tail = 0.0;
  if (tl.amplitude != 0.0 && (tl.kind == K::exponential || tl.kind == K::algebraic)) {
    const double R = tl.anchor;
    auto gfun = [&](double r) { return tl(r) * w(r); };
    if (tl.kind == K::exponential) {
      const double span = 60.0 / tl.parameter;
      const int pieces = std::max(4, int(std::ceil(span * std::max(frequency, tl.parameter) / 1.5)));
      tail = gauss_integrate(gfun, R, R + span, 16, pieces);
    } else if (frequency > 0.0) {
      const auto ex = oscillatory_tail(gfun, R, frequency, 0.0, options);
      if (ex.error > options.abs_tol) raise(ErrorCode::ToleranceNotMet, "oscillatory tail acceleration stalled");
      tail = ex.value;
    } else {
      const double g1 = gfun(R), g2 = gfun(2.0 * R);
      if (g1 == 0.0) return head + body;
      const double sigma = -std::log2(std::abs(g2 / g1));
      if (!(sigma > 1.0) || g1 * g2 <= 0.0) raise(ErrorCode::NonIntegrableTail, "weighted algebraic tail diverges");
      // r = R x^{-1/(sigma-1)}
      const double e = 1.0 / (sigma - 1.0);
      tail = R * e *
             gauss_integrate(
                 [&](double xx) {
                   if (xx <= 0.0) return 0.0;
                   const double r = R * std::pow(xx, -e);
                   return gfun(r) * std::pow(r / R, sigma);
                 },
                 0.0, 1.0, 32, 2);
    }
  }
  return head + body + tail;
}

Extrapolation wynn_epsilon(std::span<const double> s) {
  const std::size_t n = s.size();
  if (n == 0) return {};
  if (n < 3) return {s[n - 1], n > 1 ? std::abs(s[n - 1] - s[n - 2]) : std::abs(s[0])};
  // e[k][j]: column k, row j
  std::vector<std::vector<double>> e(n + 1);
  e[0].assign(n + 1, 0.0);  // epsilon_{-1}
  e[1].assign(s.begin(), s.end());
  Extrapolation best{s[n - 1], std::abs(s[n - 1] - s[n - 2])};
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 2; k <= n; ++k) {
    const auto& a = e[k - 2];
    const auto& b = e[k - 1];
    const std::size_t len = b.size() - 1;
    if (len == 0) break;
    e[k].resize(len);
    bool ok = true;
    for (std::size_t j = 0; j < len; ++j) {
      const double d = b[j + 1] - b[j];
      if (d == 0.0 || !std::isfinite(d)) {
        ok = false;
        break;
      }
      e[k][j] = a[j + 1] + 1.0 / d;
    }
    if (!ok) break;
    if (k % 2 == 1) {  // even epsilon columns carry estimates
      const double v = e[k].back();
      if (!std::isnan(prev)) {
        const double err = std::abs(v - prev);
        if (err < best.error) best = {v, err};
      }
      prev = v;
    }
  }
  return best;
}

Extrapolation oscillatory_tail(const std::function<double(double)>& g, double start, double frequency, double phase,
                               const QuadratureOptions& options) {
  const double half = std::numbers::pi / frequency;
  // first phase zero after start: frequency*z + phase = m*pi
  const double m = std::ceil((frequency * start + phase) / std::numbers::pi);
  double z = (m * std::numbers::pi - phase) / frequency;
  if (z - start < 1e-12 * half) z += half;
  std::vector<double> sums;
  double acc = gauss_integrate(g, start, z, 16, 1);
  sums.push_back(acc);
  Extrapolation last{acc, std::numeric_limits<double>::infinity()};
  Extrapolation prev = last;
  const double tol = 0.1 * options.abs_tol;
  for (int cycle = 1; cycle <= options.max_tail_cycles; ++cycle) {
    const double term = gauss_integrate(g, z, z + half, 16, 1);
    z += half;
    acc += term;
    sums.push_back(acc);
    if (std::abs(term) < 1e-18 * std::max(1.0, std::abs(acc)) && cycle > 3) return {acc, std::abs(term)};
    if (sums.size() >= 8 && (sums.size() % 4 == 0)) {
      const std::size_t keep = std::min<std::size_t>(sums.size(), 40);
      const auto ex = wynn_epsilon(std::span<const double>(sums).last(keep));
      const double diff = std::abs(ex.value - prev.value);
      last = {ex.value, std::max(ex.error, diff)};
      if (last.error < tol) return last;
      prev = ex;
    }
  }
  return last;
}

namespace {

double pv_tail(const TailModel& t, double P, double k) {
  using K = TailModel::Kind;
  if (t.amplitude == 0.0 || t.kind == K::none || t.kind == K::compact) return 0.0;
  if (t.kind == K::algebraic) {
    const double s = t.parameter;
    const double q = (k / P) * (k / P);
    double sum = 0.0, pw = 1.0;
    for (int j = 0; j < 400; ++j) {
      const double term = pw / (s + 1.0 + 2.0 * j);
      sum += term;
      if (term < 1e-17 * std::abs(sum)) break;
      pw *= q;
    }
    return t(P) / P * sum;
  }
  const double span = 60.0 / t.parameter;
  return gauss_integrate([&](double p) { return t(p) / (p * p - k * k); }, P, P + span, 16,
                         std::max(4, int(std::ceil(span * t.parameter))));
}

double pv_outside(const SampledFunction& h, double lo, double hi, double k) {
  // ordinary integral of h/(p^2-k^2) over [lo, hi] clipped to grid, hi <= p_max
  const auto& x = h.grid().nodes();
  const auto& g = gauss_legendre(10);
  double s = 0.0;
  auto piece = [&](double a, double b) {
    if (b <= a) return;
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double t = 0.0;
    for (int q = 0; q < 10; ++q) {
      const double p = mid + half * g.x[q];
      t += g.w[q] * h(p) / (p * p - k * k);
    }
    s += t * half;
  };
  // head below first node
  if (lo < x[0]) {
    const double top = std::min(hi, x[0]);
    piece(lo, top);
    lo = top;
  }
  if (lo >= hi) return s;
  const Index ia = h.grid().segment(lo), ib = h.grid().segment(std::min(hi, x[x.size() - 1]));
  for (Index i = ia; i <= ib; ++i) {
    double a = std::max(lo, x[i]), b = std::min(hi, x[i + 1]);
    if (b <= a) continue;
    // subdivide when the pole factor varies fast relative to the segment
    const double dist = std::min(std::abs(a - k), std::abs(b - k));
    const int pieces = std::clamp(int(std::ceil(2.0 * (b - a) / std::max(dist, 1e-300))), 1, 64);
    const double step = (b - a) / pieces;
    for (int j = 0; j < pieces; ++j) piece(a + j * step, a + (j + 1) * step);
  }
  return s;
}

}  // namespace

double principal_value(const SampledFunction& h, double k, const PrincipalValueOptions& options) {
  if (!(k > 0.0)) raise(ErrorCode::PoleAtEndpoint, "pole must be positive");
  const double delta = options.delta > 0.0 ? options.delta : std::min(0.1, 0.5 * k);
  if (k <= delta * (1.0 + 1e-12)) raise(ErrorCode::PoleAtEndpoint, "pole within the subtraction window of p = 0");
  const double hk = h(k);
  const double scale = std::max(h.values().cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  if (options.check_smoothness) {
    auto jump = [&](double e) { return std::abs((h(k + e) - hk) / e - (hk - h(k - e)) / e); };
    const double d1 = jump(delta / 4.0), d2 = jump(delta / 64.0);
    if (d2 > 0.5 * d1 && d2 > 1e-6 * scale / delta)
      raise(ErrorCode::NonSmoothAtPole, "integrand is not differentiable at the pole");
  }
  const auto& x = h.grid().nodes();
  const double P = x[x.size() - 1];
  if (k + delta >= P) raise(ErrorCode::InvalidArgument, "pole beyond the sampled momentum range");
  double outside = pv_outside(h, 0.0, k - delta, k) + pv_outside(h, k + delta, P, k) + pv_tail(h.tail(), P, k);
  const auto& g = gauss_legendre(16);
  double window = 0.0;
  for (int piece = 0; piece < 2; ++piece) {
    const double a = piece * delta / 2.0, b = a + delta / 2.0;
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double t = 0.0;
    for (int q = 0; q < 16; ++q) {
      const double s = mid + half * g.x[q];
      t += g.w[q] * ((h(k + s) - hk) / (s * (2.0 * k + s)) - (h(k - s) - hk) / (s * (2.0 * k - s)));
    }
    window += t * half;
  }
  window += hk / (2.0 * k) * std::log((2.0 * k - delta) / (2.0 * k + delta));
  return outside + window;
}

double principal_value_line(const std::function<double(double)>& phi, double y0, double frequency, double delta,
                            const QuadratureOptions& options) {
  const double window =
      gauss_integrate([&](double t) { return (phi(y0 + t) - phi(y0 - t)) / t; }, 0.0, delta, 24, 2);
  auto right = [&](double y) { return phi(y) / (y - y0); };
  auto left = [&](double t) { return -phi(y0 - t) / t; };
  QuadratureOptions o = options;
  o.abs_tol = std::max(options.abs_tol, 1e-12);
  const auto r = oscillatory_tail(right, y0 + delta, frequency, 0.0, o);
  const auto l = oscillatory_tail(left, delta, frequency, 0.0, o);
  return window + r.value + l.value;
}

}  // namespace bicsep
