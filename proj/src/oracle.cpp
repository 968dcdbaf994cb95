#include "bicsep/oracle.hpp"

#include "bicsep/errors.hpp"
#include "bicsep/formfactor.hpp"
#include "bicsep/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <future>
#include <numbers>

namespace bicsep {

namespace {

// Tridiagonal LU with partial pivoting (dgttrf/dgttrs layout).
class TridiagonalLU {
 public:
  TridiagonalLU(Eigen::VectorXd dl, Eigen::VectorXd d, Eigen::VectorXd du)
      : dl_(std::move(dl)), d_(std::move(d)), du_(std::move(du)), du2_(Eigen::VectorXd::Zero(d_.size())),
        ipiv_(std::size_t(d_.size())) {
    const Index n = d_.size();
    for (Index i = 0; i + 1 < n; ++i) {
      ipiv_[std::size_t(i)] = i;
      if (std::abs(d_[i]) >= std::abs(dl_[i])) {
        if (d_[i] == 0.0) d_[i] = tiny();
        const double fact = dl_[i] / d_[i];
        dl_[i] = fact;
        d_[i + 1] -= fact * du_[i];
      } else {
        const double fact = d_[i] / dl_[i];
        d_[i] = dl_[i];
        dl_[i] = fact;
        const double temp = du_[i];
        du_[i] = d_[i + 1];
        d_[i + 1] = temp - fact * d_[i + 1];
        if (i + 2 < n) {
          du2_[i] = du_[i + 1];
          du_[i + 1] = -fact * du_[i + 1];
        }
        ipiv_[std::size_t(i)] = i + 1;
      }
    }
    if (d_[n - 1] == 0.0) d_[n - 1] = tiny();
  }

  Eigen::VectorXd solve(Eigen::VectorXd b) const {
    const Index n = d_.size();
    for (Index i = 0; i + 1 < n; ++i) {
      if (ipiv_[std::size_t(i)] == i) {
        b[i + 1] -= dl_[i] * b[i];
      } else {
        const double temp = b[i];
        b[i] = b[i + 1];
        b[i + 1] = temp - dl_[i] * b[i];
      }
    }
    b[n - 1] /= d_[n - 1];
    if (n > 1) b[n - 2] = (b[n - 2] - du_[n - 2] * b[n - 1]) / d_[n - 2];
    for (Index i = n - 3; i >= 0; --i) b[i] = (b[i] - du_[i] * b[i + 1] - du2_[i] * b[i + 2]) / d_[i];
    return b;
  }

 private:
  static double tiny() { return 1e-300; }
  Eigen::VectorXd dl_, d_, du_, du2_;
  std::vector<Index> ipiv_;
};

double support_of_potential(const LocalPotential* v) {
  if (v == nullptr || v->is_zero()) return 0.0;
  const auto& p = v->profile();
  // r V carries the integrability condition
  const SampledFunction rv(p.grid(), p.values().cwiseProduct(p.grid().nodes()), TailModel::none());
  return effective_support(rv);
}

BoxResult solve_box(const LocalPotential* v, const SampledFunction& u, int epsilon, double k0, double L,
                    double support_region, const ScanOptions& o) {
  const double e0 = k0 * k0;
  const Index n = Index(std::llround(L / o.h)) - 1;
  const auto H = assemble(v, u, epsilon, L, n, k0, o.assemble);
  BoxResult box;
  box.L = L;
  box.window = std::max(0.05, 3.0 * std::pow(std::numbers::pi / L, 2) * 2.0 * k0);
  const Eigen::VectorXd ev = H.eigenvalues_in(e0 - box.window, e0 + box.window);
  const double hn = H.norm_estimate();
  const double h = H.step();
  for (Index i = 0; i < ev.size(); ++i) {
    if (std::abs(ev[i] - e0) >= box.window) continue;
    const Eigen::VectorXd vec = H.eigenvector(ev[i]);
    BoxLevel lv;
    lv.lambda = ev[i];
    const double s2 = vec.squaredNorm();
    lv.participation = s2 * s2 / (double(vec.size()) * vec.array().pow(4).sum());
    double tail = 0.0;
    for (Index j = 0; j < vec.size(); ++j)
      if (double(j + 1) * h > support_region) tail += vec[j] * vec[j];
    lv.tail_mass = tail / s2;
    lv.residual = (H.apply(vec) - ev[i] * vec).norm() / hn;
    box.levels.push_back(lv);
  }
  for (const auto& lv : box.levels)
    if (!box.candidate || lv.tail_mass < box.candidate->tail_mass) box.candidate = lv;
  return box;
}

// Composite Simpson on f_0..f_m with uniform step h; 3/8 rule closes an odd interval count.
double simpson(const Eigen::VectorXd& f, double h) {
  const Index m = f.size() - 1;
  if (m < 1) return 0.0;
  if (m == 1) return 0.5 * h * (f[0] + f[1]);
  const Index even = (m % 2 == 0) ? m : m - 3;
  double s = 0.0;
  for (Index i = 0; i + 2 <= even; i += 2) s += f[i] + 4.0 * f[i + 1] + f[i + 2];
  s *= h / 3.0;
  if (even != m) s += 3.0 * h / 8.0 * (f[m - 3] + 3.0 * f[m - 2] + 3.0 * f[m - 1] + f[m]);
  return s;
}

}  // namespace

double effective_support(const SampledFunction& u, double fraction) {
  const auto& x = u.grid().nodes();
  const Index n = x.size();
  Eigen::VectorXd tail(n);
  const auto& t = u.tail();
  tail[n - 1] = (t.kind == TailModel::Kind::exponential || t.kind == TailModel::Kind::algebraic)
                    ? std::abs(t.integral_from(x[n - 1]))
                    : 0.0;
  for (Index i = n - 2; i >= 0; --i)
    tail[i] = tail[i + 1] +
              gauss_integrate([&](double r) { return std::abs(u.eval_segment(i, r)); }, x[i], x[i + 1], 8);
  const double total = tail[0] + std::abs(u.values()[0]) * x[0];
  if (total == 0.0) return x[0];
  for (Index i = 0; i < n; ++i)
    if (tail[i] <= fraction * total) return x[i];
  return x[n - 1];
}

BoxHamiltonian::BoxHamiltonian(Eigen::VectorXd diagonal, double off, Eigen::VectorXd w, int epsilon, double L)
    : diag_(std::move(diagonal)), off_(off), w_(std::move(w)), eps_(epsilon), L_(L) {
  if (diag_.size() != w_.size() || diag_.size() < 2) raise(ErrorCode::InvalidArgument, "box sizes disagree");
}

Eigen::MatrixXd BoxHamiltonian::dense() const {
  const Index n = size();
  Eigen::MatrixXd m = double(eps_) * w_ * w_.transpose();
  for (Index i = 0; i < n; ++i) {
    m(i, i) += diag_[i];
    if (i + 1 < n) {
      m(i, i + 1) += off_;
      m(i + 1, i) += off_;
    }
  }
  return m;
}

Eigen::VectorXd BoxHamiltonian::apply(const Eigen::VectorXd& x) const {
  const Index n = size();
  Eigen::VectorXd y = diag_.cwiseProduct(x) + double(eps_) * w_.dot(x) * w_;
  for (Index i = 0; i + 1 < n; ++i) {
    y[i] += off_ * x[i + 1];
    y[i + 1] += off_ * x[i];
  }
  return y;
}

Eigen::VectorXd BoxHamiltonian::eigenvalues() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense(), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) raise(ErrorCode::ToleranceNotMet, "eigensolver did not converge");
  return es.eigenvalues();
}

Index BoxHamiltonian::count_below(double x) const {
  // LDL^T of T - x; s = w^T (T - x)^{-1} w = z^T D^{-1} z
  const Index n = size();
  const double b2 = off_ * off_;
  Index neg = 0;
  double d = 0.0, z = 0.0, s = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (i == 0) {
      d = diag_[0] - x;
      z = w_[0];
    } else {
      const double l = off_ / d;
      d = diag_[i] - x - b2 / d;
      z = w_[i] - l * z;
    }
    if (d == 0.0) d = -1e-300;
    if (d < 0.0) ++neg;
    s += z * z / d;
  }
  // sign det(M) = sign det(T - x) * sign(1 + eps s); the update moves the count by at most one
  if (eps_ < 0) return neg + (1.0 - s < 0.0 ? 1 : 0);
  if (eps_ > 0) return neg - (1.0 + s < 0.0 ? 1 : 0);
  return neg;
}

Eigen::VectorXd BoxHamiltonian::eigenvalues_in(double lo, double hi) const {
  std::vector<double> out;
  struct Bracket {
    double a, b;
    Index ca, cb;
  };
  std::vector<Bracket> stack{{lo, hi, count_below(lo), count_below(hi)}};
  while (!stack.empty()) {
    auto [a, b, ca, cb] = stack.back();
    stack.pop_back();
    if (cb <= ca) continue;
    if (b - a <= 4e-16 * std::max({1.0, std::abs(a), std::abs(b)})) {
      for (Index j = ca; j < cb; ++j) out.push_back(0.5 * (a + b));
      continue;
    }
    const double m = 0.5 * (a + b);
    const Index cm = count_below(m);
    stack.push_back({m, b, cm, cb});
    stack.push_back({a, m, ca, cm});
  }
  std::sort(out.begin(), out.end());
  return Eigen::Map<const Eigen::VectorXd>(out.data(), Index(out.size()));
}

double BoxHamiltonian::norm_estimate() const {
  const double wl1 = w_.cwiseAbs().sum();
  double m = 0.0;
  for (Index i = 0; i < size(); ++i) m = std::max(m, std::abs(diag_[i]) + 2.0 * std::abs(off_) + std::abs(w_[i]) * wl1);
  return m;
}

Eigen::VectorXd BoxHamiltonian::eigenvector(double lambda) const {
  const Index n = size();
  const double sigma = lambda + 1e-10 * std::max(1.0, std::abs(lambda));
  const TridiagonalLU lu(Eigen::VectorXd::Constant(n - 1, off_), diag_.array() - sigma,
                         Eigen::VectorXd::Constant(n - 1, off_));
  const Eigen::VectorXd z = lu.solve(w_);
  const double denom = 1.0 + double(eps_) * w_.dot(z);
  Eigen::VectorXd x(n);
  for (Index i = 0; i < n; ++i) x[i] = 1.0 + 0.1 * std::sin(0.7 * double(i));
  x.normalize();
  for (int it = 0; it < 4; ++it) {
    const Eigen::VectorXd y = lu.solve(x);
    x = y - double(eps_) * z * (w_.dot(y) / denom);
    x.normalize();
  }
  return x;
}

BoxHamiltonian assemble(const LocalPotential* v, const SampledFunction& u, int epsilon, double L, Index n,
                        double k_target, const AssembleOptions& o) {
  if (epsilon != 1 && epsilon != -1 && epsilon != 0) raise(ErrorCode::InvalidArgument, "epsilon must be +1, -1 or 0");
  if (!(L > 0.0) || n < 2) raise(ErrorCode::InvalidArgument, "box length and size must be positive");
  if (double(n) < o.resolution * L * k_target / std::numbers::pi)
    raise(ErrorCode::ResolutionTooLow, "n below 20 L k / pi");
  const double support = std::max(u.values().cwiseAbs().maxCoeff() > 0.0 ? effective_support(u) : 0.0,
                                  support_of_potential(v));
  if (L < o.support_factor * support) raise(ErrorCode::InvalidArgument, "box shorter than 4x the effective support");
  const double h = L / double(n + 1);
  Eigen::VectorXd d(n), w(n);
  const double sh = std::sqrt(h);
  for (Index i = 0; i < n; ++i) {
    const double r = double(i + 1) * h;
    d[i] = 2.0 / (h * h) + (v ? (*v)(r) : 0.0);
    w[i] = sh * u(r);
  }
  return BoxHamiltonian(std::move(d), -1.0 / (h * h), std::move(w), epsilon, L);
}

const char* to_string(ScanVerdict v) {
  switch (v) {
    case ScanVerdict::confirmed:
      return "confirmed";
    case ScanVerdict::refuted:
      return "refuted";
    case ScanVerdict::ambiguous:
      return "ambiguous";
  }
  return "?";
}

SpectralScan embedded_scan(const LocalPotential* v, const SampledFunction& u, int epsilon, double k0,
                           const ScanOptions& o) {
  if (o.lengths.empty()) raise(ErrorCode::InvalidArgument, "no box lengths");
  SpectralScan scan;
  scan.k0 = k0;
  const double eu = u.values().cwiseAbs().maxCoeff() > 0.0 ? effective_support(u) : 0.0;
  scan.support_region = o.support_multiple * std::max(eu, support_of_potential(v));
  const double e0 = k0 * k0;
  std::vector<std::future<BoxResult>> jobs;
  for (double L : o.lengths)
    jobs.push_back(std::async(std::launch::async, [&, L] {
      return solve_box(v, u, epsilon, k0, L, scan.support_region, o);
    }));
  for (auto& j : jobs) scan.boxes.push_back(j.get());
  std::size_t localized = 0, borderline = 0;
  for (const auto& b : scan.boxes) {
    if (!b.candidate) continue;
    if (b.candidate->tail_mass < o.tail_limit) ++localized;
    else if (b.candidate->tail_mass < o.ambiguous_limit) ++borderline;
  }
  const std::size_t nb = scan.boxes.size();
  if (localized == nb) {
    bool steady = true;
    for (std::size_t i = 0; i + 1 < nb; ++i) {
      const double d = std::abs(scan.boxes[i + 1].candidate->lambda - scan.boxes[i].candidate->lambda);
      const double c = e0 * (1.0 - std::pow(scan.boxes[i].L / scan.boxes[i + 1].L, 2));
      scan.drift.push_back(d);
      scan.continuum_shift.push_back(c);
      if (!(d < o.drift_fraction * c) || !(d < scan.boxes[i].window / 5.0)) steady = false;
    }
    scan.verdict = steady ? ScanVerdict::confirmed : ScanVerdict::ambiguous;
    scan.reason = steady ? "localized level stays put while the continuum shifts"
                         : "localized level drifts with the box";
  } else if (localized == 0 && borderline == 0) {
    scan.verdict = ScanVerdict::refuted;
    scan.reason = "no localized level near k0^2 in any box";
  } else {
    scan.verdict = ScanVerdict::ambiguous;
    scan.reason = "localization differs between boxes or is borderline";
  }
  return scan;
}

CandidateWavefunction candidate_wavefunction(const SampledFunction& u, int epsilon, double k, const CandidateOptions& o) {
  if (!(k > 0.0)) raise(ErrorCode::InvalidArgument, "k0 must be positive");
  if (epsilon != 1 && epsilon != -1) raise(ErrorCode::InvalidArgument, "epsilon must be +1 or -1");
  const double R = u.grid().r_max();
  const double supp = effective_support(u);
  // far enough out that an oscillating tail beyond 5x the support is visible
  const double span = std::max(R, 10.0 * supp);
  const auto N = static_cast<Index>(std::floor(span / o.h + 1e-9));
  Eigen::VectorXd r(N), sn(N), cs(N), uu(N);
  for (Index i = 0; i < N; ++i) r[i] = double(i + 1) * o.h;
  const auto& gl = gauss_legendre(8);
  auto seg = [&](double a, double b, auto&& trig) {
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double s = 0.0;
    for (std::size_t q = 0; q < gl.x.size(); ++q) {
      const double t = mid + half * gl.x[q];
      s += gl.w[q] * u(t) * trig(t);
    }
    return s * half;
  };
  auto sink = [k](double t) { return std::sin(k * t); };
  auto cosk = [k](double t) { return std::cos(k * t); };
  // int_0^r_i U cos, then C(r) = total - that
  Eigen::VectorXd gc(N);
  sn[0] = seg(0.0, r[0], sink);
  gc[0] = seg(0.0, r[0], cosk);
  for (Index i = 1; i < N; ++i) {
    sn[i] = sn[i - 1] + seg(r[i - 1], r[i], sink);
    gc[i] = gc[i - 1] + seg(r[i - 1], r[i], cosk);
  }
  double total = tail_integral(u.tail(), OscillatoryWeight::cosine(k));
  const auto& x = u.grid().nodes();
  total += seg(0.0, x[0], cosk);
  for (Index i = 0; i + 1 < x.size(); ++i) total += seg(x[i], x[i + 1], cosk);
  cs = total - gc.array();
  Eigen::VectorXd chi(N), prod(N);
  for (Index i = 0; i < N; ++i) {
    uu[i] = u(r[i]);
    chi[i] = -(std::cos(k * r[i]) * sn[i] + std::sin(k * r[i]) * cs[i]) / k;
    prod[i] = uu[i] * chi[i];
  }
  const RadialGrid grid(r);
  // chi(0) = 0, so both integrands start from zero at the origin
  Eigen::VectorXd f0 = Eigen::VectorXd::Zero(N + 1);
  f0.tail(N) = prod;
  const double overlap = simpson(f0, o.h) + fit_tail(r, prod).integral_from(r[N - 1]);
  f0.tail(N) = chi.cwiseAbs2();
  const double norm2 = simpson(f0, o.h);
  const double c = 1.0 / std::sqrt(norm2);
  CandidateWavefunction out;
  Eigen::VectorXd psi = double(epsilon) * c * chi;
  out.self_consistency = double(epsilon) * overlap - 1.0;
  // psi'' + k^2 psi - eps U <U, psi>
  const double u_psi = double(epsilon) * c * overlap;
  for (Index i = 2; i + 2 < N; ++i) {
    const double res = std::abs(second_derivative(r, psi, i) + k * k * psi[i] - double(epsilon) * uu[i] * u_psi);
    out.residual = std::max(out.residual, res);
  }
  const double cut = 5.0 * supp;
  const SampledFunction p2(grid, psi.cwiseAbs2(), TailModel::none());
  out.tail_mass = cut < r[N - 1] ? integrate_interval(p2, cut, r[N - 1]) / integrate_interval(p2, 0.0, r[N - 1]) : 0.0;
  out.psi = SampledFunction(grid, std::move(psi), TailModel::none());
  if (out.tail_mass > o.tail_limit)
    raise(ErrorCode::TailNotDecaying, "candidate wavefunction keeps " + std::to_string(out.tail_mass) +
                                          " of its norm beyond 5x the support of U");
  return out;
}

}  // namespace bicsep
