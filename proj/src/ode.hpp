#pragma once

#include "bicsep/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace bicsep::detail {

// Dormand-Prince 5(4) with local extrapolation, fixed small dimension.
template <std::size_t N>
class DormandPrince {
 public:
  using State = std::array<double, N>;

  DormandPrince(double rtol, double atol, int max_steps) : rtol_(rtol), atol_(atol), max_steps_(max_steps) {}

  // Advance y from a to b; h is the suggested step, updated on return.
  template <class Rhs>
  void advance(Rhs&& f, double a, double b, State& y, double& h) const {
    if (b == a) return;
    const double dir = b > a ? 1.0 : -1.0;
    double t = a;
    h = std::min(std::abs(h), std::abs(b - a));
    int steps = 0;
    State k1, k2, k3, k4, k5, k6, k7, tmp, y5;
    f(t, y, k1);
    while (dir * (b - t) > 0.0) {
      if (++steps > max_steps_) raise(ErrorCode::StiffnessFailure, "step count exceeded");
      double step = std::min(h, std::abs(b - t));
      const bool last = step >= std::abs(b - t) * (1.0 - 1e-14);
      const double hs = dir * step;
      for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + hs * (a21 * k1[i]);
      f(t + c2 * hs, tmp, k2);
      for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + hs * (a31 * k1[i] + a32 * k2[i]);
      f(t + c3 * hs, tmp, k3);
      for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + hs * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
      f(t + c4 * hs, tmp, k4);
      for (std::size_t i = 0; i < N; ++i)
        tmp[i] = y[i] + hs * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
      f(t + c5 * hs, tmp, k5);
      for (std::size_t i = 0; i < N; ++i)
        tmp[i] = y[i] + hs * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
      f(last ? b : t + hs, tmp, k6);
      for (std::size_t i = 0; i < N; ++i)
        y5[i] = y[i] + hs * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
      const double tn = last ? b : t + hs;
      f(tn, y5, k7);
      double err = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        const double e = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        const double sc = atol_ + rtol_ * std::max(std::abs(y[i]), std::abs(y5[i]));
        err = std::max(err, std::abs(e) / sc);
      }
      if (err <= 1.0) {
        t = tn;
        y = y5;
        k1 = k7;
        const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        if (!last || fac < 1.0) h = step * fac;
      } else {
        h = step * std::max(0.2, 0.9 * std::pow(err, -0.2));
      }
      if (h < 1e-15 * std::max(1.0, std::abs(t))) raise(ErrorCode::StiffnessFailure, "step size collapsed");
    }
  }

 private:
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  // fifth minus fourth order weights
  static constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                          e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                          e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

  double rtol_, atol_;
  int max_steps_;
};

}  // namespace bicsep::detail
