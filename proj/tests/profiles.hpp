#pragma once

#include "bicsep/errors.hpp"
#include "bicsep/grid.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace bicsep::testing {

inline constexpr double pi = std::numbers::pi;

inline const RadialGrid& grid() {
  static const RadialGrid g = RadialGrid::standard();
  return g;
}

inline SampledFunction exponential(double a = 1.0, double c = 1.0) {
  return SampledFunction::sample(grid(), [a, c](double r) { return c * std::exp(-a * r); }, TailModel::exponential(a));
}

inline SampledFunction tent(double radius = 1.0, double c = 1.0) {
  const auto g = grid().with_nodes(std::vector<double>{radius});
  return SampledFunction::sample(
      g, [=](double r) { return c * std::max(0.0, 1.0 - r / radius); }, TailModel::compact(radius),
      SampledFunction::Options{.breakpoints = {radius}});
}

// e^{-r}(1 - 2r): changes sign at r = 1/2.
inline SampledFunction signed_exponential() {
  return SampledFunction::sample(grid(), [](double r) { return std::exp(-r) * (1.0 - 2.0 * r); },
                                 TailModel::exponential(1.0));
}

// A e^{-2r}(1 - 5r/4); U~ vanishes at k = 1 and D(1) = 0 for eps = -1.
inline const double engineered_amplitude = std::sqrt(1024.0 / 6.0);
inline SampledFunction engineered(double scale = 1.0) {
  const double A = engineered_amplitude * scale;
  return SampledFunction::sample(grid(), [A](double r) { return A * std::exp(-2.0 * r) * (1.0 - 1.25 * r); },
                                 TailModel::exponential(2.0));
}

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::InvalidArgument;
}

}  // namespace bicsep::testing
