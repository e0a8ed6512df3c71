#pragma once

// Damped Picard iteration x <- (1 - g) x + g F(x) on a small fixed-size state.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

#include "fdmac/error.hpp"

namespace fdmac {

struct PicardOptions {
  double tol = 1e-10;
  int max_iters = 10000;
  double damping = 0.5;
  double fallback_damping = 0.1;
  /// Consecutive residual increases that trigger the fallback damping.
  int oscillation_window = 10;
};

template <std::size_t N>
struct PicardResult {
  std::array<double, N> x{};
  double residual = 0;
  int iterations = 0;
  bool used_fallback = false;
};

template <std::size_t N>
double max_abs_step(const std::array<double, N>& a, const std::array<double, N>& b) {
  double r = 0;
  for (std::size_t i = 0; i < N; ++i) r = std::max(r, std::abs(a[i] - b[i]));
  return r;
}

/// Iterates until max|F(x) - x| <= tol. `on_fail(x, residual, iters)` is
/// called (and must throw) when the budget runs out.
template <std::size_t N, class Map, class OnFail>
PicardResult<N> picard(Map&& F, std::array<double, N> x, const PicardOptions& opts, OnFail&& on_fail) {
  double gamma = opts.damping;
  double prev = INFINITY;
  int rising = 0;
  PicardResult<N> out;
  for (int it = 0; it < opts.max_iters; ++it) {
    const auto fx = F(x);
    const double r = max_abs_step(fx, x);
    if (!std::isfinite(r)) throw Error("fixed point: non-finite iterate");
    if (r <= opts.tol) {
      out.x = x;
      out.residual = r;
      out.iterations = it;
      return out;
    }
    rising = r > prev ? rising + 1 : 0;
    prev = r;
    if (rising >= opts.oscillation_window && gamma != opts.fallback_damping) {
      gamma = opts.fallback_damping;
      out.used_fallback = true;
      rising = 0;
    }
    for (std::size_t i = 0; i < N; ++i) x[i] = (1 - gamma) * x[i] + gamma * fx[i];
  }
  const double r = max_abs_step(F(x), x);
  on_fail(x, r, opts.max_iters);
  throw Error("fixed point: on_fail handler returned");
}

}  // namespace fdmac
