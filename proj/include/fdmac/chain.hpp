#pragma once

// Embedded Markov chain of a head-of-line packet.
//
// States: S (successful departure), C (collision), T (header transmission)
// and the backoff counters 0..W-1. From S or C the node draws a counter
// uniformly; counter i moves to i-1 (or to T from 0) with probability alpha,
// jumps to S with probability beta (full-duplex reply during backoff) and
// otherwise stays. T goes to S with probability p and to C otherwise.

#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "fdmac/error.hpp"

namespace fdmac::chain {

inline constexpr double kProbabilitySlack = 1e-12;

struct ChainParams {
  double alpha = 0;
  double beta = 0;
  double p = 0;
  int W = 1;

  void validate() const {
    auto in_unit = [](double v, const char* name) {
      if (!(v >= -kProbabilitySlack && v <= 1 + kProbabilitySlack))
        throw InvalidArgument(std::string("chain: ") + name + " = " + std::to_string(v) +
                              " outside [0,1]");
    };
    in_unit(alpha, "alpha");
    in_unit(beta, "beta");
    in_unit(p, "p");
    if (alpha + beta > 1 + kProbabilitySlack)
      throw InvalidArgument("chain: alpha + beta = " + std::to_string(alpha + beta) + " exceeds 1");
    if (W < 1) throw InvalidArgument("chain: W must be >= 1");
    if (!(alpha + beta > 0))
      throw InvalidArgument("chain: alpha + beta = 0, backoff states have no exit");
  }
};

/// Probability vector over {S, C, T, 0..W-1}.
struct StateVector {
  double S = 0;
  double C = 0;
  double T = 0;
  std::vector<double> backoff;

  double backoff_sum() const { return std::accumulate(backoff.begin(), backoff.end(), 0.0); }
  double sum() const { return S + C + T + backoff_sum(); }

  /// Sum of backoff[from..W-1]; empty range gives 0.
  double backoff_tail(std::size_t from) const {
    if (from >= backoff.size()) return 0.0;
    return std::accumulate(backoff.begin() + static_cast<std::ptrdiff_t>(from), backoff.end(), 0.0);
  }

  double max_abs_diff(const StateVector& o) const {
    double d = std::max({std::abs(S - o.S), std::abs(C - o.C), std::abs(T - o.T)});
    for (std::size_t i = 0; i < backoff.size() && i < o.backoff.size(); ++i)
      d = std::max(d, std::abs(backoff[i] - o.backoff[i]));
    return d;
  }
};

/// Stationary distribution plus the diagnostics the solver records.
struct Stationary {
  StateVector pi;
  double u = 0;  // alpha / (alpha + beta)
  double X = 0;  // 1 - u^W
  double balance_residual = 0;
  /// Max-norm gap to the closed-form expressions; NaN when u is too close to 1
  /// for them to be evaluated.
  double closed_form_gap = std::numeric_limits<double>::quiet_NaN();
};

/// Max-norm residual of the balance equations for `pi` under `params`.
inline double balance_residual(const ChainParams& params, const StateVector& pi) {
  const double ab = params.alpha + params.beta;
  const int W = params.W;
  const double entry = (pi.S + pi.C) / W;
  double r = 0;
  for (int i = 0; i < W; ++i) {
    const double from_above = i + 1 < W ? params.alpha * pi.backoff[i + 1] : 0.0;
    r = std::max(r, std::abs(pi.backoff[i] * ab - from_above - entry));
  }
  r = std::max(r, std::abs(pi.T - params.alpha * pi.backoff[0]));
  r = std::max(r, std::abs(pi.S - params.p * pi.T - params.beta * pi.backoff_sum()));
  r = std::max(r, std::abs(pi.C - (1 - params.p) * pi.T));
  r = std::max(r, std::abs(pi.sum() - 1.0));
  return r;
}

/// Closed-form stationary distribution. Returns nullopt when u >= 1 - 1e-9,
/// where the expressions are singular.
inline std::optional<StateVector> closed_form(const ChainParams& params) {
  params.validate();
  const double a = params.alpha;
  const double b = params.beta;
  const double p = params.p;
  const int W = params.W;
  const double one_minus_u = b / (a + b);
  const double u = a / (a + b);
  if (!(u < 1 - 1e-9)) return std::nullopt;
  auto one_minus_pow = [&](int k) {
    // 1 - u^k without cancellation for u near 1.
    return u == 0 ? 1.0 : -std::expm1(k * std::log1p(-one_minus_u));
  };
  const double X = one_minus_pow(W);
  const double D = W * one_minus_u * (b + 1) - X * u * (1 - b);
  StateVector pi;
  pi.S = (W * one_minus_u * b - X * u * b * (1 - p)) / D;
  pi.T = X * u * b / D;
  pi.C = X * u * b * (1 - p) / D;
  pi.backoff.resize(static_cast<std::size_t>(W));
  for (int i = 0; i < W; ++i) pi.backoff[i] = one_minus_u * one_minus_pow(W - i) / D;
  return pi;
}

/// Solves the balance equations directly.
///
/// The backoff block is upper bidiagonal, so with the entry rate
/// K = (pi_S + pi_C) / (W (alpha + beta)) fixed at 1 the system is solved by
/// back substitution and then normalized. This is exact for every admissible
/// parameter set, including u = 1 (beta = 0).
inline Stationary steady_state(const ChainParams& params) {
  params.validate();
  const double a = params.alpha;
  const double b = params.beta;
  const int W = params.W;
  const double u = a / (a + b);

  Stationary out;
  auto& pi = out.pi;
  pi.backoff.assign(static_cast<std::size_t>(W), 0.0);
  pi.backoff[W - 1] = 1.0;
  for (int i = W - 2; i >= 0; --i) pi.backoff[i] = u * pi.backoff[i + 1] + 1.0;
  pi.T = a * pi.backoff[0];
  pi.C = (1 - params.p) * pi.T;
  pi.S = params.p * pi.T + b * pi.backoff_sum();
  const double total = pi.sum();
  pi.S /= total;
  pi.C /= total;
  pi.T /= total;
  for (double& x : pi.backoff) x /= total;

  out.u = u;
  out.X = 1 - std::pow(u, W);
  out.balance_residual = balance_residual(params, pi);
  if (auto cf = closed_form(params)) out.closed_form_gap = pi.max_abs_diff(*cf);
  return out;
}

/// Mean holding times (slots) of the chain states.
struct HoldingTimes {
  double backoff = 1;  // 1 / (alpha + beta)
  double T = 1;
  double S = 1;
  double C = 1;

  static HoldingTimes for_chain(const ChainParams& params, double T, double S, double C) {
    return HoldingTimes{1.0 / (params.alpha + params.beta), T, S, C};
  }

  static HoldingTimes unit() { return HoldingTimes{1, 1, 1, 1}; }
};

struct ChainSolution {
  StateVector pi;
  StateVector pi_tilde;
  /// Mean slots per embedded-chain step, sum_i pi_i delta_i.
  double mean_holding = 0;
  /// Limiting probability of S.
  double throughput = 0;
};

/// Reweights a stationary vector by mean holding times.
inline ChainSolution limiting_probs(const StateVector& pi, const HoldingTimes& delta) {
  for (double d : {delta.backoff, delta.T, delta.S, delta.C}) {
    if (!std::isfinite(d) || !(d > 0))
      throw InvalidArgument("limiting_probs: holding times must be positive and finite");
  }
  ChainSolution out;
  out.pi = pi;
  auto& pt = out.pi_tilde;
  pt.S = pi.S * delta.S;
  pt.C = pi.C * delta.C;
  pt.T = pi.T * delta.T;
  pt.backoff.resize(pi.backoff.size());
  for (std::size_t i = 0; i < pi.backoff.size(); ++i) pt.backoff[i] = pi.backoff[i] * delta.backoff;
  const double total = pt.sum();
  pt.S /= total;
  pt.C /= total;
  pt.T /= total;
  for (double& x : pt.backoff) x /= total;
  out.mean_holding = total;
  out.throughput = pt.S;
  return out;
}

}  // namespace fdmac::chain
