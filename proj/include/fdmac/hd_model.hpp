#pragma once

// Half-duplex RTS/CTS baseline: the same head-of-line chain with the
// full-duplex transitions removed (beta = 0 for clients and AP). A header
// attempt is now an RTS; it fails on a same-slot start by the AP or a covered
// client, or on an RTS from a hidden client inside the RTS vulnerable period.
// Clients hearing the AP's CTS hold off for the rest of the exchange, so a
// client hidden from the sender observes the exchange minus the RTS.

#include <array>
#include <cmath>

#include "fdmac/chain.hpp"
#include "fdmac/error.hpp"
#include "fdmac/fd_model.hpp"
#include "fdmac/fixed_point.hpp"
#include "fdmac/timing.hpp"

namespace fdmac::hd {

struct Scenario {
  int n = 1;
  int n_c = 0;
  int n_h = 0;
  int W = 1;
  HdTiming timing;

  static Scenario symmetric(int n, int n_h, int W, const HdTiming& timing) {
    return Scenario{n, n - 1 - n_h, n_h, W, timing};
  }

  void validate() const {
    if (n < 1) throw InvalidArgument("hd scenario: n must be >= 1");
    if (n_c < 0 || n_h < 0 || n_c + n_h != n - 1)
      throw InvalidArgument("hd scenario: n_c + n_h must equal n - 1");
    if (timing.rts < 1 || timing.cts < 1) throw InvalidArgument("hd scenario: RTS/CTS must be >= 1 slot");
    if (W < timing.rts)
      throw InvalidArgument("hd scenario: W = " + std::to_string(W) + " is below the RTS length");
  }
};

struct Solution {
  double omega = 0, omega_ap = 0, nu = 0;
  double alpha = 0, p = 0;
  double alpha_ap = 0, p_ap = 0;
  double tau_c = 0;
  chain::ChainSolution client_chain;
  chain::ChainSolution ap_chain;
  double throughput_client = 0;
  double throughput_ap = 0;
  double throughput_system = 0;
  double residual = 0;
  int iterations = 0;
};

struct ChainInputs {
  double alpha = 0, p = 0, alpha_ap = 0, p_ap = 0;
};

inline ChainInputs chain_inputs(const std::array<double, 3>& x, const Scenario& s) {
  const auto [omega, omega_ap, nu] = x;
  for (auto [name, v] : {std::pair{"omega", omega}, {"omega_ap", omega_ap}, {"nu", nu}})
    fd::detail::require_unit(name, v);
  const auto& t = s.timing;
  const double n = s.n;
  const double exchange = static_cast<double>(t.exchange());
  const double from_cts = exchange - static_cast<double>(t.rts);
  // Collisions involve RTS frames only.
  const double tau_c = static_cast<double>(t.rts);

  const double g = omega * (1 - omega_ap);
  const double nu_h = std::pow(nu, s.n_h);
  const double covered_success = fd::detail::weighted_pow(g * nu_h, 1 - omega, s.n_c - 1);
  const double hidden_success =
      fd::detail::weighted_pow(s.n_h * g * std::pow(1 - omega, s.n_c), nu, s.n_h - 1);
  // Heard from the RTS: exchanges started by a covered client or by the AP.
  const double full = s.n_c * covered_success + omega_ap * std::pow(1 - omega, s.n - 1);
  const double idle = std::pow(1 - omega, s.n_c) * (1 - omega_ap) * (1 - hidden_success);

  ChainInputs in;
  const double denom =
      1 + (exchange - tau_c) * full + (from_cts - tau_c) * hidden_success + tau_c * (1 - idle);
  if (!(denom > 0)) throw InfeasibleModel("hd alpha denominator", denom);
  in.alpha = 1 / denom;
  in.p = (1 - omega_ap) * std::pow(1 - omega, s.n_c) * nu_h;

  const double z = n * omega * std::pow(1 - omega, s.n_c) * nu_h;
  in.p_ap = std::pow(1 - omega, s.n);
  const double denom_ap = 1 + (exchange - tau_c) * z + tau_c * (1 - in.p_ap);
  if (!(denom_ap > 0)) throw InfeasibleModel("hd alpha_ap denominator", denom_ap);
  in.alpha_ap = 1 / denom_ap;
  fd::detail::require_unit("hd alpha", in.alpha);
  fd::detail::require_unit("hd alpha_ap", in.alpha_ap);
  fd::detail::require_unit("hd p", in.p);
  return in;
}

inline std::array<double, 3> iterate(const std::array<double, 3>& x, const Scenario& s) {
  const auto in = chain_inputs(x, s);
  const auto client = chain::steady_state({in.alpha, 0.0, in.p, s.W});
  const auto ap = chain::steady_state({in.alpha_ap, 0.0, in.p_ap, s.W});
  return {client.pi.T, ap.pi.T, client.pi.backoff_tail(static_cast<std::size_t>(s.timing.rts))};
}

inline Solution evaluate(const std::array<double, 3>& x, const Scenario& s) {
  const auto in = chain_inputs(x, s);
  const auto& t = s.timing;
  Solution sol;
  sol.omega = x[0];
  sol.omega_ap = x[1];
  sol.nu = x[2];
  sol.alpha = in.alpha;
  sol.p = in.p;
  sol.alpha_ap = in.alpha_ap;
  sol.p_ap = in.p_ap;
  sol.tau_c = static_cast<double>(t.rts);
  const double after_rts = static_cast<double>(t.exchange() - t.rts);
  const double sigma = static_cast<double>(t.mac.sigma);
  const chain::ChainParams cp{in.alpha, 0.0, in.p, s.W};
  const chain::ChainParams ap{in.alpha_ap, 0.0, in.p_ap, s.W};
  sol.client_chain = chain::limiting_probs(
      chain::steady_state(cp).pi,
      chain::HoldingTimes::for_chain(cp, static_cast<double>(t.rts), after_rts, sigma));
  sol.ap_chain = chain::limiting_probs(
      chain::steady_state(ap).pi,
      chain::HoldingTimes::for_chain(ap, static_cast<double>(t.rts), after_rts, sigma));
  sol.throughput_client = fd::payload_rate(sol.client_chain, t.mac.payload);
  sol.throughput_ap = fd::payload_rate(sol.ap_chain, t.mac.payload);
  sol.throughput_system = s.n * sol.throughput_client + sol.throughput_ap;
  sol.residual = max_abs_step(iterate(x, s), x);
  return sol;
}

inline Solution solve_hd(const Scenario& s, const PicardOptions& opts = {}) {
  s.validate();
  const double w = 2.0 / (s.W + 1);
  std::array<double, 3> x{w, w, std::pow(1 - w, static_cast<double>(s.timing.rts))};
  auto F = [&](const std::array<double, 3>& v) { return iterate(v, s); };
  const auto res = picard<3>(F, x, opts, [](const std::array<double, 3>& v, double r, int it) {
    throw NonConvergence(v[0], v[1], v[2], r, it);
  });
  auto sol = evaluate(res.x, s);
  sol.iterations = res.iterations;
  return sol;
}

/// Ratio of full-duplex to half-duplex system throughput.
inline double fd_gain(double fd_system, double hd_system) {
  if (!(fd_system > 0) || !(hd_system > 0))
    throw InvalidArgument("fd_gain: throughputs must be positive");
  return fd_system / hd_system;
}

inline double fd_gain(const fd::Solution& fd_sol, const Solution& hd_sol) {
  return fd_gain(fd_sol.throughput_system, hd_sol.throughput_system);
}

inline fd::TopologyEstimate random_topology_estimate(const Topology& topo, int W, const HdTiming& timing,
                                                     const PicardOptions& opts = {}) {
  return fd::average_over_clients(topo, [&](int n_c, int n_h) {
    return solve_hd(Scenario{topo.n(), n_c, n_h, W, timing}, opts).throughput_system;
  });
}

}  // namespace fdmac::hd
