#pragma once

// Steady-state analytical model of the full-duplex MAC.
//
// Every client sees n_c covered and n_h hidden clients. The unknowns are the
// per-slot attempt probabilities of a client (omega) and of the AP
// (omega_ap), and nu, the probability that a client will not attempt within
// the next tau_V slots. Given them, the channel-idle, full-duplex-entry and
// success probabilities of the client and AP chains follow in closed form;
// the chains in turn return new (omega, omega_ap, nu).

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "fdmac/chain.hpp"
#include "fdmac/error.hpp"
#include "fdmac/fixed_point.hpp"
#include "fdmac/rng.hpp"
#include "fdmac/timing.hpp"
#include "fdmac/topology.hpp"

namespace fdmac::fd {

/// Which expression supplies the mean collision time tau_C seen by a client.
enum class CollisionTimeModel {
  /// The published closed form, coefficients taken as printed.
  printed,
  /// Rebuilt from the three collision cases: covered pair (H), hidden pair
  /// (3H/2), both colliders hidden from the observer (0).
  three_case,
};

inline std::string to_string(CollisionTimeModel m) {
  return m == CollisionTimeModel::printed ? "printed" : "three_case";
}

inline CollisionTimeModel collision_model_from_string(const std::string& s) {
  if (s == "printed") return CollisionTimeModel::printed;
  if (s == "three_case") return CollisionTimeModel::three_case;
  throw InvalidArgument("unknown collision time model '" + s + "'");
}

struct Scenario {
  int n = 1;
  int n_c = 0;
  int n_h = 0;
  int W = 1;
  MacTiming timing;

  static Scenario symmetric(int n, int n_h, int W, const MacTiming& timing) {
    return Scenario{n, n - 1 - n_h, n_h, W, timing};
  }

  void validate() const {
    if (n < 1) throw InvalidArgument("scenario: n must be >= 1");
    if (n_c < 0 || n_h < 0 || n_c + n_h != n - 1)
      throw InvalidArgument("scenario: n_c + n_h must equal n - 1");
    if (W < 1) throw InvalidArgument("scenario: W must be >= 1");
    if (W < timing.tau_v)
      throw InvalidArgument("scenario: W = " + std::to_string(W) + " is below tau_V = " +
                            std::to_string(timing.tau_v));
  }
};

struct SolverOptions {
  PicardOptions picard;
  CollisionTimeModel collision_model = CollisionTimeModel::printed;
};

struct ClientAlpha {
  double alpha = 0;
  double Y1 = 0, Y2 = 0, Y3 = 0, Y4 = 0;
};

struct ApAlpha {
  double alpha_ap = 0;
  double Z1 = 0;
  double p_ap = 0;
};

struct CollisionTimes {
  double tau_c = 0;
  double tau_c_ap = 0;
  double delta_c = 0;
  double delta_c_ap = 0;
  double delta_s = 0;
  double delta_s_ap = 0;
  double delta_t = 0;
};

namespace detail {

// coeff * base^exp, taken as 0 when coeff is 0 so that 0 * 0^-1 never arises.
inline double weighted_pow(double coeff, double base, int exp) {
  return coeff == 0 ? 0.0 : coeff * std::pow(base, exp);
}

inline void require_unit(const char* name, double v) {
  if (!(v >= -chain::kProbabilitySlack && v <= 1 + chain::kProbabilitySlack))
    throw InfeasibleModel(name, v);
}

}  // namespace detail

inline CollisionTimes collision_times(const Scenario& s,
                                      CollisionTimeModel model = CollisionTimeModel::printed) {
  const double n = s.n, nc = s.n_c, nh = s.n_h;
  const double H = static_cast<double>(s.timing.header);
  const auto& t = s.timing;
  CollisionTimes c;
  if (s.n == 1) {
    // No peers: only covered-style collisions with the AP exist.
    c.tau_c = H;
    c.tau_c_ap = H;
  } else {
    const double pairs = n * (n - 1);
    c.tau_c_ap = nc * n / pairs * H + nh * n / pairs * (1.5 * H);
    if (model == CollisionTimeModel::printed) {
      c.tau_c = (nc * nc + 2 * nc * nh + 2 * nh) / pairs * H + (nc * nc - 2 * nc) / pairs * (1.5 * H);
    } else {
      // Pick the two colliders at random; each is audible to the observer
      // (itself or a covered client) with probability (n_c + 1) / n.
      const double q = (nc + 1) / n;
      const double audible = 1 - (1 - q) * (1 - q);
      c.tau_c = audible * (nc / (n - 1) * H + nh / (n - 1) * 1.5 * H);
    }
  }
  c.delta_t = H;
  c.delta_s_ap = static_cast<double>(t.tau_f) - H;
  c.delta_s = (1 / n) * (t.tau_f - H) + (1 - 1 / n) * (t.tau_h - H);
  c.delta_c = nh / (n + 1) * (t.tau_v / 2.0) + (nc + 1) / (n + 1) * t.sigma;
  c.delta_c_ap = static_cast<double>(t.sigma);
  return c;
}

/// Channel-idle probability of a client and its intermediates Y1..Y4.
inline ClientAlpha client_alpha(double omega, double omega_ap, double nu, const Scenario& s,
                                double tau_c) {
  const double n = s.n;
  const int nc = s.n_c, nh = s.n_h;
  const auto& t = s.timing;
  const double g = omega * (1 - omega_ap);
  const double nu_h = std::pow(nu, nh);
  // A hidden client's attempt that succeeds (its AP reply is then heard).
  const double hidden_success = detail::weighted_pow(nh * g * std::pow(1 - omega, nc), nu, nh - 1);
  const double covered_success = detail::weighted_pow(g * nu_h, 1 - omega, nc - 1);

  ClientAlpha a;
  a.Y1 = nc / n * covered_success + omega_ap * std::pow(1 - omega, s.n - 1);
  a.Y2 = nc * (n - 1) / n * covered_success + hidden_success / n;
  a.Y3 = (n - 1) / n * hidden_success;
  a.Y4 = std::pow(1 - omega, nc) * (1 - omega_ap) * (1 - hidden_success);
  const double denom = 1 + (t.tau_f - tau_c) * a.Y1 + (t.tau_h - tau_c) * a.Y2 +
                       (t.tau_a - tau_c) * a.Y3 + tau_c * (1 - a.Y4);
  if (!(denom > 0)) throw InfeasibleModel("alpha denominator", denom);
  a.alpha = 1 / denom;
  detail::require_unit("alpha", a.alpha);
  return a;
}

/// Channel-idle probability of the AP, with Z1 and the AP success probability.
inline ApAlpha ap_alpha(double omega, double nu, const Scenario& s, double tau_c_ap) {
  ApAlpha a;
  a.Z1 = (s.n - 1) * omega * std::pow(1 - omega, s.n_c) * std::pow(nu, s.n_h);
  a.p_ap = std::pow(1 - omega, s.n);
  const double denom =
      1 + (static_cast<double>(s.timing.tau_h) - tau_c_ap) * a.Z1 + tau_c_ap * (1 - a.p_ap);
  if (!(denom > 0)) throw InfeasibleModel("alpha_ap denominator", denom);
  a.alpha_ap = 1 / denom;
  detail::require_unit("alpha_ap", a.alpha_ap);
  return a;
}

/// Full-duplex entry during backoff (beta) and header success (p) of a client.
inline std::pair<double, double> client_beta_p(double omega, double omega_ap, double nu,
                                               const Scenario& s) {
  const double beta = omega_ap * std::pow(1 - omega, s.n - 1) / s.n;
  const double p = (1 - omega_ap) * std::pow(1 - omega, s.n_c) * std::pow(nu, s.n_h);
  return {beta, p};
}

/// Probability that the AP answers some client's header in full duplex.
inline double ap_beta(double omega, double nu, const Scenario& s) {
  return s.n * (1.0 / s.n) * omega * std::pow(1 - omega, s.n_c) * std::pow(nu, s.n_h);
}

/// Probability that a client hears only the AP's full-duplex reply to one of
/// its hidden clients.
inline double nu_ap(double omega, double omega_ap, double nu, const Scenario& s) {
  return s.n_h * omega * (1 - omega_ap) * std::pow(1 - omega, s.n_c) * std::pow(nu, s.n_h);
}

struct Solution {
  double omega = 0, omega_ap = 0, nu = 0, nu_ap = 0;
  double alpha = 0, beta = 0, p = 0;
  double alpha_ap = 0, beta_ap = 0, p_ap = 0;
  double Y1 = 0, Y2 = 0, Y3 = 0, Y4 = 0, Z1 = 0;
  double tau_c = 0, tau_c_ap = 0;
  CollisionTimes times;
  chain::ChainSolution client_chain;
  chain::ChainSolution ap_chain;
  /// Normalized payload throughput (delivered payload airtime per slot).
  double throughput_client = 0;
  double throughput_ap = 0;
  double throughput_system = 0;
  double residual = 0;
  int iterations = 0;
};

/// All chain inputs implied by one (omega, omega_ap, nu) point.
struct ChainInputs {
  ClientAlpha client;
  ApAlpha ap;
  double beta = 0, p = 0, beta_ap = 0;
  CollisionTimes times;

  chain::ChainParams client_params(int W) const { return {client.alpha, beta, p, W}; }
  chain::ChainParams ap_params(int W) const { return {ap.alpha_ap, beta_ap, ap.p_ap, W}; }
};

inline ChainInputs chain_inputs(const std::array<double, 3>& x, const Scenario& s,
                                CollisionTimeModel model) {
  const auto [omega, omega_ap, nu] = x;
  detail::require_unit("omega", omega);
  detail::require_unit("omega_ap", omega_ap);
  detail::require_unit("nu", nu);
  ChainInputs in;
  in.times = collision_times(s, model);
  in.client = client_alpha(omega, omega_ap, nu, s, in.times.tau_c);
  in.ap = ap_alpha(omega, nu, s, in.times.tau_c_ap);
  std::tie(in.beta, in.p) = client_beta_p(omega, omega_ap, nu, s);
  in.beta_ap = ap_beta(omega, nu, s);
  detail::require_unit("beta", in.beta);
  detail::require_unit("p", in.p);
  detail::require_unit("beta_ap", in.beta_ap);
  if (in.client.alpha + in.beta > 1 + chain::kProbabilitySlack)
    throw InfeasibleModel("alpha + beta", in.client.alpha + in.beta);
  if (in.ap.alpha_ap + in.beta_ap > 1 + chain::kProbabilitySlack)
    throw InfeasibleModel("alpha_ap + beta_ap", in.ap.alpha_ap + in.beta_ap);
  return in;
}

/// One application of the fixed-point map.
inline std::array<double, 3> iterate(const std::array<double, 3>& x, const Scenario& s,
                                     CollisionTimeModel model = CollisionTimeModel::printed) {
  const auto in = chain_inputs(x, s, model);
  const auto client = chain::steady_state(in.client_params(s.W));
  const auto ap = chain::steady_state(in.ap_params(s.W));
  return {client.pi.T, ap.pi.T, client.pi.backoff_tail(static_cast<std::size_t>(s.timing.tau_v))};
}

inline std::array<double, 3> initial_guess(const Scenario& s) {
  const double w = 2.0 / (s.W + 1);
  return {w, w, std::pow(1 - w, static_cast<double>(s.timing.tau_v))};
}

/// Normalized throughput of one node: payload airtime delivered per slot.
inline double payload_rate(const chain::ChainSolution& c, Slots payload) {
  return c.pi.S * static_cast<double>(payload) / c.mean_holding;
}

/// Fills every derived quantity at a given (omega, omega_ap, nu).
inline Solution evaluate(const std::array<double, 3>& x, const Scenario& s,
                         CollisionTimeModel model = CollisionTimeModel::printed) {
  const auto in = chain_inputs(x, s, model);
  Solution sol;
  std::tie(sol.omega, sol.omega_ap, sol.nu) = std::tuple{x[0], x[1], x[2]};
  sol.nu_ap = nu_ap(sol.omega, sol.omega_ap, sol.nu, s);
  sol.alpha = in.client.alpha;
  sol.beta = in.beta;
  sol.p = in.p;
  sol.alpha_ap = in.ap.alpha_ap;
  sol.beta_ap = in.beta_ap;
  sol.p_ap = in.ap.p_ap;
  sol.Y1 = in.client.Y1;
  sol.Y2 = in.client.Y2;
  sol.Y3 = in.client.Y3;
  sol.Y4 = in.client.Y4;
  sol.Z1 = in.ap.Z1;
  sol.times = in.times;
  sol.tau_c = in.times.tau_c;
  sol.tau_c_ap = in.times.tau_c_ap;

  const auto cp = in.client_params(s.W);
  const auto ap = in.ap_params(s.W);
  const auto& ct = in.times;
  sol.client_chain = chain::limiting_probs(
      chain::steady_state(cp).pi, chain::HoldingTimes::for_chain(cp, ct.delta_t, ct.delta_s, ct.delta_c));
  sol.ap_chain = chain::limiting_probs(
      chain::steady_state(ap).pi,
      chain::HoldingTimes::for_chain(ap, ct.delta_t, ct.delta_s_ap, ct.delta_c_ap));
  sol.throughput_client = payload_rate(sol.client_chain, s.timing.payload);
  sol.throughput_ap = payload_rate(sol.ap_chain, s.timing.payload);
  sol.throughput_system = s.n * sol.throughput_client + sol.throughput_ap;
  const auto fx = iterate(x, s, model);
  sol.residual = max_abs_step(fx, x);
  return sol;
}

inline Solution solve_from(const Scenario& s, std::array<double, 3> start,
                           const SolverOptions& opts = {}) {
  s.validate();
  auto F = [&](const std::array<double, 3>& x) { return iterate(x, s, opts.collision_model); };
  const auto res = picard<3>(F, start, opts.picard, [](const std::array<double, 3>& x, double r, int it) {
    throw NonConvergence(x[0], x[1], x[2], r, it);
  });
  auto sol = evaluate(res.x, s, opts.collision_model);
  sol.iterations = res.iterations;
  return sol;
}

inline Solution solve_fixed_point(const Scenario& s, const SolverOptions& opts = {}) {
  s.validate();
  return solve_from(s, initial_guess(s), opts);
}

/// Client, AP and system normalized throughput of a solution.
struct Throughput {
  double client = 0;
  double ap = 0;
  double system = 0;
};

inline Throughput throughput(const Solution& sol, const Scenario& s) {
  Throughput t;
  t.client = payload_rate(sol.client_chain, s.timing.payload);
  t.ap = payload_rate(sol.ap_chain, s.timing.payload);
  t.system = s.n * t.client + t.ap;
  return t;
}

/// Closed-form estimate of the full-duplex gain over half duplex: one plus
/// the share of successful exchanges that turn into full-duplex ones.
inline double gain_estimate(double omega, double p, double omega_ap, double p_ap, int n) {
  const double num = omega * p + omega_ap * p_ap;
  const double den = n * omega * p + omega_ap * p_ap;
  if (!(den > 0)) throw InvalidArgument("gain_estimate: no successful transmissions");
  return 1 + num / den;
}

inline double gain_estimate(const Solution& sol, int n) {
  return gain_estimate(sol.omega, sol.p, sol.omega_ap, sol.p_ap, n);
}

/// Solves from several random starting points and returns the largest
/// max-norm disagreement with the standard solution.
inline double multi_start_spread(const Scenario& s, const SolverOptions& opts = {}, int starts = 8,
                                 std::uint64_t seed = 1) {
  const auto base = solve_fixed_point(s, opts);
  Rng rng(seed, 0x6d756c7469ULL);
  double spread = 0;
  for (int k = 0; k < starts; ++k) {
    const double hi = std::min(1.0, 8.0 / (s.W + 1));
    std::array<double, 3> x{hi * rng.uniform01(), hi * rng.uniform01(), 0};
    x[2] = std::pow(1 - x[0], static_cast<double>(s.timing.tau_v)) * (0.5 + 0.5 * rng.uniform01());
    try {
      const auto other = solve_from(s, x, opts);
      spread = std::max({spread, std::abs(other.omega - base.omega),
                         std::abs(other.omega_ap - base.omega_ap), std::abs(other.nu - base.nu)});
    } catch (const Error&) {
      // An infeasible start says nothing about uniqueness.
    }
  }
  return spread;
}

struct NodeEstimate {
  int client = 0;
  int n_c = 0;
  int n_h = 0;
  double throughput_system = 0;
  bool ok = false;
  std::string error;
};

struct TopologyEstimate {
  double throughput_system = 0;  // mean over solved clients
  std::vector<NodeEstimate> nodes;
  std::vector<int> failed;
};

/// Averages the symmetric-model system throughput over each client's own
/// (n_c, n_h) pair.
template <class Solve>
TopologyEstimate average_over_clients(const Topology& topo, Solve&& solve_system) {
  TopologyEstimate est;
  std::map<std::pair<int, int>, NodeEstimate> cache;
  double sum = 0;
  int ok = 0;
  for (int i = 0; i < topo.n(); ++i) {
    const auto key = std::pair{topo.n_c(i), topo.n_h(i)};
    auto it = cache.find(key);
    if (it == cache.end()) {
      NodeEstimate e;
      e.n_c = key.first;
      e.n_h = key.second;
      try {
        e.throughput_system = solve_system(key.first, key.second);
        e.ok = true;
      } catch (const Error& err) {
        e.error = err.what();
      }
      it = cache.emplace(key, e).first;
    }
    NodeEstimate e = it->second;
    e.client = i;
    if (e.ok) {
      sum += e.throughput_system;
      ++ok;
    } else {
      est.failed.push_back(i);
    }
    est.nodes.push_back(e);
  }
  if (ok == 0) throw Error("topology estimate: every client solve failed");
  est.throughput_system = sum / ok;
  return est;
}

inline TopologyEstimate random_topology_estimate(const Topology& topo, int W, const MacTiming& timing,
                                                 const SolverOptions& opts = {}) {
  return average_over_clients(topo, [&](int n_c, int n_h) {
    return solve_fixed_point(Scenario{topo.n(), n_c, n_h, W, timing}, opts).throughput_system;
  });
}

}  // namespace fdmac::fd
