// Model against simulator at converged fixed points. These are tolerance
// contracts, not identities; a miss here is a real model/sim gap.

#include <gtest/gtest.h>

#include <cmath>

#include "fdmac/fd_model.hpp"
#include "fdmac/hd_model.hpp"
#include "fdmac/simcore.hpp"
#include "fdmac/timing.hpp"
#include "fdmac/topology.hpp"

using namespace fdmac;

namespace {

const MacTiming kTiming = derive_timing(PhyParams{});
const HdTiming kHd = derive_hd_timing(PhyParams{});

double rel(double model, double sim) { return std::abs(model - sim) / std::abs(sim); }

double client_mean(const sim::SimReport& r, double (sim::SimReport::*f)(int) const) {
  double s = 0;
  for (int i = 1; i <= r.n(); ++i) s += (r.*f)(i);
  return s / r.n();
}

struct Pair {
  fd::Solution model;
  sim::SimReport sim;
};

Pair ring_pair(int n_h, int W, Slots slots, std::uint64_t seed = 1) {
  return {fd::solve_fixed_point(fd::Scenario::symmetric(20, n_h, W, kTiming)),
          sim::run_fd(ring_with_hidden(20, n_h, 150), W, kTiming, slots, seed)};
}

}  // namespace

TEST(CrossCheck, ClientIdleFraction) {
  const auto [m, s] = ring_pair(0, 1024, 5'000'000);
  const double sim_alpha = client_mean(s, &sim::SimReport::idle_fraction_in_contention);
  EXPECT_LE(rel(m.alpha, sim_alpha), 0.05) << "model " << m.alpha << " sim " << sim_alpha;
}

TEST(CrossCheck, ApIdleFraction) {
  const auto [m, s] = ring_pair(4, 512, 5'000'000);
  const double sim_alpha = s.idle_fraction_in_contention(0);
  EXPECT_LE(rel(m.alpha_ap, sim_alpha), 0.05) << "model " << m.alpha_ap << " sim " << sim_alpha;
}

TEST(CrossCheck, ClientHeaderSuccess) {
  const auto [m, s] = ring_pair(8, 512, 5'000'000);
  const double sim_p = client_mean(s, &sim::SimReport::header_success_ratio);
  EXPECT_LE(rel(m.p, sim_p), 0.05) << "model " << m.p << " sim " << sim_p;
}

TEST(CrossCheck, ApFdReplyRate) {
  const auto [m, s] = ring_pair(4, 512, 5'000'000);
  const double sim_beta = s.fd_reply_rate(0);
  EXPECT_LE(rel(m.beta_ap, sim_beta), 0.05) << "model " << m.beta_ap << " sim " << sim_beta;
}

TEST(CrossCheck, ClientThroughputSpotValue) {
  const auto [m, s] = ring_pair(4, 1024, 10'000'000);
  EXPECT_LE(rel(m.throughput_client, s.throughput_client_mean()), 0.07)
      << "model " << m.throughput_client << " sim " << s.throughput_client_mean();
  // system = n clients + AP on both sides
  EXPECT_NEAR(m.throughput_system, 20 * m.throughput_client + m.throughput_ap, 1e-12);
  double sum = s.throughput_ap();
  for (int i = 1; i <= s.n(); ++i) sum += s.node_throughput(i);
  EXPECT_NEAR(s.throughput_system(), sum, 1e-12);
}

TEST(CrossCheck, RandomTopologySingleSeed) {
  for (std::uint64_t seed : {3u, 7u}) {
    const auto topo = random_disk(8, 150, seed, Placement::uniform_area);
    const double model = fd::random_topology_estimate(topo, 128, kTiming).throughput_system;
    const auto s = sim::run_fd(topo, 128, kTiming, 5'000'000, seed);
    EXPECT_LE(rel(model, s.throughput_system()), 0.10)
        << "seed " << seed << " n_h " << topo.mean_n_h() << " model " << model << " sim " << s.throughput_system();
  }
}

TEST(CrossCheck, GainEstimateTracksExactRatio) {
  int misses = 0, total = 0;
  for (int n_h : {0, 4, 8, 12})
    for (int W : {256, 512, 1024}) {
      const auto f = fd::solve_fixed_point(fd::Scenario::symmetric(20, n_h, W, kTiming));
      const auto h = hd::solve_hd(hd::Scenario::symmetric(20, n_h, W, kHd));
      const double g = hd::fd_gain(f, h);
      const double est = fd::gain_estimate(f, 20);
      ++total;
      if (rel(est, g) > 0.15) {
        ++misses;
        ADD_FAILURE() << "n_h=" << n_h << " W=" << W << " gain " << g << " estimate " << est;
      }
    }
  RecordProperty("misses", misses);
  RecordProperty("points", total);
}

// One client: the exchange cycle is a renewal process with a closed form, so
// the model can be checked without the simulator.
TEST(CrossCheck, SingleClientModelAgainstRenewal) {
  for (int W : {16, 64, 256}) {
    double emin = 0;
    for (int k = 1; k < W; ++k) emin += std::pow(static_cast<double>(W - k) / W, 2);
    const double q = 1 - 1.0 / W;
    const double exact =
        2 * kTiming.payload * q / (1 + emin + static_cast<double>(kTiming.header) / W + kTiming.tau_f * q);
    const auto m = fd::solve_fixed_point(fd::Scenario::symmetric(1, 0, W, kTiming));
    EXPECT_LE(rel(m.throughput_system, exact), 0.07) << "W " << W << " model " << m.throughput_system
                                                      << " renewal " << exact;
  }
}

TEST(CrossCheck, HdModelAgainstRtsCtsSim) {
  for (int n_h : {0, 8}) {
    const auto m = hd::solve_hd(hd::Scenario::symmetric(20, n_h, 512, kHd));
    const auto s = sim::run_hd_rtscts(ring_with_hidden(20, n_h, 150), 512, kHd, 5'000'000, 1);
    EXPECT_LE(rel(m.throughput_system, s.throughput_system()), 0.07)
        << "n_h " << n_h << " model " << m.throughput_system << " sim " << s.throughput_system();
  }
}
