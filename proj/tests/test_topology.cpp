#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "fdmac/topology.hpp"

using namespace fdmac;

namespace {

int brute_hidden(int n, double radius, double range, int i) {
  int h = 0;
  const double a = 2 * std::numbers::pi * i / n;
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    const double b = 2 * std::numbers::pi * j / n;
    const double d = std::hypot(radius * (std::cos(a) - std::cos(b)), radius * (std::sin(a) - std::sin(b)));
    if (d > range * (1 + 1e-9)) ++h;
  }
  return h;
}

}  // namespace

TEST(Topology, TinyRingHasNoHidden) {
  const auto t = ring(20, 1e-6, 150);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(t.n_h(i), 0);
  const auto u = ring(37, 75, 150);  // diameter == range
  for (int i = 0; i < 37; ++i) EXPECT_EQ(u.n_h(i), 0);
}

TEST(Topology, RingMatchesPairwiseDistances) {
  for (double r : {60.0, 100.0, 120.0, 150.0}) {
    const auto t = ring(30, r, 150);
    check_invariants(t);
    for (int i = 0; i < 30; ++i) {
      EXPECT_EQ(t.n_h(i), brute_hidden(30, r, 150, i));
      EXPECT_EQ(t.n_h(i), t.n_h(0));
      EXPECT_EQ(t.n_c(i) + t.n_h(i), 29);
    }
  }
  EXPECT_THROW(ring(5, 200, 150), InvalidArgument);
  EXPECT_THROW(ring(0, 10, 150), InvalidArgument);
}

TEST(Topology, SolveRadiusReproducesTarget) {
  for (int n : {7, 15, 20, 30}) {
    for (int target : achievable_ring_hidden(n, 150)) {
      const double r = solve_ring_radius(n, target, 150);
      const auto t = ring(n, r, 150);
      for (int i = 0; i < n; ++i) EXPECT_EQ(t.n_h(i), target) << n << ' ' << target;
    }
  }
  EXPECT_GT(solve_ring_radius(20, 0, 150), 0);
  EXPECT_LE(solve_ring_radius(20, 0, 150), 150);
}

TEST(Topology, EvenRingOnlyReachesOddCounts) {
  const auto ok = achievable_ring_hidden(20, 150);
  for (int v : ok) EXPECT_TRUE(v == 0 || v % 2 == 1) << v;
  try {
    solve_ring_radius(20, 12, 150);
    FAIL() << "expected InfeasibleRing";
  } catch (const InfeasibleRing& e) {
    EXPECT_EQ(e.nearest_below(), 11);
    EXPECT_EQ(e.nearest_above(), 13);
  }
  EXPECT_THROW(solve_ring_radius(20, 19, 150), Error);
  EXPECT_THROW(solve_ring_radius(20, -1, 150), InvalidArgument);
}

TEST(Topology, BandedRingGivesExactCounts) {
  for (int n : {20, 30})
    for (int h = 0; h <= n - 2; h += 2) {
      const auto t = banded_ring(n, h, 150);
      check_invariants(t);
      EXPECT_FALSE(t.geometric);
      for (int i = 0; i < n; ++i) EXPECT_EQ(t.n_h(i), h);
    }
  const auto g = ring_with_hidden(20, 5, 150);
  EXPECT_TRUE(g.geometric);
  EXPECT_EQ(g.n_h(3), 5);
  const auto b = ring_with_hidden(20, 8, 150);
  EXPECT_EQ(b.n_h(3), 8);
}

TEST(Topology, RandomDiskDeterministicAndValid) {
  const auto a = random_disk(12, 150, 99, Placement::uniform_area);
  const auto b = random_disk(12, 150, 99, Placement::uniform_area);
  ASSERT_EQ(a.n(), 12);
  for (int i = 0; i < 12; ++i) {
    EXPECT_EQ(a.positions[i].x, b.positions[i].x);
    EXPECT_EQ(a.positions[i].y, b.positions[i].y);
    EXPECT_EQ(a.covered[i], b.covered[i]);
  }
  const auto one = random_disk(1, 150, 3, Placement::uniform_radius);
  EXPECT_EQ(one.n_c(0), 0);
  EXPECT_EQ(one.n_h(0), 0);
  for (std::uint64_t s = 0; s < 200; ++s) check_invariants(random_disk(15, 150, s, Placement::uniform_radius));
  EXPECT_THROW(random_disk(0, 150, 1, Placement::uniform_area), InvalidArgument);
}

TEST(Topology, RandomDiskMeanHiddenMatchesGeometry) {
  // Two independent uniform points in a disk of radius R are farther apart
  // than R with probability 3*sqrt(3)/(4*pi).
  const double p_exact = 3 * std::sqrt(3.0) / (4 * std::numbers::pi);
  // Independent Monte Carlo with a different generator, rejection in a square.
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(-1, 1);
  auto point = [&] {
    for (;;) {
      double x = u(gen), y = u(gen);
      if (x * x + y * y <= 1) return std::pair{x, y};
    }
  };
  int far = 0;
  const int trials = 400000;
  for (int k = 0; k < trials; ++k) {
    auto [x1, y1] = point();
    auto [x2, y2] = point();
    if (std::hypot(x1 - x2, y1 - y2) > 1) ++far;
  }
  const double p_mc = static_cast<double>(far) / trials;
  EXPECT_NEAR(p_mc, p_exact, 0.003);

  double sum = 0;
  const int seeds = 10000;
  for (int s = 0; s < seeds; ++s) sum += random_disk(20, 150, s, Placement::uniform_area).mean_n_h();
  const double mean = sum / seeds;
  EXPECT_NEAR(mean, 19 * p_exact, 0.05) << "monte carlo oracle " << 19 * p_mc;
}

TEST(Topology, UniformRadiusHasFewerHidden) {
  double area = 0, radius = 0;
  for (int s = 0; s < 500; ++s) {
    area += random_disk(12, 150, s, Placement::uniform_area).mean_n_h();
    radius += random_disk(12, 150, s, Placement::uniform_radius).mean_n_h();
  }
  EXPECT_LT(radius, area);
}

TEST(Topology, DumpRoundTrip) {
  for (const auto& t : {random_disk(9, 150, 5, Placement::uniform_area), banded_ring(10, 4, 150)}) {
    std::stringstream ss;
    write_topology(ss, t);
    const auto back = read_topology(ss);
    ASSERT_EQ(back.n(), t.n());
    EXPECT_EQ(back.kind, t.kind);
    EXPECT_EQ(back.geometric, t.geometric);
    for (int i = 0; i < t.n(); ++i) {
      EXPECT_EQ(back.covered[i], t.covered[i]);
      EXPECT_EQ(back.hidden[i], t.hidden[i]);
      EXPECT_DOUBLE_EQ(back.positions[i].x, t.positions[i].x);
    }
  }
  std::stringstream bad("id,x_m\n");
  EXPECT_THROW(read_topology(bad), InvalidArgument);
  std::stringstream asym("# kind=x n=2 range_m=150 geometric=0\nid,x_m,y_m,n_c,n_h\n0,1,0,1,0\n1,2,0,0,1\nadjacency\n0: 1\n1:\n");
  EXPECT_THROW(read_topology(asym), InvalidArgument);
}

TEST(Topology, InvariantChecksCatchCorruption) {
  auto t = ring(6, 100, 150);
  t.positions[0] = {500, 0};
  EXPECT_THROW(check_invariants(t), InvalidArgument);
  auto u = ring(6, 100, 150);
  u.covered[0].push_back(0);
  EXPECT_THROW(check_invariants(u), InvalidArgument);
}
