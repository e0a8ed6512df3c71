#pragma once

// Star topologies around an access point at the origin. Clients share one
// radius for sensing, transmission and interference; the AP hears every
// client and every client hears the AP.

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fdmac/error.hpp"
#include "fdmac/rng.hpp"

namespace fdmac {

struct Point {
  double x = 0;
  double y = 0;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

enum class Placement { uniform_area, uniform_radius };

inline std::string to_string(Placement p) {
  return p == Placement::uniform_area ? "uniform_area" : "uniform_radius";
}

inline Placement placement_from_string(const std::string& s) {
  if (s == "uniform_area") return Placement::uniform_area;
  if (s == "uniform_radius") return Placement::uniform_radius;
  throw InvalidArgument("unknown placement '" + s + "'");
}

struct Topology {
  std::string kind;
  double range_m = 0;
  std::vector<Point> positions;  // clients only; the AP sits at (0, 0)
  std::vector<std::vector<int>> covered;
  std::vector<std::vector<int>> hidden;
  /// False for connectivity-only layouts whose hidden sets are not implied by
  /// the positions (see banded_ring).
  bool geometric = true;

  int n() const { return static_cast<int>(positions.size()); }
  int n_c(int i) const { return static_cast<int>(covered[i].size()); }
  int n_h(int i) const { return static_cast<int>(hidden[i].size()); }

  /// hears[i][j]: client i senses client j.
  std::vector<std::vector<bool>> hearing_matrix() const {
    std::vector<std::vector<bool>> m(positions.size(), std::vector<bool>(positions.size(), false));
    for (std::size_t i = 0; i < covered.size(); ++i)
      for (int j : covered[i]) m[i][j] = true;
    return m;
  }

  double mean_n_h() const {
    if (positions.empty()) return 0;
    double s = 0;
    for (int i = 0; i < n(); ++i) s += n_h(i);
    return s / n();
  }
};

namespace detail {

// Positions within a relative 1e-9 of the range count as covered.
inline bool out_of_range(double d, double range) { return d > range * (1 + 1e-9); }

inline Topology from_positions(std::string kind, std::vector<Point> pos, double range) {
  Topology t;
  t.kind = std::move(kind);
  t.range_m = range;
  t.positions = std::move(pos);
  const int n = t.n();
  t.covered.assign(n, {});
  t.hidden.assign(n, {});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (out_of_range(distance(t.positions[i], t.positions[j]), range))
        t.hidden[i].push_back(j);
      else
        t.covered[i].push_back(j);
    }
  }
  return t;
}

inline int ring_hidden_count(int n, double radius, double range) {
  int h = 0;
  for (int k = 1; k < n; ++k)
    if (out_of_range(2 * radius * std::sin(std::numbers::pi * k / n), range)) ++h;
  return h;
}

}  // namespace detail

/// Throws unless every structural invariant holds.
inline void check_invariants(const Topology& t) {
  const int n = t.n();
  if (static_cast<int>(t.covered.size()) != n || static_cast<int>(t.hidden.size()) != n)
    throw InvalidArgument("topology: neighbour tables do not match client count");
  const auto hears = t.hearing_matrix();
  for (int i = 0; i < n; ++i) {
    if (distance(t.positions[i], {}) > t.range_m * (1 + 1e-9) && t.geometric)
      throw InvalidArgument("topology: client " + std::to_string(i) + " outside AP range");
    if (t.n_c(i) + t.n_h(i) != n - 1)
      throw InvalidArgument("topology: covered/hidden sets of client " + std::to_string(i) +
                            " do not partition the other clients");
    if (hears[i][i]) throw InvalidArgument("topology: client covers itself");
    for (int j : t.hidden[i])
      if (hears[i][j]) throw InvalidArgument("topology: client both covered and hidden");
    for (int j = 0; j < n; ++j) {
      if (hears[i][j] != hears[j][i]) throw InvalidArgument("topology: asymmetric coverage");
      if (t.geometric && i != j &&
          hears[i][j] == detail::out_of_range(distance(t.positions[i], t.positions[j]), t.range_m))
        throw InvalidArgument("topology: coverage disagrees with geometry");
    }
  }
}

/// n clients evenly spaced on a circle of `ring_radius` around the AP.
inline Topology ring(int n, double ring_radius, double range_m) {
  if (n < 1) throw InvalidArgument("ring: n must be >= 1");
  if (!(range_m > 0)) throw InvalidArgument("ring: range must be positive");
  if (!(ring_radius >= 0)) throw InvalidArgument("ring: radius must be non-negative");
  if (ring_radius > range_m)
    throw InvalidArgument("ring: radius exceeds range, clients would be outside AP coverage");
  std::vector<Point> pos(n);
  for (int k = 0; k < n; ++k) {
    const double a = 2 * std::numbers::pi * k / n;
    pos[k] = {ring_radius * std::cos(a), ring_radius * std::sin(a)};
  }
  auto t = detail::from_positions("ring", std::move(pos), range_m);
  return t;
}

/// Hidden-terminal counts a ring of n clients can realize with radius <= range.
inline std::vector<int> achievable_ring_hidden(int n, double range_m) {
  // Count changes only where a chord equals the range; probe between those radii.
  std::vector<double> radii{0.0, range_m};
  for (int k = 1; k < n; ++k) {
    const double s = std::sin(std::numbers::pi * k / n);
    if (s > 0) {
      const double r = range_m / (2 * s);
      if (r <= range_m) radii.push_back(r);
    }
  }
  std::sort(radii.begin(), radii.end());
  std::vector<int> out;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    out.push_back(detail::ring_hidden_count(n, radii[i], range_m));
    if (i + 1 < radii.size())
      out.push_back(detail::ring_hidden_count(n, 0.5 * (radii[i] + radii[i + 1]), range_m));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

class InfeasibleRing : public InvalidArgument {
 public:
  InfeasibleRing(int target, int below, int above)
      : InvalidArgument(message(target, below, above)), below_(below), above_(above) {}

  /// Nearest achievable counts; -1 when none exists on that side.
  int nearest_below() const { return below_; }
  int nearest_above() const { return above_; }

 private:
  static std::string message(int target, int below, int above) {
    std::ostringstream os;
    os << "ring: " << target << " hidden terminals per client is not achievable; nearest: ";
    if (below >= 0) os << below;
    if (below >= 0 && above >= 0) os << ", ";
    if (above >= 0) os << above;
    return os.str();
  }
  int below_;
  int above_;
};

/// Radius whose ring yields exactly target_n_h hidden clients per client,
/// found by bisection on the chord count.
inline double solve_ring_radius(int n, int target_n_h, double range_m) {
  if (n < 1) throw InvalidArgument("solve_ring_radius: n must be >= 1");
  if (target_n_h < 0 || target_n_h > n - 1)
    throw InvalidArgument("solve_ring_radius: target outside [0, n-1]");
  if (target_n_h == 0) return range_m / 2;
  const auto ok = achievable_ring_hidden(n, range_m);
  if (!std::binary_search(ok.begin(), ok.end(), target_n_h)) {
    int below = -1;
    int above = -1;
    for (int v : ok) {
      if (v < target_n_h) below = v;
      if (v > target_n_h && above < 0) above = v;
    }
    throw InfeasibleRing(target_n_h, below, above);
  }
  // Smallest radius reaching the target, then midway to the next change.
  double lo = 0, hi = range_m;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (detail::ring_hidden_count(n, mid, range_m) >= target_n_h)
      hi = mid;
    else
      lo = mid;
  }
  double upper = range_m;
  for (int k = 1; k < n; ++k) {
    const double r = range_m / (2 * std::sin(std::numbers::pi * k / n));
    if (r > hi * (1 + 1e-9) && r < upper) upper = r;
  }
  const double radius = 0.5 * (hi + upper);
  if (detail::ring_hidden_count(n, radius, range_m) != target_n_h)
    throw Error("solve_ring_radius: bisection failed to isolate the target");
  return radius;
}

/// Ring layout whose hidden sets are the n_h clients farthest around the
/// ring. Unlike ring(), any 0 <= n_h <= n-1 with the symmetric band shape is
/// allowed: when n and n_h are both even the diametrically opposite client
/// is kept covered. The positions are drawn on a circle for reference only.
inline Topology banded_ring(int n, int n_h, double range_m) {
  if (n < 1) throw InvalidArgument("banded_ring: n must be >= 1");
  if (n_h < 0 || n_h > n - 1) throw InvalidArgument("banded_ring: n_h outside [0, n-1]");
  Topology t;
  t.kind = "banded_ring";
  t.range_m = range_m;
  t.geometric = false;
  t.positions.resize(n);
  for (int k = 0; k < n; ++k) {
    const double a = 2 * std::numbers::pi * k / n;
    t.positions[k] = {range_m * std::cos(a), range_m * std::sin(a)};
  }
  // Ring offsets 1..n-1 ordered by distance from the opposite point.
  std::vector<int> offsets;
  for (int k = 1; k < n; ++k) offsets.push_back(k);
  std::stable_sort(offsets.begin(), offsets.end(), [n](int a, int b) {
    return std::abs(2 * a - n) < std::abs(2 * b - n);
  });
  std::vector<bool> hidden_offset(n, false);
  int remaining = n_h;
  std::size_t idx = 0;
  if (n % 2 == 0 && n_h % 2 == 0) idx = 1;  // skip the single opposite offset
  for (; idx < offsets.size() && remaining > 0; ++idx) {
    hidden_offset[offsets[idx]] = true;
    --remaining;
  }
  if (remaining > 0) throw InvalidArgument("banded_ring: n_h too large for a symmetric band");
  t.covered.assign(n, {});
  t.hidden.assign(n, {});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const int off = ((j - i) % n + n) % n;
      (hidden_offset[off] ? t.hidden : t.covered)[i].push_back(j);
    }
  }
  return t;
}

/// Ring with exactly n_h hidden clients each: geometric when a radius can
/// realize it, banded otherwise.
inline Topology ring_with_hidden(int n, int n_h, double range_m) {
  try {
    return ring(n, solve_ring_radius(n, n_h, range_m), range_m);
  } catch (const InfeasibleRing&) {
    return banded_ring(n, n_h, range_m);
  }
}

/// n clients i.i.d. in the disk of radius range_m around the AP.
inline Topology random_disk(int n, double range_m, std::uint64_t seed, Placement placement) {
  if (n < 1) throw InvalidArgument("random_disk: n must be >= 1");
  if (!(range_m > 0)) throw InvalidArgument("random_disk: range must be positive");
  Rng rng(seed, 0x746f706fULL);
  std::vector<Point> pos(n);
  for (auto& p : pos) {
    const double u = rng.uniform01();
    const double r = placement == Placement::uniform_area ? range_m * std::sqrt(u) : range_m * u;
    const double a = 2 * std::numbers::pi * rng.uniform01();
    p = {r * std::cos(a), r * std::sin(a)};
  }
  return detail::from_positions("random_" + to_string(placement), std::move(pos), range_m);
}

/// Plain-text dump: a `id,x_m,y_m,n_c,n_h` table followed by an adjacency
/// section listing each client's covered set.
inline void write_topology(std::ostream& os, const Topology& t) {
  os << "# kind=" << t.kind << " n=" << t.n() << " range_m=" << t.range_m
     << " geometric=" << (t.geometric ? 1 : 0) << "\n";
  os << "id,x_m,y_m,n_c,n_h\n";
  os.precision(17);
  for (int i = 0; i < t.n(); ++i)
    os << i << ',' << t.positions[i].x << ',' << t.positions[i].y << ',' << t.n_c(i) << ','
       << t.n_h(i) << '\n';
  os << "adjacency\n";
  for (int i = 0; i < t.n(); ++i) {
    os << i << ':';
    for (int j : t.covered[i]) os << ' ' << j;
    os << '\n';
  }
}

inline Topology read_topology(std::istream& is) {
  Topology t;
  std::string line;
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0)
    throw InvalidArgument("topology dump: missing header line");
  {
    std::istringstream hs(line.substr(2));
    std::string kv;
    while (hs >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) continue;
      const auto key = kv.substr(0, eq);
      const auto val = kv.substr(eq + 1);
      if (key == "kind") t.kind = val;
      else if (key == "range_m") t.range_m = std::stod(val);
      else if (key == "geometric") t.geometric = val == "1";
    }
  }
  if (!std::getline(is, line) || line != "id,x_m,y_m,n_c,n_h")
    throw InvalidArgument("topology dump: missing table header");
  while (std::getline(is, line) && line != "adjacency") {
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw InvalidArgument("topology dump: bad row '" + line + "'");
    if (std::stoi(cells[0]) != t.n()) throw InvalidArgument("topology dump: ids out of order");
    t.positions.push_back({std::stod(cells[1]), std::stod(cells[2])});
  }
  const int n = t.n();
  t.covered.assign(n, {});
  t.hidden.assign(n, {});
  std::vector<std::vector<bool>> hears(n, std::vector<bool>(n, false));
  for (int row = 0; row < n; ++row) {
    if (!std::getline(is, line)) throw InvalidArgument("topology dump: truncated adjacency");
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw InvalidArgument("topology dump: bad adjacency row");
    const int i = std::stoi(line.substr(0, colon));
    if (i < 0 || i >= n) throw InvalidArgument("topology dump: adjacency id out of range");
    std::istringstream ls(line.substr(colon + 1));
    int j;
    while (ls >> j) {
      if (j < 0 || j >= n) throw InvalidArgument("topology dump: neighbour id out of range");
      hears[i][j] = true;
    }
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) (hears[i][j] ? t.covered : t.hidden)[i].push_back(j);
  check_invariants(t);
  return t;
}

}  // namespace fdmac
