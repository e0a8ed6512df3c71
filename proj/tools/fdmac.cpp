// fdmac: analytical model, simulator and validation sweeps for the
// full-duplex MAC and its RTS/CTS half-duplex baseline.
//
//   fdmac model     --mode fd --n 20 --nh 0,4,8,12 --W 128,256,512
//   fdmac simulate  --mode fd --n 20 --nh 4 --W 512 --slots 10000000 --seeds 5
//   fdmac gain      --topology random --n 8,12 --W 32,64,128,256
//   fdmac validate  --out-dir results/
//   fdmac topology  --topology ring --n 20 --nh 5
//
// Configuration: defaults < --config file.json < command-line flags.
// Exit codes: 0 ok, 1 usage, 2 solver failure, 3 validation failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fdmac/fd_model.hpp"
#include "fdmac/hd_model.hpp"
#include "fdmac/simcore.hpp"
#include "fdmac/timing.hpp"
#include "fdmac/topology.hpp"
#include "fdmac/version.hpp"

namespace {

using json = nlohmann::json;
using namespace fdmac;

enum ExitCode { kOk = 0, kUsage = 1, kSolver = 2, kValidation = 3 };

const std::vector<std::string> kColumns = {
    "mode",  "engine", "topology", "n",        "n_c",      "n_h",   "W",
    "seed",  "slots",  "throughput_client", "throughput_ap", "throughput_system", "gain",
    "gain_estimate", "alpha", "beta", "p", "alpha_ap", "beta_ap", "p_ap", "residual", "ci_halfwidth"};

struct RunConfig {
  std::string mode = "fd";
  std::string engine = "model";
  std::string topology = "ring";
  std::vector<int> n{20};
  std::vector<int> n_h{0};
  std::vector<int> W{512};
  double range_m = 150;
  Placement placement = Placement::uniform_area;
  int topologies = 20;
  std::uint64_t topology_seed = 0;
  PhyParams phy;
  fd::CollisionTimeModel collision_model = fd::CollisionTimeModel::printed;
  double tol = 1e-10;
  int max_iters = 10000;
  Slots slots = 10'000'000;
  int seeds = 5;
  std::uint64_t seed_base = 1;
  double ci_target = 0.01;
  Slots slot_budget = 0;  // total slots per point; 0 means seeds * slots
  double warmup_fraction = 0.05;
  int workers = 0;
  std::string out;
  std::string out_dir;
  std::string trace;
  // validate
  double tolerance = 0.07;
  double se_target = 0.02;
  int expected_peak_W = 512;
  std::vector<int> peak_n_h{4, 8, 12};

  json to_json() const {
    json j;
    j["mode"] = mode;
    j["engine"] = engine;
    j["topology"] = topology;
    j["n"] = n;
    j["n_h"] = n_h;
    j["W"] = W;
    j["range_m"] = range_m;
    j["placement"] = to_string(placement);
    j["topologies"] = topologies;
    j["topology_seed"] = topology_seed;
    j["phy"] = {{"mac_header_bytes", phy.mac_header_bytes},
                {"phy_header_bytes", phy.phy_header_bytes},
                {"ack_bytes", phy.ack_bytes},
                {"payload_bytes", phy.payload_bytes},
                {"slot_us", phy.slot_us},
                {"sifs_us", phy.sifs_us},
                {"preamble_rate_bps", phy.preamble_rate_bps},
                {"data_rate_bps", phy.data_rate_bps},
                {"rts_bytes", phy.rts_bytes},
                {"cts_bytes", phy.cts_bytes},
                {"quantization", to_string(phy.quantization)}};
    j["collision_model"] = to_string(collision_model);
    j["tol"] = tol;
    j["max_iters"] = max_iters;
    j["slots"] = slots;
    j["seeds"] = seeds;
    j["seed_base"] = seed_base;
    j["ci_target"] = ci_target;
    j["slot_budget"] = slot_budget;
    j["warmup_fraction"] = warmup_fraction;
    j["tolerance"] = tolerance;
    j["se_target"] = se_target;
    j["expected_peak_W"] = expected_peak_W;
    j["peak_n_h"] = peak_n_h;
    return j;
  }

  void merge(const json& j) {
    auto get = [&](const char* key, auto& dst) {
      if (j.contains(key)) j.at(key).get_to(dst);
    };
    get("mode", mode);
    get("engine", engine);
    get("topology", topology);
    get("n", n);
    get("n_h", n_h);
    get("W", W);
    get("range_m", range_m);
    if (j.contains("placement")) placement = placement_from_string(j.at("placement").get<std::string>());
    get("topologies", topologies);
    get("topology_seed", topology_seed);
    if (j.contains("phy")) {
      const auto& p = j.at("phy");
      auto getp = [&](const char* key, double& dst) {
        if (p.contains(key)) p.at(key).get_to(dst);
      };
      getp("mac_header_bytes", phy.mac_header_bytes);
      getp("phy_header_bytes", phy.phy_header_bytes);
      getp("ack_bytes", phy.ack_bytes);
      getp("payload_bytes", phy.payload_bytes);
      getp("slot_us", phy.slot_us);
      getp("sifs_us", phy.sifs_us);
      getp("preamble_rate_bps", phy.preamble_rate_bps);
      getp("data_rate_bps", phy.data_rate_bps);
      getp("rts_bytes", phy.rts_bytes);
      getp("cts_bytes", phy.cts_bytes);
      if (p.contains("quantization"))
        phy.quantization = quantization_from_string(p.at("quantization").get<std::string>());
    }
    if (j.contains("collision_model"))
      collision_model = fd::collision_model_from_string(j.at("collision_model").get<std::string>());
    get("tol", tol);
    get("max_iters", max_iters);
    get("slots", slots);
    get("seeds", seeds);
    get("seed_base", seed_base);
    get("ci_target", ci_target);
    get("slot_budget", slot_budget);
    get("warmup_fraction", warmup_fraction);
    get("tolerance", tolerance);
    get("se_target", se_target);
    get("expected_peak_W", expected_peak_W);
    get("peak_n_h", peak_n_h);
  }

  void validate() const {
    if (mode != "fd" && mode != "hd") throw InvalidArgument("mode must be fd or hd");
    if (engine != "model" && engine != "sim" && engine != "both")
      throw InvalidArgument("engine must be model, sim or both");
    if (topology != "ring" && topology != "random") throw InvalidArgument("topology must be ring or random");
    if (n.empty() || W.empty() || (topology == "ring" && n_h.empty()))
      throw InvalidArgument("grids must be non-empty");
    for (int v : n)
      if (v < 1) throw InvalidArgument("n must be >= 1");
    for (int v : W)
      if (v < 1) throw InvalidArgument("W must be >= 1");
    if (slots < 1 || seeds < 1) throw InvalidArgument("slots and seeds must be >= 1");
    if (topologies < 1) throw InvalidArgument("topologies must be >= 1");
    if (!(range_m > 0)) throw InvalidArgument("range_m must be positive");
    phy.validate();
  }

  PicardOptions picard() const {
    PicardOptions o;
    o.tol = tol;
    o.max_iters = max_iters;
    return o;
  }
  fd::SolverOptions solver() const { return {picard(), collision_model}; }
  MacTiming timing() const { return derive_timing(phy); }
  HdTiming hd_timing() const { return derive_hd_timing(phy); }
};

struct GridPoint {
  int n = 0;
  int n_h = -1;  // -1 for random topologies
  int W = 0;
};

std::vector<GridPoint> grid(const RunConfig& c) {
  std::vector<GridPoint> g;
  for (int n : c.n) {
    if (c.topology == "ring") {
      for (int h : c.n_h)
        for (int W : c.W) g.push_back({n, h, W});
    } else {
      for (int W : c.W) g.push_back({n, -1, W});
    }
  }
  return g;
}

// One CSV row; absent fields stay empty.
class Row {
 public:
  Row& set(const std::string& key, const std::string& v) {
    cells_[key] = v;
    return *this;
  }
  Row& num(const std::string& key, double v) {
    if (!std::isfinite(v)) return *this;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    cells_[key] = buf;
    return *this;
  }
  Row& integer(const std::string& key, long long v) { return set(key, std::to_string(v)); }

  std::string line() const {
    std::string out;
    for (std::size_t i = 0; i < kColumns.size(); ++i) {
      if (i) out += ',';
      auto it = cells_.find(kColumns[i]);
      if (it != cells_.end()) out += it->second;
    }
    return out;
  }

 private:
  std::map<std::string, std::string> cells_;
};

std::string header_line() {
  std::string h;
  for (std::size_t i = 0; i < kColumns.size(); ++i) h += (i ? "," : "") + kColumns[i];
  return h;
}

Row base_row(const RunConfig& c, const std::string& mode, const std::string& engine, const GridPoint& p) {
  Row r;
  r.set("mode", mode).set("engine", engine).set("topology", c.topology).integer("n", p.n).integer("W", p.W);
  if (p.n_h >= 0) r.integer("n_c", p.n - 1 - p.n_h).integer("n_h", p.n_h);
  return r;
}

int worker_count(const RunConfig& c) {
  if (c.workers > 0) return c.workers;
  if (const char* env = std::getenv("FDMAC_WORKERS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs task(i) for i in [0, count) on a pool; emit() sees results in index
// order, one caller at a time.
template <class Result>
void run_ordered(std::size_t count, int workers, const std::function<Result(std::size_t)>& task,
                 const std::function<void(std::size_t, const Result&)>& emit) {
  std::vector<std::optional<Result>> done(count);
  std::mutex mu;
  std::size_t next_emit = 0;
  std::atomic<std::size_t> next_task{0};
  auto work = [&] {
    for (;;) {
      const std::size_t i = next_task++;
      if (i >= count) return;
      Result r = task(i);
      std::lock_guard lock(mu);
      done[i] = std::move(r);
      while (next_emit < count && done[next_emit]) {
        emit(next_emit, *done[next_emit]);
        done[next_emit].reset();
        ++next_emit;
      }
    }
  };
  const int k = std::max(1, std::min<int>(workers, static_cast<int>(count)));
  std::vector<std::thread> pool;
  for (int t = 1; t < k; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
}

Topology make_topology(const RunConfig& c, const GridPoint& p, std::uint64_t topo_seed) {
  if (c.topology == "ring") return ring_with_hidden(p.n, p.n_h, c.range_m);
  return random_disk(p.n, c.range_m, topo_seed, c.placement);
}

// ---- analytical engine ----

struct ModelResult {
  std::vector<Row> rows;
  double system = NAN;
  bool failed = false;
};

ModelResult model_point(const RunConfig& c, const GridPoint& p, const std::string& mode) {
  ModelResult out;
  Row row = base_row(c, mode, "model", p);
  try {
    if (c.topology == "ring") {
      if (mode == "fd") {
        const auto s = fd::Scenario::symmetric(p.n, p.n_h, p.W, c.timing());
        const auto sol = fd::solve_fixed_point(s, c.solver());
        row.num("throughput_client", sol.throughput_client)
            .num("throughput_ap", sol.throughput_ap)
            .num("throughput_system", sol.throughput_system)
            .num("gain_estimate", fd::gain_estimate(sol, p.n))
            .num("alpha", sol.alpha)
            .num("beta", sol.beta)
            .num("p", sol.p)
            .num("alpha_ap", sol.alpha_ap)
            .num("beta_ap", sol.beta_ap)
            .num("p_ap", sol.p_ap)
            .num("residual", sol.residual);
        out.system = sol.throughput_system;
      } else {
        const auto sol = hd::solve_hd(hd::Scenario::symmetric(p.n, p.n_h, p.W, c.hd_timing()), c.picard());
        row.num("throughput_client", sol.throughput_client)
            .num("throughput_ap", sol.throughput_ap)
            .num("throughput_system", sol.throughput_system)
            .num("alpha", sol.alpha)
            .num("beta", 0)
            .num("p", sol.p)
            .num("alpha_ap", sol.alpha_ap)
            .num("beta_ap", 0)
            .num("p_ap", sol.p_ap)
            .num("residual", sol.residual);
        out.system = sol.throughput_system;
      }
    } else {
      double sum = 0, nh = 0;
      for (int k = 0; k < c.topologies; ++k) {
        const auto topo = make_topology(c, p, c.topology_seed + static_cast<std::uint64_t>(k));
        const auto est = mode == "fd" ? fd::random_topology_estimate(topo, p.W, c.timing(), c.solver())
                                      : hd::random_topology_estimate(topo, p.W, c.hd_timing(), c.picard());
        for (int i : est.failed)
          std::cerr << "warning: topology " << c.topology_seed + k << " client " << i << ": "
                    << est.nodes[i].error << "\n";
        sum += est.throughput_system;
        nh += topo.mean_n_h();
      }
      out.system = sum / c.topologies;
      row.num("n_h", nh / c.topologies)
          .set("seed", std::to_string(c.topology_seed) + "+" + std::to_string(c.topologies))
          .num("throughput_system", out.system);
    }
  } catch (const Error& e) {
    std::cerr << "solver failure at n=" << p.n << " n_h=" << p.n_h << " W=" << p.W << ": " << e.what() << "\n";
    out.failed = true;
  }
  out.rows.push_back(row);
  return out;
}

// ---- simulation engine ----

struct SimStats {
  std::vector<sim::SimReport> reports;
  double mean = NAN;
  double halfwidth = NAN;
  std::string stopped_by;
};

double t_quantile(int runs) {
  if (runs < 2) return NAN;
  boost::math::students_t dist(runs - 1);
  return boost::math::quantile(boost::math::complement(dist, 0.025));
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? NAN : s / static_cast<double>(v.size());
}

double halfwidth_of(const std::vector<double>& v) {
  if (v.size() < 2) return NAN;
  const double m = mean_of(v);
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return t_quantile(static_cast<int>(v.size())) * sd / std::sqrt(static_cast<double>(v.size()));
}

sim::SimReport simulate_once(const RunConfig& c, const GridPoint& p, const std::string& mode, std::uint64_t seed,
                             std::size_t point_index) {
  sim::SimOptions o;
  o.warmup_fraction = c.warmup_fraction;
  std::ofstream trace;
  if (!c.trace.empty()) {
    trace.open(c.trace + "." + std::to_string(point_index) + "." + mode + "." + std::to_string(seed));
    if (!trace) throw InvalidArgument("cannot open trace file under " + c.trace);
    o.trace = &trace;
  }
  const auto topo = make_topology(c, p, seed);
  return mode == "fd" ? sim::run_fd(topo, p.W, c.timing(), c.slots, seed, o)
                      : sim::run_hd_rtscts(topo, p.W, c.hd_timing(), c.slots, seed, o);
}

SimStats simulate_point(const RunConfig& c, const GridPoint& p, const std::string& mode, std::size_t index) {
  SimStats st;
  std::vector<double> xs;
  const Slots budget = c.slot_budget > 0 ? c.slot_budget : c.slots * c.seeds;
  for (std::uint64_t k = 0;; ++k) {
    st.reports.push_back(simulate_once(c, p, mode, c.seed_base + k, index));
    xs.push_back(st.reports.back().throughput_system());
    const int runs = static_cast<int>(xs.size());
    if (runs < c.seeds) continue;
    st.mean = mean_of(xs);
    st.halfwidth = halfwidth_of(xs);
    if (std::isfinite(st.halfwidth) && st.halfwidth <= c.ci_target * st.mean) {
      st.stopped_by = "ci_target";
      break;
    }
    if (static_cast<Slots>(runs + 1) * c.slots > budget) {
      st.stopped_by = "slot_budget";
      break;
    }
  }
  return st;
}

Row sim_row(const RunConfig& c, const GridPoint& p, const std::string& mode, const sim::SimReport& r) {
  Row row = base_row(c, mode, "sim", p);
  double alpha = 0, beta = 0, pr = 0;
  for (int i = 1; i <= r.n(); ++i) {
    alpha += r.idle_fraction_in_contention(i);
    beta += r.fd_reply_rate(i);
    pr += r.header_success_ratio(i);
  }
  if (p.n_h < 0) row.num("n_h", 0);  // replaced below for random layouts
  row.set("seed", std::to_string(r.seed))
      .integer("slots", r.total_slots)
      .num("throughput_client", r.throughput_client_mean())
      .num("throughput_ap", r.throughput_ap())
      .num("throughput_system", r.throughput_system())
      .num("alpha", alpha / r.n())
      .num("beta", beta / r.n())
      .num("p", pr / r.n())
      .num("alpha_ap", r.idle_fraction_in_contention(0))
      .num("beta_ap", r.fd_reply_rate(0))
      .num("p_ap", r.header_success_ratio(0));
  return row;
}

std::vector<Row> sim_rows(const RunConfig& c, const GridPoint& p, const std::string& mode, const SimStats& st,
                          double gain = NAN) {
  std::vector<Row> rows;
  std::vector<double> client, ap;
  for (const auto& r : st.reports) {
    Row row = sim_row(c, p, mode, r);
    if (p.n_h < 0) row.num("n_h", make_topology(c, p, r.seed).mean_n_h());
    rows.push_back(row);
    client.push_back(r.throughput_client_mean());
    ap.push_back(r.throughput_ap());
  }
  Row agg = base_row(c, mode, "sim", p);
  agg.set("seed", "mean")
      .integer("slots", st.reports.front().total_slots * static_cast<Slots>(st.reports.size()))
      .num("throughput_client", mean_of(client))
      .num("throughput_ap", mean_of(ap))
      .num("throughput_system", st.mean)
      .num("gain", gain)
      .num("ci_halfwidth", st.halfwidth);
  rows.push_back(agg);
  return rows;
}

// ---- output plumbing ----

struct Output {
  std::ofstream file;
  std::ostream* os = &std::cout;
  std::string path;

  explicit Output(const std::string& p) : path(p) {
    if (p.empty() || p == "-") return;
    const auto dir = std::filesystem::path(p).parent_path();
    if (!dir.empty() && !std::filesystem::is_directory(dir))
      throw InvalidArgument("output directory does not exist: " + dir.string());
    file.open(p);
    if (!file) throw InvalidArgument("cannot write " + p);
    os = &file;
  }
};

void write_sidecar(const RunConfig& c, const std::string& command, const std::string& csv_path, const json& extra) {
  json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["rng"] = Rng::kAlgorithm;
  j["config"] = c.to_json();
  const auto t = c.timing();
  const auto h = c.hd_timing();
  j["timing_slots"] = {{"H", t.header}, {"L_p", t.payload}, {"SIFS", t.sifs}, {"ACK", t.ack},
                       {"tau_F", t.tau_f}, {"tau_H", t.tau_h}, {"tau_V", t.tau_v}, {"tau_A", t.tau_a},
                       {"RTS", h.rts}, {"CTS", h.cts}, {"hd_exchange", h.exchange()}};
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  if (csv_path.empty() || csv_path == "-") {
    std::cerr << j.dump(2) << "\n";
    return;
  }
  std::ofstream f(csv_path + ".config.json");
  f << j.dump(2) << "\n";
}

// ---- subcommands ----

int cmd_model(const RunConfig& c) {
  const auto g = grid(c);
  Output out(c.out);
  *out.os << header_line() << "\n";
  bool failed = false;
  run_ordered<ModelResult>(
      g.size(), worker_count(c), [&](std::size_t i) { return model_point(c, g[i], c.mode); },
      [&](std::size_t, const ModelResult& r) {
        failed |= r.failed;
        for (const auto& row : r.rows) *out.os << row.line() << "\n";
      });
  write_sidecar(c, "model", c.out, json::object());
  return failed ? kSolver : kOk;
}

int cmd_simulate(const RunConfig& c) {
  const auto g = grid(c);
  Output out(c.out);
  *out.os << header_line() << "\n";
  json points = json::array();
  run_ordered<std::pair<SimStats, std::vector<Row>>>(
      g.size(), worker_count(c),
      [&](std::size_t i) {
        auto st = simulate_point(c, g[i], c.mode, i);
        auto rows = sim_rows(c, g[i], c.mode, st);
        return std::pair{std::move(st), std::move(rows)};
      },
      [&](std::size_t i, const std::pair<SimStats, std::vector<Row>>& r) {
        for (const auto& row : r.second) *out.os << row.line() << "\n";
        points.push_back({{"n", g[i].n}, {"n_h", g[i].n_h}, {"W", g[i].W}, {"runs", r.first.reports.size()},
                          {"stopped_by", r.first.stopped_by}, {"mean", r.first.mean},
                          {"ci_halfwidth", std::isfinite(r.first.halfwidth) ? json(r.first.halfwidth) : json()}});
      });
  write_sidecar(c, "simulate", c.out, {{"points", points}});
  return kOk;
}

int cmd_gain(const RunConfig& c) {
  const auto g = grid(c);
  Output out(c.out);
  *out.os << header_line() << "\n";
  bool failed = false;
  struct Result {
    std::vector<Row> rows;
    bool failed = false;
  };
  run_ordered<Result>(
      g.size(), worker_count(c),
      [&](std::size_t i) {
        Result res;
        if (c.engine == "model" || c.engine == "both") {
          auto f = model_point(c, g[i], "fd");
          auto h = model_point(c, g[i], "hd");
          res.failed = f.failed || h.failed;
          if (!res.failed) {
            const double gain = hd::fd_gain(f.system, h.system);
            f.rows[0].num("gain", gain);
            h.rows[0].num("gain", gain);
          }
          res.rows.push_back(f.rows[0]);
          res.rows.push_back(h.rows[0]);
        }
        if (c.engine == "sim" || c.engine == "both") {
          const auto f = simulate_point(c, g[i], "fd", i);
          const auto h = simulate_point(c, g[i], "hd", i);
          const double gain = f.mean / h.mean;
          for (auto& row : sim_rows(c, g[i], "fd", f, gain)) res.rows.push_back(row);
          for (auto& row : sim_rows(c, g[i], "hd", h, gain)) res.rows.push_back(row);
        }
        return res;
      },
      [&](std::size_t, const Result& r) {
        failed |= r.failed;
        for (const auto& row : r.rows) *out.os << row.line() << "\n";
      });
  write_sidecar(c, "gain", c.out, json::object());
  return failed ? kSolver : kOk;
}

bool accounting_ok(const sim::SimReport& r, const MacTiming& t, std::string& why) {
  for (std::size_t i = 0; i < r.nodes.size(); ++i) {
    std::int64_t s = 0;
    for (auto v : r.nodes[i].tally) s += v;
    if (s != r.measured_slots) {
      why = "slot tallies of observer " + std::to_string(i) + " do not sum to the measured slots";
      return false;
    }
  }
  if (r.hidden_collision_events > 0) {
    const double ratio = r.mean_hidden_collision() / static_cast<double>(t.tau_v);
    if (ratio < 1.4 || ratio > 1.6) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "mean hidden collision %.3f tau_V outside [1.4, 1.6]", ratio);
      why = buf;
      return false;
    }
  }
  return true;
}

int cmd_validate(const RunConfig& c) {
  if (c.out_dir.empty()) throw InvalidArgument("validate needs --out-dir");
  if (!std::filesystem::is_directory(c.out_dir))
    throw InvalidArgument("output directory does not exist: " + c.out_dir);
  if (c.mode != "fd") throw InvalidArgument("validate compares the full-duplex engines; use --mode fd");
  const auto g = grid(c);
  const auto timing = c.timing();
  struct Result {
    GridPoint p;
    double model = NAN, sim = NAN, halfwidth = NAN, se_rel = NAN, rel = NAN;
    bool pass = false;
    std::string note;
  };
  std::vector<Result> results(g.size());
  run_ordered<Result>(
      g.size(), worker_count(c),
      [&](std::size_t i) {
        Result r;
        r.p = g[i];
        const auto m = model_point(c, g[i], "fd");
        r.model = m.system;
        const auto st = simulate_point(c, g[i], "fd", i);
        r.sim = st.mean;
        r.halfwidth = st.halfwidth;
        std::vector<double> xs;
        for (const auto& rep : st.reports) xs.push_back(rep.throughput_system());
        r.se_rel = st.reports.size() > 1 ? st.halfwidth / t_quantile(static_cast<int>(xs.size())) / st.mean : NAN;
        r.rel = (r.model - r.sim) / r.sim;
        r.pass = !m.failed && std::abs(r.rel) <= c.tolerance && std::isfinite(r.se_rel) && r.se_rel <= c.se_target;
        if (m.failed) r.note = "model failed";
        else if (!(std::isfinite(r.se_rel) && r.se_rel <= c.se_target)) r.note = "standard error above target";
        else if (!r.pass) r.note = "drift above tolerance";
        for (const auto& rep : st.reports) {
          std::string why;
          if (!accounting_ok(rep, timing, why)) {
            r.pass = false;
            r.note = why + " (seed " + std::to_string(rep.seed) + ")";
          }
        }
        return r;
      },
      [&](std::size_t i, const Result& r) { results[i] = r; });

  const std::string table_path = (std::filesystem::path(c.out_dir) / "validate.csv").string();
  std::ofstream table(table_path);
  table << "n,n_h,W,model,sim,sim_ci_halfwidth,sim_se_rel,rel_diff,pass,note\n";
  std::printf("%4s %4s %6s %10s %10s %9s %9s  %s\n", "n", "n_h", "W", "model", "sim", "se/mean", "rel", "result");
  bool all = true;
  for (const auto& r : results) {
    all &= r.pass;
    table << r.p.n << ',' << r.p.n_h << ',' << r.p.W << ',' << r.model << ',' << r.sim << ',' << r.halfwidth << ','
          << r.se_rel << ',' << r.rel << ',' << (r.pass ? "pass" : "fail") << ',' << r.note << "\n";
    std::printf("%4d %4d %6d %10.5f %10.5f %9.4f %+8.2f%%  %s %s\n", r.p.n, r.p.n_h, r.p.W, r.model, r.sim, r.se_rel,
                100 * r.rel, r.pass ? "pass" : "FAIL", r.note.c_str());
  }

  // Peak location over the W grid, per (n, n_h), when the grid allows it.
  json peaks = json::array();
  if (c.expected_peak_W > 0 && c.topology == "ring" && c.W.size() >= 3) {
    for (int n : c.n)
      for (int h : c.n_h) {
        if (std::find(c.peak_n_h.begin(), c.peak_n_h.end(), h) == c.peak_n_h.end()) continue;
        int best_model = 0, best_sim = 0;
        double vm = -1, vs = -1;
        for (const auto& r : results) {
          if (r.p.n != n || r.p.n_h != h) continue;
          if (r.model > vm) vm = r.model, best_model = r.p.W;
          if (r.sim > vs) vs = r.sim, best_sim = r.p.W;
        }
        const bool ok = best_model == c.expected_peak_W && best_sim == c.expected_peak_W;
        all &= ok;
        std::printf("peak n=%d n_h=%d: model W=%d, sim W=%d, expected %d  %s\n", n, h, best_model, best_sim,
                    c.expected_peak_W, ok ? "pass" : "FAIL");
        peaks.push_back({{"n", n}, {"n_h", h}, {"model_W", best_model}, {"sim_W", best_sim}, {"pass", ok}});
      }
  }
  write_sidecar(c, "validate", table_path, {{"peaks", peaks}, {"pass", all}});
  std::printf("%s\n", all ? "validation passed" : "validation FAILED");
  return all ? kOk : kValidation;
}

int cmd_topology(const RunConfig& c, double radius) {
  const GridPoint p{c.n.front(), c.n_h.empty() ? 0 : c.n_h.front(), 0};
  Topology t;
  if (c.topology == "ring")
    t = radius > 0 ? ring(p.n, radius, c.range_m) : ring_with_hidden(p.n, p.n_h, c.range_m);
  else
    t = random_disk(p.n, c.range_m, c.topology_seed, c.placement);
  Output out(c.out);
  write_topology(*out.os, t);
  return kOk;
}

std::vector<int> parse_list(const std::string& s) {
  std::vector<int> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon != std::string::npos) {
      // a:b:step, inclusive
      std::vector<int> parts;
      std::stringstream is(item);
      std::string x;
      while (std::getline(is, x, ':')) parts.push_back(std::stoi(x));
      if (parts.size() != 3 || parts[2] <= 0) throw InvalidArgument("bad range '" + item + "'");
      for (int k = parts[0]; k <= parts[1]; k += parts[2]) v.push_back(k);
    } else {
      v.push_back(std::stoi(item));
    }
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Full-duplex MAC model, simulator and sweeps"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string config_path, mode, engine, topology, n_list, nh_list, w_list, placement, collision, quant, out,
      out_dir, trace, peak_list;
  double range = 0, ci = 0, warm = -1, tolerance = 0, se = 0, radius = 0, payload = 0, slot_us = 0;
  long long slots = 0, budget = 0;
  int seeds = 0, topologies = 0, workers = 0, max_iters = 0, peak = -1;
  long long seed_base = -1, topo_seed = -1;
  double tol = 0;

  auto add_common = [&](CLI::App* s) {
    s->add_option("--config", config_path, "JSON configuration file");
    s->add_option("--mode", mode, "fd or hd");
    s->add_option("--topology", topology, "ring or random");
    s->add_option("--n", n_list, "client counts, e.g. 8,12 or 4:40:4");
    s->add_option("--nh", nh_list, "hidden-terminal counts (ring)");
    s->add_option("--W", w_list, "contention windows");
    s->add_option("--range", range, "sensing range in metres");
    s->add_option("--placement", placement, "uniform_area or uniform_radius");
    s->add_option("--topologies", topologies, "random topologies per point (model)");
    s->add_option("--topology-seed", topo_seed, "first random topology seed (model)");
    s->add_option("--collision-model", collision, "printed or three_case");
    s->add_option("--quantization", quant, "ceil, nearest or floor");
    s->add_option("--payload-bytes", payload, "payload size");
    s->add_option("--slot-us", slot_us, "slot time");
    s->add_option("--tol", tol, "fixed-point tolerance");
    s->add_option("--max-iters", max_iters, "fixed-point iteration budget");
    s->add_option("--slots", slots, "slots per simulation run");
    s->add_option("--seeds", seeds, "minimum simulation runs per point");
    s->add_option("--seed-base", seed_base, "first simulation seed");
    s->add_option("--ci-target", ci, "stop once the 95% CI half-width is below this fraction of the mean");
    s->add_option("--slot-budget", budget, "maximum simulated slots per point");
    s->add_option("--warmup", warm, "warm-up fraction");
    s->add_option("--workers", workers, "worker threads (default: FDMAC_WORKERS or all cores)");
    s->add_option("--out", out, "CSV output file (default stdout)");
    s->add_option("--trace", trace, "per-run event trace file prefix (debug)");
  };
  auto* model = app.add_subcommand("model", "analytical sweep");
  auto* simulate = app.add_subcommand("simulate", "simulation sweep");
  auto* gain = app.add_subcommand("gain", "full-duplex gain over RTS/CTS");
  auto* validate = app.add_subcommand("validate", "model against simulation");
  auto* topo = app.add_subcommand("topology", "dump a topology");
  for (auto* s : {model, simulate, gain, validate, topo}) add_common(s);
  gain->add_option("--engine", engine, "model, sim or both");
  validate->add_option("--out-dir", out_dir, "directory for the diff table")->required();
  validate->add_option("--tolerance", tolerance, "relative model/sim tolerance");
  validate->add_option("--se-target", se, "maximum simulated SE/mean");
  validate->add_option("--expected-peak", peak, "W expected to maximize throughput (0: skip)");
  validate->add_option("--peak-nh", peak_list, "n_h values checked for the peak");
  topo->add_option("--radius", radius, "explicit ring radius in metres");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  RunConfig c;
  if (validate->parsed()) {
    c.n = {20};
    c.n_h = {0, 4, 8, 12};
    c.W = {256, 512, 1024};
  }
  try {
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw InvalidArgument("cannot read config " + config_path);
      c.merge(json::parse(f));
    }
    if (!mode.empty()) c.mode = mode;
    if (!engine.empty()) c.engine = engine;
    if (!topology.empty()) c.topology = topology;
    if (!n_list.empty()) c.n = parse_list(n_list);
    if (!nh_list.empty()) c.n_h = parse_list(nh_list);
    if (!w_list.empty()) c.W = parse_list(w_list);
    if (range > 0) c.range_m = range;
    if (!placement.empty()) c.placement = placement_from_string(placement);
    if (topologies > 0) c.topologies = topologies;
    if (topo_seed >= 0) c.topology_seed = static_cast<std::uint64_t>(topo_seed);
    if (!collision.empty()) c.collision_model = fd::collision_model_from_string(collision);
    if (!quant.empty()) c.phy.quantization = quantization_from_string(quant);
    if (payload > 0) c.phy.payload_bytes = payload;
    if (slot_us > 0) c.phy.slot_us = slot_us;
    if (tol > 0) c.tol = tol;
    if (max_iters > 0) c.max_iters = max_iters;
    if (slots > 0) c.slots = slots;
    if (seeds > 0) c.seeds = seeds;
    if (seed_base >= 0) c.seed_base = static_cast<std::uint64_t>(seed_base);
    if (ci > 0) c.ci_target = ci;
    if (budget > 0) c.slot_budget = budget;
    if (warm >= 0) c.warmup_fraction = warm;
    if (workers > 0) c.workers = workers;
    if (!out.empty()) c.out = out;
    if (!out_dir.empty()) c.out_dir = out_dir;
    if (!trace.empty()) c.trace = trace;
    if (tolerance > 0) c.tolerance = tolerance;
    if (se > 0) c.se_target = se;
    if (peak >= 0) c.expected_peak_W = peak;
    if (!peak_list.empty()) c.peak_n_h = parse_list(peak_list);
    c.validate();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (model->parsed()) return cmd_model(c);
    if (simulate->parsed()) return cmd_simulate(c);
    if (gain->parsed()) return cmd_gain(c);
    if (validate->parsed()) return cmd_validate(c);
    if (topo->parsed()) return cmd_topology(c, radius);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolver;
  }
  return kUsage;
}
