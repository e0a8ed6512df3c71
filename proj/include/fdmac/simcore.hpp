#pragma once

// Slot-accurate simulator of the full-duplex MAC and of the half-duplex
// RTS/CTS baseline over an arbitrary star topology.
//
// Node 0 is the AP, nodes 1..n are the clients of the topology (client i of
// the Topology is node i + 1). The AP hears every client and every client
// hears the AP, so every overlapping transmission is one "episode" at the
// AP: either a clean exchange or a collision group.
//
// Full-duplex rules, per slot:
//   - a contending node that sensed the previous slot idle either starts its
//     header (counter 0) or decrements its counter;
//   - a header lasts tau_V slots; a transmitter that hears another signal
//     during its own header aborts at the end of the header;
//   - a clean client header makes the AP answer in the next slot with its
//     own packet when its head-of-line packet is for that client (tau_F
//     exchange), or with a busy tone otherwise (tau_H exchange);
//   - a clean AP header makes the addressed client answer in full duplex;
//   - a corrupted header group with a transmitter still on air ends with a
//     one-slot collision notification from the AP, sent after the last
//     header of the group;
//   - SIFS gaps inside an exchange are reserved: the AP keeps the medium busy
//     from its first reply slot to the end of the ACK.
// The RTS/CTS baseline replaces the header by an RTS; a clean RTS makes the
// medium busy (CTS and NAV) until the ACK ends; failed RTS senders give up at
// the end of their RTS and nothing is notified.

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fdmac/error.hpp"
#include "fdmac/rng.hpp"
#include "fdmac/timing.hpp"
#include "fdmac/topology.hpp"

namespace fdmac::sim {

enum class ChannelState { fd = 0, hd = 1, btack = 2, collision = 3, idle = 4 };
inline constexpr int kChannelStates = 5;
inline constexpr std::array<const char*, kChannelStates> kChannelStateNames{"fd", "hd", "btack",
                                                                             "collision", "idle"};

enum class Protocol { full_duplex, rts_cts };

struct NodeCounters {
  std::int64_t fd_exchanges = 0;
  std::int64_t hd_exchanges = 0;
  std::int64_t covered_collisions = 0;
  std::int64_t hidden_collisions = 0;
  std::int64_t busy_tones = 0;
  std::int64_t notifications = 0;
  std::int64_t delivered = 0;
  std::int64_t attempts = 0;
  std::int64_t header_successes = 0;
  /// Full-duplex replies started from backoff.
  std::int64_t fd_replies = 0;
  std::int64_t contention_slots = 0;
  std::int64_t contention_idle_slots = 0;
  std::array<std::int64_t, kChannelStates> tally{};
  /// The same split restricted to slots spent contending.
  std::array<std::int64_t, kChannelStates> contention_tally{};

  bool operator==(const NodeCounters&) const = default;
};

struct SimReport {
  std::string mode;
  int W = 0;
  std::uint64_t seed = 0;
  Slots total_slots = 0;
  Slots warmup_slots = 0;
  Slots measured_slots = 0;
  Slots payload_slots = 0;
  Slots tau_v = 0;
  std::vector<NodeCounters> nodes;  // [0] is the AP
  std::int64_t notified_collisions = 0;
  // Notified collisions and their AP-side length, from the first header
  // start to the end of the first header that began later.
  std::int64_t hidden_collision_events = 0;
  std::int64_t hidden_collision_slots = 0;
  Slots fd_exchange_min = 0, fd_exchange_max = 0;
  Slots hd_exchange_min = 0, hd_exchange_max = 0;
  std::int64_t decode_violations = 0;

  int n() const { return static_cast<int>(nodes.size()) - 1; }

  double node_throughput(int node) const {
    return measured_slots == 0 ? 0.0
                               : static_cast<double>(nodes[node].delivered * payload_slots) /
                                     static_cast<double>(measured_slots);
  }
  double throughput_ap() const { return node_throughput(0); }
  double throughput_client_mean() const {
    double s = 0;
    for (int i = 1; i <= n(); ++i) s += node_throughput(i);
    return n() > 0 ? s / n() : 0.0;
  }
  double throughput_system() const {
    double s = 0;
    for (int i = 0; i <= n(); ++i) s += node_throughput(i);
    return s;
  }

  /// Mean AP-side length of notified collisions, in slots.
  double mean_hidden_collision() const {
    return hidden_collision_events == 0
               ? 0.0
               : static_cast<double>(hidden_collision_slots) / static_cast<double>(hidden_collision_events);
  }

  /// Fraction of contention slots a node sensed idle.
  double idle_fraction_in_contention(int node) const {
    const auto& c = nodes[node];
    return c.contention_slots == 0 ? 0.0
                                   : static_cast<double>(c.contention_idle_slots) /
                                         static_cast<double>(c.contention_slots);
  }

  double header_success_ratio(int node) const {
    const auto& c = nodes[node];
    return c.attempts == 0 ? 0.0
                           : static_cast<double>(c.header_successes) / static_cast<double>(c.attempts);
  }

  /// Full-duplex replies per contention slot.
  double fd_reply_rate(int node) const {
    const auto& c = nodes[node];
    return c.contention_slots == 0
               ? 0.0
               : static_cast<double>(c.fd_replies) / static_cast<double>(c.contention_slots);
  }

  bool operator==(const SimReport&) const = default;

  std::string serialize() const {
    std::ostringstream os;
    os << "mode=" << mode << " W=" << W << " seed=" << seed << " total=" << total_slots
       << " warmup=" << warmup_slots << " measured=" << measured_slots << " payload=" << payload_slots
       << " tau_v=" << tau_v << " notified=" << notified_collisions << " hidden_events=" << hidden_collision_events
       << " hidden_slots=" << hidden_collision_slots << " fd_ex=" << fd_exchange_min << '/'
       << fd_exchange_max << " hd_ex=" << hd_exchange_min << '/' << hd_exchange_max
       << " violations=" << decode_violations << '\n';
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& c = nodes[i];
      os << i << ": fd=" << c.fd_exchanges << " hd=" << c.hd_exchanges << " cc=" << c.covered_collisions
         << " hc=" << c.hidden_collisions << " bt=" << c.busy_tones << " cn=" << c.notifications
         << " dl=" << c.delivered << " att=" << c.attempts << " ok=" << c.header_successes
         << " fdr=" << c.fd_replies << " cs=" << c.contention_slots << " ci=" << c.contention_idle_slots
         << " tally=";
      for (auto v : c.tally) os << v << ',';
      os << " ctally=";
      for (auto v : c.contention_tally) os << v << ',';
      os << '\n';
    }
    return os.str();
  }
};

/// Per-observer fractions of measured slots spent in each channel state.
inline std::vector<std::array<double, kChannelStates>> channel_state_trace(const SimReport& r) {
  std::vector<std::array<double, kChannelStates>> out(r.nodes.size());
  for (std::size_t i = 0; i < r.nodes.size(); ++i)
    for (int k = 0; k < kChannelStates; ++k)
      out[i][k] = r.measured_slots == 0 ? 0.0
                                        : static_cast<double>(r.nodes[i].tally[k]) /
                                              static_cast<double>(r.measured_slots);
  return out;
}

struct SimOptions {
  double warmup_fraction = 0.05;
  /// When false nobody ever transmits (diagnostic).
  bool inject_traffic = true;
  /// Optional per-event trace, lines `slot,node,event`.
  std::ostream* trace = nullptr;
};

namespace detail {

inline constexpr Slots kNever = std::numeric_limits<Slots>::min() / 4;

class Engine {
 public:
  struct Durations {
    Slots header = 0;   // tau_V, or the RTS
    Slots payload = 0;  // L_p
    Slots fd_exchange = 0;
    Slots hd_exchange = 0;
    Slots rts_exchange = 0;
  };

  Engine(const Topology& topo, int W, Protocol protocol, Durations d, Slots total, std::uint64_t seed,
         const SimOptions& opts)
      : protocol_(protocol), W_(W), d_(d), total_(total), seed_(seed), opts_(opts) {
    check_invariants(topo);
    if (topo.geometric)
      for (int i = 0; i < topo.n(); ++i)
        if (distance(topo.positions[i], {}) > topo.range_m * (1 + 1e-9))
          throw InvalidArgument("simulate: client " + std::to_string(i) + " outside AP range");
    if (W < 1) throw InvalidArgument("simulate: W must be >= 1");
    if (total < 1) throw InvalidArgument("simulate: total_slots must be >= 1");
    if (!(opts.warmup_fraction >= 0 && opts.warmup_fraction < 1))
      throw InvalidArgument("simulate: warm-up fraction must be in [0,1)");
    n_ = topo.n();
    const int N = n_ + 1;
    hear_.assign(static_cast<std::size_t>(N) * N, 0);
    for (int i = 0; i < N; ++i) {
      set_hear(0, i);
      set_hear(i, 0);
    }
    for (int i = 0; i < n_; ++i)
      for (int j : topo.covered[i]) set_hear(i + 1, j + 1);
    nodes_.reserve(N);
    for (int i = 0; i < N; ++i) nodes_.emplace_back(seed, static_cast<std::uint64_t>(i));
    for (auto& nd : nodes_) nd.counter = draw(nd);
    if (n_ > 0) nodes_[0].hol_dest = 1 + static_cast<int>(nodes_[0].rng.below(n_));
    warm_ = static_cast<Slots>(static_cast<double>(total) * opts.warmup_fraction);
    report_.mode = protocol == Protocol::full_duplex ? "fd" : "hd";
    report_.W = W;
    report_.seed = seed;
    report_.total_slots = total;
    report_.warmup_slots = warm_;
    report_.measured_slots = total - warm_;
    report_.payload_slots = d.payload;
    report_.tau_v = d.header;
    report_.nodes.assign(N, NodeCounters{});
    pending_.assign(N, 0);
    pending_contention_.assign(N, 0);
  }

  SimReport run() {
    for (Slots t = 0; t < total_; ++t) {
      if (try_skip_idle(t)) continue;
      if (try_skip_exchange(t)) continue;
      step(t);
    }
    flush_pending();
    return report_;
  }

 private:
  enum class Mode { contend, attempt, engaged };
  enum class Kind { none, fd_client, hd_client, fd_ap, rts_client, rts_ap };

  struct Node {
    Node(std::uint64_t seed, std::uint64_t id) : rng(seed, id) {}
    Rng rng;
    Mode mode = Mode::contend;
    Slots counter = 0;
    bool idle_prev = false;
    Slots emit_from = kNever;
    Slots emit_until = kNever;
    Slots header_start = kNever;
    Slots header_end = kNever;
    bool heard_other = false;
    bool notified = false;
    bool rx_interference = false;
    int hol_dest = 0;  // AP only

    bool emitting(Slots t) const { return emit_from <= t && t <= emit_until; }
  };

  enum class Phase { none, contest, exchange };

  struct Episode {
    Phase phase = Phase::none;
    Kind kind = Kind::none;
    Slots first_start = 0;
    Slots last_header_end = kNever;
    Slots second_header_end = kNever;
    Slots notify_slot = kNever;
    Slots reply_start = kNever;
    Slots end = kNever;
    bool corrupt = false;
    int initiator = -1;
    int peer = -1;
    int attempts = 0;
    bool ap_in_exchange = false;  // AP's own packet is part of the exchange
  };

  void set_hear(int a, int b) { hear_[static_cast<std::size_t>(a) * (n_ + 1) + b] = 1; }
  bool hears(int a, int b) const { return hear_[static_cast<std::size_t>(a) * (n_ + 1) + b] != 0; }

  Slots draw(Node& nd) { return static_cast<Slots>(nd.rng.below(static_cast<std::uint64_t>(W_))); }
  bool measuring(Slots t) const { return t >= warm_; }
  NodeCounters& counters(int i) { return report_.nodes[i]; }

  void trace(Slots t, int node, const char* event) {
    if (opts_.trace) *opts_.trace << t << ',' << node << ',' << event << '\n';
  }

  int N() const { return n_ + 1; }

  // Whole slots with nobody on air and every node counting down.
  bool try_skip_idle(Slots& t) {
    if (!opts_.inject_traffic) {
      // Nothing ever happens: account the rest of the run at once.
      for (int i = 0; i < N(); ++i) {
        const Slots m = std::max<Slots>(0, total_ - std::max(t, warm_));
        counters(i).tally[static_cast<int>(ChannelState::idle)] += m;
        counters(i).contention_tally[static_cast<int>(ChannelState::idle)] += m;
        counters(i).contention_slots += m;
        counters(i).contention_idle_slots += m;
      }
      t = total_;
      return true;
    }
    if (ep_.phase != Phase::none) return false;
    Slots m = std::numeric_limits<Slots>::max();
    for (const auto& nd : nodes_) {
      if (nd.mode != Mode::contend || !nd.idle_prev || nd.emit_until >= t) return false;
      m = std::min(m, nd.counter);
    }
    m = std::min(m, total_ - t);
    if (m < 1) return false;
    const Slots measured = std::max<Slots>(0, t + m - std::max(t, warm_));
    for (int i = 0; i < N(); ++i) {
      nodes_[i].counter -= m;
      counters(i).tally[static_cast<int>(ChannelState::idle)] += measured;
      counters(i).contention_tally[static_cast<int>(ChannelState::idle)] += measured;
      counters(i).contention_slots += measured;
      counters(i).contention_idle_slots += measured;
    }
    t += m - 1;
    return true;
  }

  // The body of a confirmed exchange: the AP is on air throughout, so every
  // node senses busy and nothing can start.
  bool try_skip_exchange(Slots& t) {
    if (ep_.phase != Phase::exchange || t <= ep_.reply_start || t > ep_.end) return false;
    for (const auto& nd : nodes_)
      if (nd.mode == Mode::attempt && nd.header_end >= t) return false;
    const Slots last = std::min(ep_.end, total_ - 1);
    if (last <= t) return false;
    const Slots len = last - t;  // slots t..last-1; slot `last` goes through step()
    const Slots measured = std::max<Slots>(0, last - std::max(t, warm_));
    for (int i = 0; i < N(); ++i) {
      pending_[i] += measured;
      if (nodes_[i].mode == Mode::contend) {
        counters(i).contention_slots += measured;
        pending_contention_[i] += measured;
      }
      nodes_[i].idle_prev = false;
    }
    (void)len;
    t = last;
    step(t);
    return true;
  }

  void start_attempt(int i, Slots t) {
    auto& nd = nodes_[i];
    nd.mode = Mode::attempt;
    nd.header_start = t;
    nd.header_end = t + d_.header - 1;
    nd.emit_from = t;
    nd.emit_until = protocol_ == Protocol::full_duplex ? t + d_.header + d_.payload - 1 : nd.header_end;
    nd.heard_other = false;
    nd.notified = false;
    nd.rx_interference = false;
    if (measuring(t)) ++counters(i).attempts;
    trace(t, i, "header");
  }

  void join_episode(const std::vector<int>& starters, Slots t) {
    if (starters.empty()) return;
    switch (ep_.phase) {
      case Phase::none:
        ep_ = Episode{};
        ep_.phase = Phase::contest;
        ep_.first_start = t;
        ep_.corrupt = starters.size() > 1;
        break;
      case Phase::contest:
        ep_.corrupt = true;
        break;
      case Phase::exchange:
        if (protocol_ == Protocol::rts_cts) {
          // The AP is already answering; these RTS frames just go unanswered.
          for (int i : starters) stragglers_.push_back(i);
          return;
        }
        // A hidden client started in the AP's first reply slot: the exchange
        // is lost and becomes a collision group.
        ep_.phase = Phase::contest;
        ep_.corrupt = true;
        ep_.kind = Kind::none;
        for (int i : {ep_.initiator, ep_.peer}) {
          if (i < 0) continue;
          if (nodes_[i].mode == Mode::engaged) nodes_[i].mode = Mode::attempt;
        }
        if (ep_.ap_in_exchange) nodes_[0].mode = Mode::attempt;
        trace(t, 0, "late_collision");
        break;
    }
    for (int i : starters) {
      ++ep_.attempts;
      if (t > ep_.first_start && ep_.second_header_end == kNever) ep_.second_header_end = nodes_[i].header_end;
      ep_.last_header_end = std::max(ep_.last_header_end, nodes_[i].header_end);
      if (ep_.notify_slot == t) {
        nodes_[i].emit_until = t;
        nodes_[i].notified = true;
      }
    }
  }

  void step(Slots t) {
    const bool meas = measuring(t);
    // 1. backoff decisions from the previous slot's sensing.
    starters_.clear();
    for (int i = 0; i < N(); ++i) {
      auto& nd = nodes_[i];
      if (nd.mode != Mode::contend || !nd.idle_prev || nd.emit_until >= t) continue;
      if (nd.counter == 0) {
        start_attempt(i, t);
        starters_.push_back(i);
      } else {
        --nd.counter;
      }
    }
    join_episode(starters_, t);

    // 2. who is on air.
    emitters_.clear();
    for (int i = 0; i < N(); ++i)
      if (nodes_[i].emitting(t)) emitters_.push_back(i);

    // 3. transmitters listen during their own header.
    for (int i : emitters_) {
      auto& nd = nodes_[i];
      if (nd.mode != Mode::attempt || t < nd.header_start || t > nd.header_end) continue;
      const int receiver = i == 0 ? nodes_[0].hol_dest : 0;
      for (int j : emitters_) {
        if (j == i) continue;
        if (hears(i, j)) nd.heard_other = true;
        if (hears(receiver, j) && j != receiver) nd.rx_interference = true;
      }
    }

    // 4. sensing and per-observer accounting.
    for (int i = 0; i < N(); ++i) {
      auto& nd = nodes_[i];
      bool busy = nd.emitting(t);
      for (std::size_t k = 0; !busy && k < emitters_.size(); ++k)
        busy = emitters_[k] != i && hears(i, emitters_[k]);
      if (meas) {
        const bool contending = nd.mode == Mode::contend;
        if (busy) {
          if (ep_.phase == Phase::none) {
            ++counters(i).tally[static_cast<int>(ChannelState::collision)];
            if (contending) ++counters(i).contention_tally[static_cast<int>(ChannelState::collision)];
          } else {
            ++pending_[i];
            if (contending) ++pending_contention_[i];
          }
        } else {
          ++counters(i).tally[static_cast<int>(ChannelState::idle)];
          if (contending) ++counters(i).contention_tally[static_cast<int>(ChannelState::idle)];
        }
        if (contending) {
          ++counters(i).contention_slots;
          if (!busy) ++counters(i).contention_idle_slots;
        }
      }
      nd.idle_prev = !busy;
    }

    end_of_slot(t);
  }

  void end_of_slot(Slots t) {
    // Header ends: full-duplex senders that heard a neighbour stop; RTS
    // senders always stop after the RTS.
    for (int i = 0; i < N(); ++i) {
      auto& nd = nodes_[i];
      if (nd.mode != Mode::attempt || nd.header_end != t) continue;
      if (protocol_ == Protocol::rts_cts || nd.heard_other) nd.emit_until = std::min(nd.emit_until, t);
    }

    if (ep_.phase == Phase::contest && t == ep_.last_header_end && ep_.notify_slot == kNever) {
      int alone = -1;
      int live = 0;
      for (int i = 0; i < N(); ++i)
        if (nodes_[i].mode == Mode::attempt) {
          alone = i;
          ++live;
        }
      const bool clean = !ep_.corrupt && live == 1 && ep_.attempts == 1 &&
                         (protocol_ == Protocol::rts_cts || !nodes_[alone].heard_other);
      if (clean) {
        confirm(alone, t);
      } else {
        bool on_air = false;
        for (int i = 0; i < N(); ++i)
          if (nodes_[i].mode == Mode::attempt && nodes_[i].emit_until > t) on_air = true;
        if (protocol_ == Protocol::full_duplex && on_air) {
          ep_.notify_slot = t + 1;
          for (int i = 0; i < N(); ++i) {
            auto& nd = nodes_[i];
            if (nd.mode == Mode::attempt && nd.emit_until > t) {
              nd.emit_until = t + 1;
              nd.notified = true;
            }
          }
          auto& ap = nodes_[0];
          if (ap.emit_until < t) ap.emit_from = t + 1;
          ap.emit_until = t + 1;
          if (measuring(t + 1)) ++counters(0).notifications;
          trace(t + 1, 0, "notify");
        } else {
          ep_.end = t;
        }
      }
    }
    if (ep_.phase == Phase::contest && t == ep_.notify_slot) ep_.end = t;

    // Attempts that are off the air without a confirmed exchange have failed.
    for (int i = 0; i < N(); ++i) {
      auto& nd = nodes_[i];
      if (nd.mode != Mode::attempt || nd.emit_until != t) continue;
      if (ep_.phase == Phase::exchange && (i == ep_.initiator || i == ep_.peer)) continue;
      fail_attempt(i, t);
    }
    for (auto it = stragglers_.begin(); it != stragglers_.end();) {
      if (nodes_[*it].mode != Mode::attempt) it = stragglers_.erase(it);
      else ++it;
    }

    if (ep_.phase != Phase::none && t == ep_.end) resolve(t);
  }

  void fail_attempt(int i, Slots t) {
    auto& nd = nodes_[i];
    if (measuring(t)) {
      if (nd.heard_other && !nd.notified) ++counters(i).covered_collisions;
      else ++counters(i).hidden_collisions;
    }
    nd.mode = Mode::contend;
    nd.counter = draw(nd);
    trace(t, i, "abort");
  }

  // A node that leaves backoff for a full-duplex reply spent the header it
  // just received in that transition, not in contention.
  void leave_backoff(int i) {
    counters(i).contention_slots -= pending_contention_[i];
    pending_contention_[i] = 0;
  }

  void confirm(int i, Slots t) {
    auto& ini = nodes_[i];
    auto& ap = nodes_[0];
    if (ini.rx_interference) ++report_.decode_violations;
    ep_.phase = Phase::exchange;
    ep_.initiator = i;
    ep_.reply_start = t + 1;
    ini.mode = Mode::engaged;
    const Slots s = ep_.first_start;
    if (protocol_ == Protocol::rts_cts) {
      ep_.end = s + d_.rts_exchange - 1;
      ep_.kind = i == 0 ? Kind::rts_ap : Kind::rts_client;
      if (i == 0) {
        ap.emit_until = ep_.end;
      } else {
        ap.emit_from = t + 1;
        ap.emit_until = ep_.end;
      }
      trace(t + 1, i == 0 ? ap.hol_dest : 0, "cts");
      return;
    }
    if (i == 0) {
      const int c = ap.hol_dest;
      auto& peer = nodes_[c];
      ep_.kind = Kind::fd_ap;
      ep_.peer = c;
      ep_.ap_in_exchange = true;
      ep_.end = s + d_.fd_exchange - 1;
      ap.emit_until = ep_.end;
      peer.mode = Mode::engaged;
      peer.emit_from = t + 1;
      peer.emit_until = s + 2 * d_.header + d_.payload - 1;
      leave_backoff(c);
      if (measuring(t)) ++counters(c).fd_replies;
      trace(t + 1, c, "fd_reply");
      return;
    }
    ap.emit_from = t + 1;
    if (ap.hol_dest == i) {
      ep_.kind = Kind::fd_client;
      ep_.peer = 0;
      ep_.ap_in_exchange = true;
      ep_.end = s + d_.fd_exchange - 1;
      ap.mode = Mode::engaged;
      leave_backoff(0);
      if (measuring(t)) ++counters(0).fd_replies;
      trace(t + 1, 0, "fd_reply");
    } else {
      ep_.kind = Kind::hd_client;
      ep_.end = s + d_.hd_exchange - 1;
      if (measuring(t)) ++counters(0).busy_tones;
      trace(t + 1, 0, "busy_tone");
    }
    ap.emit_until = ep_.end;
  }

  ChannelState category(int observer) const {
    switch (ep_.kind) {
      case Kind::fd_client:
        return observer == 0 || observer == ep_.initiator || hears(observer, ep_.initiator)
                   ? ChannelState::fd
                   : ChannelState::hd;
      case Kind::hd_client:
        return observer == 0 || observer == ep_.initiator || hears(observer, ep_.initiator)
                   ? ChannelState::hd
                   : ChannelState::btack;
      case Kind::fd_ap: return ChannelState::fd;
      case Kind::rts_client:
      case Kind::rts_ap: return ChannelState::hd;
      case Kind::none: break;
    }
    return ChannelState::collision;
  }

  void flush_pending() {
    for (int i = 0; i < N(); ++i) {
      counters(i).tally[static_cast<int>(category(i))] += pending_[i];
      counters(i).contention_tally[static_cast<int>(category(i))] += pending_contention_[i];
      pending_[i] = 0;
      pending_contention_[i] = 0;
    }
  }

  void note_exchange(Slots len, bool full) {
    auto& lo = full ? report_.fd_exchange_min : report_.hd_exchange_min;
    auto& hi = full ? report_.fd_exchange_max : report_.hd_exchange_max;
    lo = lo == 0 ? len : std::min(lo, len);
    hi = std::max(hi, len);
  }

  void finish_engaged(int i, bool new_hol) {
    auto& nd = nodes_[i];
    nd.mode = Mode::contend;
    nd.counter = draw(nd);
    if (i == 0 && new_hol && n_ > 0) nd.hol_dest = 1 + static_cast<int>(nd.rng.below(n_));
  }

  void resolve(Slots t) {
    const bool meas = measuring(t);
    flush_pending();
    const Slots len = t - ep_.first_start + 1;
    switch (ep_.kind) {
      case Kind::fd_client: {
        const int k = ep_.initiator;
        if (meas) {
          for (int i : {k, 0}) {
            ++counters(i).fd_exchanges;
            ++counters(i).delivered;
          }
          ++counters(k).header_successes;
        }
        note_exchange(len, true);
        finish_engaged(k, false);
        finish_engaged(0, true);
        trace(t, k, "fd_done");
        break;
      }
      case Kind::hd_client: {
        const int k = ep_.initiator;
        if (meas) {
          ++counters(k).hd_exchanges;
          ++counters(k).delivered;
          ++counters(k).header_successes;
        }
        note_exchange(len, false);
        finish_engaged(k, false);
        trace(t, k, "hd_done");
        break;
      }
      case Kind::fd_ap: {
        const int c = ep_.peer;
        if (meas) {
          for (int i : {0, c}) {
            ++counters(i).fd_exchanges;
            ++counters(i).delivered;
          }
          ++counters(0).header_successes;
        }
        note_exchange(len, true);
        finish_engaged(c, false);
        finish_engaged(0, true);
        trace(t, c, "fd_done");
        break;
      }
      case Kind::rts_client:
      case Kind::rts_ap: {
        const int k = ep_.initiator;
        if (meas) {
          ++counters(k).hd_exchanges;
          ++counters(k).delivered;
          ++counters(k).header_successes;
        }
        note_exchange(len, false);
        finish_engaged(k, k == 0);
        trace(t, k, "hd_done");
        break;
      }
      case Kind::none:
        if (ep_.notify_slot != kNever && meas) {
          ++report_.notified_collisions;
          if (ep_.second_header_end != kNever) {
            ++report_.hidden_collision_events;
            report_.hidden_collision_slots += ep_.second_header_end - ep_.first_start + 1;
          }
        }
        break;
    }
    ep_ = Episode{};
  }

  Protocol protocol_;
  int W_;
  Durations d_;
  Slots total_;
  std::uint64_t seed_;
  SimOptions opts_;
  int n_ = 0;
  Slots warm_ = 0;
  std::vector<char> hear_;
  std::vector<Node> nodes_;
  std::vector<Slots> pending_;
  std::vector<Slots> pending_contention_;
  std::vector<int> starters_;
  std::vector<int> emitters_;
  std::vector<int> stragglers_;
  Episode ep_;
  SimReport report_;
};

}  // namespace detail

inline SimReport run_fd(const Topology& topo, int W, const MacTiming& timing, Slots total_slots,
                        std::uint64_t seed, const SimOptions& opts = {}) {
  detail::Engine::Durations d;
  d.header = timing.tau_v;
  d.payload = timing.payload;
  d.fd_exchange = timing.tau_f;
  d.hd_exchange = timing.tau_h;
  return detail::Engine(topo, W, Protocol::full_duplex, d, total_slots, seed, opts).run();
}

inline SimReport run_hd_rtscts(const Topology& topo, int W, const HdTiming& timing, Slots total_slots,
                               std::uint64_t seed, const SimOptions& opts = {}) {
  detail::Engine::Durations d;
  d.header = timing.rts;
  d.payload = timing.mac.payload;
  d.rts_exchange = timing.exchange();
  return detail::Engine(topo, W, Protocol::rts_cts, d, total_slots, seed, opts).run();
}

}  // namespace fdmac::sim
