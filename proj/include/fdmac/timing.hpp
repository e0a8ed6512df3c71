#pragma once

// Physical-layer parameters and their conversion to integer slot durations.

#include <cmath>
#include <cstdint>
#include <string>

#include "fdmac/error.hpp"

namespace fdmac {

/// Durations are whole slots throughout the library.
using Slots = std::int64_t;

enum class Quantization { ceil, nearest, floor };

inline std::string to_string(Quantization q) {
  switch (q) {
    case Quantization::ceil: return "ceil";
    case Quantization::nearest: return "nearest";
    case Quantization::floor: return "floor";
  }
  return "ceil";
}

inline Quantization quantization_from_string(const std::string& s) {
  if (s == "ceil") return Quantization::ceil;
  if (s == "nearest") return Quantization::nearest;
  if (s == "floor") return Quantization::floor;
  throw InvalidArgument("unknown quantization '" + s + "'");
}

/// Frame sizes and rates. Defaults reproduce the reference setup: 1000-byte
/// payload, 28-byte MAC header, 24-byte PHY header sent at 1 Mb/s, 10 Mb/s data.
struct PhyParams {
  double mac_header_bytes = 28;
  double phy_header_bytes = 24;
  double ack_bytes = 38;  // includes the PHY header
  double payload_bytes = 1000;
  double slot_us = 20;
  double sifs_us = 10;
  double preamble_rate_bps = 1e6;
  double data_rate_bps = 10e6;
  // RTS/CTS MAC frame sizes for the half-duplex baseline (IEEE 802.11 legacy).
  double rts_bytes = 20;
  double cts_bytes = 14;
  Quantization quantization = Quantization::ceil;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0) || !std::isfinite(v))
        throw InvalidArgument(std::string("PhyParams.") + name + " must be positive and finite");
    };
    positive(mac_header_bytes, "mac_header_bytes");
    positive(phy_header_bytes, "phy_header_bytes");
    positive(ack_bytes, "ack_bytes");
    positive(payload_bytes, "payload_bytes");
    positive(slot_us, "slot_us");
    positive(sifs_us, "sifs_us");
    positive(preamble_rate_bps, "preamble_rate_bps");
    positive(data_rate_bps, "data_rate_bps");
    positive(rts_bytes, "rts_bytes");
    positive(cts_bytes, "cts_bytes");
    if (ack_bytes < phy_header_bytes)
      throw InvalidArgument("PhyParams.ack_bytes must include the PHY header");
  }

  /// Air time in microseconds of a frame whose PHY header goes at the preamble
  /// rate and whose remaining `mac_bytes` go at the data rate.
  double frame_us(double mac_bytes) const {
    return phy_header_bytes * 8.0 / preamble_rate_bps * 1e6 + mac_bytes * 8.0 / data_rate_bps * 1e6;
  }

  Slots to_slots(double us) const {
    // Guard against 40.000000001 turning into 41 under ceil.
    const double x = us / slot_us;
    Slots s = 0;
    switch (quantization) {
      case Quantization::ceil: s = static_cast<Slots>(std::ceil(x - 1e-9)); break;
      case Quantization::nearest: s = static_cast<Slots>(std::llround(x)); break;
      case Quantization::floor: s = static_cast<Slots>(std::floor(x + 1e-9)); break;
    }
    return s < 1 ? 1 : s;
  }
};

/// Protocol durations in slots.
///
/// tau_f: client header, AP reply header, payload, SIFS, ACK (full-duplex exchange).
/// tau_h: header, payload, SIFS, ACK (half-duplex exchange with busy tone).
/// tau_v: vulnerable period, equal to the header.
/// tau_a: busy tone plus ACK as heard by a node hidden from the sender.
struct MacTiming {
  Slots header = 0;
  Slots payload = 0;
  Slots sifs = 0;
  Slots ack = 0;
  Slots sigma = 1;
  Slots tau_f = 0;
  Slots tau_h = 0;
  Slots tau_v = 0;
  Slots tau_a = 0;

  /// Builds the derived durations from the four primitive ones.
  static MacTiming from_primitives(Slots header, Slots payload, Slots sifs, Slots ack) {
    if (header < 1 || payload < 1 || sifs < 1 || ack < 1)
      throw InvalidArgument("MacTiming: primitive durations must be >= 1 slot");
    MacTiming t;
    t.header = header;
    t.payload = payload;
    t.sifs = sifs;
    t.ack = ack;
    t.sigma = 1;
    t.tau_h = header + payload + sifs + ack;
    t.tau_f = t.tau_h + header;
    t.tau_v = header;
    t.tau_a = t.tau_h - t.tau_v;
    return t;
  }

  bool operator==(const MacTiming&) const = default;
};

/// Half-duplex RTS/CTS durations on top of the shared MAC timing.
struct HdTiming {
  MacTiming mac;
  Slots rts = 0;
  Slots cts = 0;

  /// RTS, SIFS, CTS, SIFS, DATA (header + payload), SIFS, ACK.
  Slots exchange() const {
    return rts + mac.sifs + cts + mac.sifs + mac.header + mac.payload + mac.sifs + mac.ack;
  }

  bool operator==(const HdTiming&) const = default;
};

inline MacTiming derive_timing(const PhyParams& phy) {
  phy.validate();
  const Slots header = phy.to_slots(phy.frame_us(phy.mac_header_bytes));
  const Slots payload = phy.to_slots(phy.payload_bytes * 8.0 / phy.data_rate_bps * 1e6);
  const Slots ack = phy.to_slots(phy.frame_us(phy.ack_bytes - phy.phy_header_bytes));
  const Slots sifs = phy.to_slots(phy.sifs_us);
  return MacTiming::from_primitives(header, payload, sifs, ack);
}

inline HdTiming derive_hd_timing(const PhyParams& phy) {
  HdTiming t;
  t.mac = derive_timing(phy);
  t.rts = phy.to_slots(phy.frame_us(phy.rts_bytes));
  t.cts = phy.to_slots(phy.frame_us(phy.cts_bytes));
  return t;
}

}  // namespace fdmac
