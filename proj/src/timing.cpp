#include "edca/timing.hpp"

#include <algorithm>
#include <cmath>

namespace edca {

namespace {
constexpr double kServiceBits = 16.0;
constexpr double kTailBits = 6.0;
}  // namespace

double aifs_us(int aifsn, const PhyParams& phy) { return phy.sifs_us + aifsn * phy.slot_us; }

double aifs_us(const AcParams& ac, const PhyParams& phy) { return aifs_us(ac.aifsn, phy); }

double frame_duration_us(double bytes, double rate_mbps, const PhyParams& phy) {
  const double bits_per_symbol = phy.ofdm_symbol_us * rate_mbps;
  // Guard the ceil against representation noise (e.g. 5.0000000001 symbols).
  const double symbols = std::ceil((kServiceBits + kTailBits + 8.0 * bytes) / bits_per_symbol - 1e-9);
  return phy.preamble_us + phy.ofdm_symbol_us * symbols + phy.signal_extension_us;
}

ExchangeOverhead exchange_overhead(const PhyParams& phy) {
  ExchangeOverhead o;
  o.ack_us = frame_duration_us(phy.ack_bytes, phy.basic_rate_mbps, phy);
  o.ack_timeout_us = phy.sifs_us + o.ack_us + phy.slot_us;
  o.rts_us = frame_duration_us(phy.rts_bytes, phy.basic_rate_mbps, phy);
  o.cts_us = frame_duration_us(phy.cts_bytes, phy.basic_rate_mbps, phy);
  o.cts_timeout_us = phy.sifs_us + o.cts_us + phy.slot_us;
  return o;
}

double success_busy_us(double payload_us, const PhyParams& phy, AccessMode access) {
  const auto o = exchange_overhead(phy);
  const double d = phy.propagation_us;
  double t = payload_us + d + phy.sifs_us + o.ack_us + d;
  if (access == AccessMode::rts_cts) t += o.rts_us + d + phy.sifs_us + o.cts_us + d + phy.sifs_us;
  return t;
}

double collision_busy_us(double longest_payload_us, const PhyParams& phy, AccessMode access) {
  const auto o = exchange_overhead(phy);
  if (access == AccessMode::rts_cts) return o.rts_us + o.cts_timeout_us;
  return longest_payload_us + o.ack_timeout_us;
}

ExchangeTimes exchange_times(const TrafficClassTable& table, const PhyParams& phy, AccessMode access) {
  ExchangeTimes t;
  const auto n = table.size();
  const auto o = exchange_overhead(phy);
  t.slot_us = phy.slot_us;
  for (int i = 0; i < kNumAcs; ++i) {
    const int aifsn = table.acs[i] ? table.acs[i]->aifsn : 0;
    t.aifs_us[i] = aifs_us(aifsn, phy);
    t.ack_timeout_us[i] = o.ack_timeout_us;
  }
  if (n == 0) return t;
  t.payload_us.resize(n);
  for (std::size_t j = 0; j < n; ++j)
    t.payload_us[j] = frame_duration_us(phy.mac_header_bytes + table[j].traffic.packet_bytes, phy.data_rate_mbps, phy);

  // Every TC is eligible in the last contention zone, so any two TCs can meet
  // in a collision; the longest colliding frame sets the busy period.
  const double longest = *std::max_element(t.payload_us.begin(), t.payload_us.end());
  t.longest_payload_us.assign(n, longest);
  t.success_us.resize(n);
  t.collision_us.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double aifs = t.aifs_us[table[j].ac];
    t.success_us[j] = success_busy_us(t.payload_us[j], phy, access) + aifs;
    t.collision_us[j] = collision_busy_us(t.longest_payload_us[j], phy, access) + aifs;
  }
  return t;
}

}  // namespace edca
