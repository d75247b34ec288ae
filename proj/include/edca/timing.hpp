#pragma once

#include <array>
#include <vector>

#include "edca/scenario.hpp"

namespace edca {

// AIFS = SIFS + AIFSN * slot.
double aifs_us(const AcParams& ac, const PhyParams& phy);
double aifs_us(int aifsn, const PhyParams& phy);

// ERP-OFDM airtime of a PPDU carrying `bytes` of MAC frame at `rate_mbps`:
// preamble + ceil((service + tail + 8*bytes) / bits-per-symbol) symbols + signal extension.
double frame_duration_us(double bytes, double rate_mbps, const PhyParams& phy);

// Airtime constants of one frame exchange, without the trailing AIFS.
struct ExchangeOverhead {
  double ack_us = 0.0;          // ACK at the basic rate
  double ack_timeout_us = 0.0;  // EIFS - AIFS = SIFS + ACK + slot
  double rts_us = 0.0;
  double cts_us = 0.0;
  double cts_timeout_us = 0.0;
};
ExchangeOverhead exchange_overhead(const PhyParams& phy);

// Busy time of a successful exchange of a data frame of airtime `payload_us`,
// excluding the AIFS that follows.
double success_busy_us(double payload_us, const PhyParams& phy, AccessMode access);
// Busy time of a collision whose longest frame has airtime `longest_payload_us`,
// including the ACK/CTS timeout, excluding AIFS.
double collision_busy_us(double longest_payload_us, const PhyParams& phy, AccessMode access);

struct ExchangeTimes {
  std::vector<double> payload_us;    // T_pj: data frame airtime incl. MAC and PHY headers
  std::vector<double> success_us;    // T_sj
  std::vector<double> collision_us;  // T_cj
  std::vector<double> longest_payload_us;  // T_p*j
  std::array<double, kNumAcs> aifs_us{};
  std::array<double, kNumAcs> ack_timeout_us{};
  double slot_us = 0.0;
};

ExchangeTimes exchange_times(const TrafficClassTable& table, const PhyParams& phy, AccessMode access);

}  // namespace edca
