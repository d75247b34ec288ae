#pragma once

#include <span>
#include <vector>

#include "edca/scenario.hpp"
#include "edca/timing.hpp"

namespace edca {

// Post-AIFS backoff slots n = 1..window, counted from the end of the
// smallest AIFS after a busy period. A TC with AIFS offset d may transmit in
// slot n iff d <= n - 1.
struct ZoneStructure {
  int window = 0;                           // W_min = min_j CW_{F(j),max}
  std::vector<int> zone;                    // ordinal contention zone of slot n (index n-1)
  std::vector<int> zone_ac;                 // AC label x(n) of that zone
  std::vector<std::vector<int>> eligible;   // TCs that may transmit in slot n

  int slots() const { return window; }
};

ZoneStructure zone_structure(const TrafficClassTable& table);

// 1 - prod_{j' eligible} (1 - tau_j')^{f_j'}
double zone_transmission_prob(std::span<const int> eligible, std::span<const double> tau,
                              const TrafficClassTable& table);

// Probability that an attempt of a TC-j user in a slot with the given
// eligible set fails: any other user transmits, except lower-priority ACs of
// the same station, which lose the internal contention to j.
double zone_collision_prob(int j, std::span<const int> eligible, std::span<const double> tau,
                           const TrafficClassTable& table);

// Stationary occupancy b'_n of the post-AIFS slot chain: slot n+1 is reached
// only if slot n stays idle; any transmission returns the chain to slot 1.
std::vector<double> slot_occupancy(std::span<const double> transmission_prob);

// Occupancy-weighted p_c over the slots where TC j is eligible.
double average_collision_prob(int aifs_offset, std::span<const double> occupancy,
                              std::span<const double> slot_collision_prob);

// E_j[t_bo] in slots between two transmissions of a user with collision
// probability p_c.
double mean_backoff_slots(double p_collision, const AcParams& ac);

struct ClassSaturation {
  double tau = 0.0;
  double p_collision = 0.0;
  double p_drop = 0.0;
  double backoff_slots = 0.0;
  double gamma = 0.0;
  double success_us = 0.0;    // E_j[t_suc]
  double collision_us = 0.0;  // E_j[t_col]
  double idle_us = 0.0;       // E_j[t_idle]
  double cycle_us = 0.0;      // E_j[t_cyc]
  double throughput = 0.0;    // S_j, normalized
  double service_us = 0.0;    // E_j[t_srv]
};

struct SaturationSolution {
  std::vector<ClassSaturation> classes;
  std::vector<double> occupancy;  // b'_n
  // successes[j'][j]: expected successes of TC j' during a TC-j cycle (ST_{j',j})
  std::vector<std::vector<double>> successes;
  double mean_collision_size = 0.0;  // f_c
  int iterations = 0;
  double residual = 0.0;
  ZoneStructure zones;

  double total_throughput() const;
};

// Per-TC collision probabilities implied by tau (the p_c half of the fixed point).
std::vector<double> collision_probs(const TrafficClassTable& table, const ZoneStructure& zones,
                                    std::span<const double> tau, std::vector<double>* occupancy = nullptr);

SaturationSolution solve_fixed_point(const TrafficClassTable& table, const ExchangeTimes& times,
                                     const SolverConfig& config);

// E_j[t_srv] with flows[j] users of each TC active (the rest idle). TCs with
// no active user get NaN. A lone active user is served in T_sj.
std::vector<double> service_times(const TrafficClassTable& table, std::span<const int> flows, const PhyParams& phy,
                                  AccessMode access, const SolverConfig& config);

}  // namespace edca
