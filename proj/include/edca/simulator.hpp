#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "edca/scenario.hpp"

namespace edca {

struct SimOptions {
  double duration_s = 100.0;
  double warmup_s = 5.0;
  int buffer_packets = 100;
  double deadline_ms = 150.0;  // end to end, wired delay included
  double wired_delay_ms = 20.0;
  bool collect_activity = false;
  std::string packet_trace_path;  // per-packet CSV when non-empty

  static SimOptions from(const SimulationConfig& cfg);
};

inline constexpr int kDelayBins = 200;  // 1 ms bins, last one is overflow

struct TcMetrics {
  int ac = 0;
  int flows = 0;
  bool saturated = false;

  // Whole-run counters, used for the conservation identity.
  std::uint64_t generated = 0;
  std::uint64_t delivered = 0;
  std::uint64_t retry_drops = 0;
  std::uint64_t buffer_drops = 0;
  std::uint64_t deadline_drops = 0;
  std::uint64_t residual = 0;

  // Counters for packets generated after warmup.
  std::uint64_t window_generated = 0;
  std::uint64_t window_delivered = 0;
  std::uint64_t window_lost = 0;

  std::uint64_t attempts = 0;
  std::uint64_t collisions = 0;           // failed attempts, internal or external
  std::uint64_t internal_collisions = 0;  // lost an internal contention

  double throughput = 0.0;         // normalized: payload airtime of successes / measured time
  double mean_service_us = 0.0;    // head of line to success or drop
  double mean_delay_us = 0.0;      // wireless delay of delivered packets
  std::vector<std::uint64_t> delay_histogram;  // delivered packets, 1 ms bins

  // Conditional activity pdf sampled when a packet of this TC reaches the
  // head of its queue; index k = number of active users, tagged one included.
  std::vector<double> activity;

  double loss_ratio() const;
  double collision_probability() const;
};

struct SimMetrics {
  std::vector<TcMetrics> classes;  // indexed like derive_traffic_classes
  std::vector<std::uint64_t> slot_visits;  // idle periods that reached post-AIFS slot n (index n-1)
  std::uint64_t successes = 0;
  std::uint64_t external_collisions = 0;  // collision events on the medium
  std::uint64_t internal_collisions = 0;
  double measured_s = 0.0;

  double total_throughput() const;
  // Largest loss ratio over non-saturated TCs (0 if there are none).
  double max_loss_ratio() const;
};

SimMetrics simulate(const Scenario& scenario, std::uint64_t seed, const SimOptions& options);
inline SimMetrics simulate(const Scenario& scenario, std::uint64_t seed) {
  return simulate(scenario, seed, SimOptions::from(scenario.simulation));
}

struct CapacitySearch {
  double loss_threshold = 0.01;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  int lo = 1;
  int cap = 1000;
};

// Largest n for which scenario_for(n) keeps every real-time TC at or below
// the loss threshold in a majority of seeds. Seeds of one point run
// concurrently. Throws std::domain_error if n = lo already fails.
int capacity_search(const std::function<Scenario(int)>& scenario_for, const CapacitySearch& search,
                    const SimOptions& options);

// Seed-averaged conditional activity pdf of TC `tagged`.
std::vector<double> activity_histogram(const Scenario& scenario, int tagged, const std::vector<std::uint64_t>& seeds,
                                       SimOptions options);

double total_variation(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace edca
