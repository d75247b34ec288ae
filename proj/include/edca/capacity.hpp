#pragma once

#include <functional>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "edca/saturation.hpp"
#include "edca/scenario.hpp"

namespace edca {

double binomial_pmf(int n, int k, double p);

// Conditional probability that flows[j'] users of every TC are active given
// one TC-j user is. TCs flagged in `pinned` are always fully active and
// contribute a factor of one at flows == f, zero elsewhere.
double activity_weight(int j, std::span<const int> flows, std::span<const double> rho, const TrafficClassTable& table,
                       const std::vector<bool>& pinned = {});

// Distribution of the total number of active users given a TC-j user is
// active: index k holds Pr(sum_j' f'_j' = k).
std::vector<double> activity_pdf(int j, std::span<const double> rho, const TrafficClassTable& table,
                                 const std::vector<bool>& pinned = {});

// Memo of saturation service times keyed by the reduced TC table. Safe for
// concurrent use; entries are value-identical so last write wins.
class ServiceTimeCache {
public:
  explicit ServiceTimeCache(bool enabled = true) : enabled_(enabled) {}

  std::vector<double> service_times(const TrafficClassTable& table, std::span<const int> flows, const PhyParams& phy,
                                    AccessMode access, const SolverConfig& config);

  std::size_t size() const;
  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

private:
  bool enabled_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::vector<double>> entries_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

struct CapacityModel {
  const TrafficClassTable& table;
  PhyParams phy;
  AccessMode access = AccessMode::basic;
  SolverConfig solver;
  UtilizationConfig utilization;
  double weight_epsilon = 1e-6;
  ServiceTimeCache* cache = nullptr;  // optional
};

struct ServiceRate {
  double rate = 0.0;            // μ_j, packets per second
  double mean_service_us = 0.0; // 1/μ_j
  double discarded_mass = 0.0;  // activity probability dropped by truncation
  std::size_t lattice_points = 0;
};

// μ_j from occupancy-weighted saturation service times over the activity
// lattice. Saturated TCs stay pinned at their full flow count.
ServiceRate mean_service_rate(int j, std::span<const double> rho, const CapacityModel& model);

struct CapacityClass {
  double lambda = 0.0;  // packets per second
  double mu = 0.0;
  double rho = 0.0;     // unclamped λ/μ; 1 for saturated TCs
  bool saturated = false;
};

struct CapacitySolution {
  std::vector<CapacityClass> classes;
  int iterations = 0;
  double residual = 0.0;
  double discarded_mass = 0.0;

  // Largest ρ among real-time TCs and the TC holding it (-1 if none).
  double max_realtime_rho() const;
  int binding_class() const;
};

// ρ_j = λ_j / μ_j(ρ) by damped fixed-point iteration from `initial_rho`.
CapacitySolution solve_utilization(const CapacityModel& model, double initial_rho = 0.0);

// Analytic capacity: the last n in [lo, cap] before the first count whose
// real-time ρ exceeds the scenario's threshold or whose fixed point fails to
// converge. Counts are probed in increasing order because far beyond
// capacity the retry-limit drops shrink the service time and ρ falls back
// under the threshold. Returns lo - 1 if n = lo already fails.
int max_admissible_flows(const std::function<Scenario(int)>& scenario_for, int lo, int cap,
                         ServiceTimeCache* cache = nullptr);

// Largest n in [lo, cap] with passes(n), assuming passes is monotone
// non-increasing. Returns lo - 1 if passes(lo) is false.
int largest_passing(const std::function<bool(int)>& passes, int lo, int cap);

}  // namespace edca
