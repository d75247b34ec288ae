#include "edca/saturation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "edca/error.hpp"

namespace edca {

ZoneStructure zone_structure(const TrafficClassTable& table) {
  if (table.size() == 0) throw ConfigError("", "no traffic classes");
  ZoneStructure z;
  int window = std::numeric_limits<int>::max();
  int max_offset = 0;
  std::set<int> offsets;
  for (std::size_t j = 0; j < table.size(); ++j) {
    window = std::min(window, table.ac_params(j).cw_max);
    max_offset = std::max(max_offset, table[j].aifs_offset);
    offsets.insert(table[j].aifs_offset);
  }
  if (window <= max_offset)
    throw ConfigError("acs", "smallest CW_max (" + std::to_string(window) + ") does not exceed the largest AIFSN gap (" +
                                 std::to_string(max_offset) + "); contention zones are undefined");
  z.window = window;
  z.zone.resize(window);
  z.zone_ac.resize(window);
  z.eligible.resize(window);
  for (int n = 1; n <= window; ++n) {
    int zone = -1, top_offset = -1;
    for (int d : offsets)
      if (d <= n - 1) {
        ++zone;
        top_offset = d;
      }
    int label = -1;
    for (std::size_t j = 0; j < table.size(); ++j) {
      if (table[j].aifs_offset <= n - 1) z.eligible[n - 1].push_back(static_cast<int>(j));
      if (table[j].aifs_offset == top_offset) label = std::max(label, table[j].ac);
    }
    z.zone[n - 1] = zone;
    z.zone_ac[n - 1] = label;
  }
  return z;
}

namespace {

// Keeps 1 - p_c representable when thousands of users contend.
constexpr double kMaxCollisionProb = 1.0 - 1e-12;

bool contains(std::span<const int> set, int j) { return std::find(set.begin(), set.end(), j) != set.end(); }

// prod over eligible (1 - tau)^f, and the same product with the internal-contention
// siblings of j (same station, AC index <= F(j), eligible) removed.
double all_idle(std::span<const int> eligible, std::span<const double> tau, const TrafficClassTable& table) {
  double p = 1.0;
  for (int k : eligible) p *= std::pow(1.0 - tau[k], table[k].flows);
  return p;
}

double sibling_idle(int j, std::span<const int> eligible, std::span<const double> tau,
                    const TrafficClassTable& table) {
  double p = 1.0;
  for (int k : table[j].siblings)
    if (table[k].ac <= table[j].ac && contains(eligible, k)) p *= 1.0 - tau[k];
  return p;
}

}  // namespace

double zone_transmission_prob(std::span<const int> eligible, std::span<const double> tau,
                              const TrafficClassTable& table) {
  return 1.0 - all_idle(eligible, tau, table);
}

double zone_collision_prob(int j, std::span<const int> eligible, std::span<const double> tau,
                           const TrafficClassTable& table) {
  if (!contains(eligible, j))
    throw std::invalid_argument("TC " + std::to_string(j) + " is not eligible in this contention zone");
  const double denom = sibling_idle(j, eligible, tau, table);
  return std::clamp(1.0 - all_idle(eligible, tau, table) / denom, 0.0, 1.0);
}

std::vector<double> slot_occupancy(std::span<const double> transmission_prob) {
  std::vector<double> b(transmission_prob.size());
  if (b.empty()) return b;
  double reach = 1.0, total = 0.0;
  for (std::size_t n = 0; n < b.size(); ++n) {
    b[n] = reach;
    total += reach;
    reach *= 1.0 - transmission_prob[n];
  }
  for (auto& v : b) v /= total;
  return b;
}

double average_collision_prob(int aifs_offset, std::span<const double> occupancy,
                              std::span<const double> slot_collision_prob) {
  double num = 0.0, den = 0.0;
  for (std::size_t n = static_cast<std::size_t>(aifs_offset); n < occupancy.size(); ++n) {
    num += slot_collision_prob[n] * occupancy[n];
    den += occupancy[n];
  }
  if (!(den > 0.0)) throw std::invalid_argument("no eligible backoff slot for AIFS offset " + std::to_string(aifs_offset));
  return num / den;
}

double mean_backoff_slots(double p, const AcParams& ac) {
  if (!(p >= 0.0 && p < 1.0)) throw std::domain_error("collision probability must lie in [0, 1)");
  const int r = ac.retry_limit;
  double sum = 0.0, pk = 1.0;
  for (int k = 1; k <= r; ++k) {
    sum += pk * (1.0 - p) * ac.window(k) / 2.0;
    pk *= p;
  }
  return sum / (1.0 - pk);
}

double SaturationSolution::total_throughput() const {
  double s = 0.0;
  for (const auto& c : classes) s += c.throughput;
  return s;
}

std::vector<double> collision_probs(const TrafficClassTable& table, const ZoneStructure& zones,
                                    std::span<const double> tau, std::vector<double>* occupancy) {
  const int w = zones.window;
  std::vector<double> ptr(w);
  for (int n = 0; n < w; ++n) ptr[n] = zone_transmission_prob(zones.eligible[n], tau, table);
  auto b = slot_occupancy(ptr);

  std::vector<double> pc(table.size());
  std::vector<double> slot_pc(w, 0.0);
  for (std::size_t j = 0; j < table.size(); ++j) {
    const int d = table[j].aifs_offset;
    for (int n = d; n < w; ++n) slot_pc[n] = zone_collision_prob(static_cast<int>(j), zones.eligible[n], tau, table);
    pc[j] = std::min(average_collision_prob(d, b, slot_pc), kMaxCollisionProb);
  }
  if (occupancy) *occupancy = std::move(b);
  return pc;
}

SaturationSolution solve_fixed_point(const TrafficClassTable& table, const ExchangeTimes& times,
                                     const SolverConfig& config) {
  const std::size_t J = table.size();
  SaturationSolution sol;
  sol.zones = zone_structure(table);
  const auto& zones = sol.zones;
  const int w = zones.window;

  std::vector<double> tau(J), next(J);
  for (std::size_t j = 0; j < J; ++j) tau[j] = 2.0 / (table.ac_params(j).cw_min + 2.0);

  std::vector<double> pc;
  double residual = std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < config.max_iterations; ++it) {
    pc = collision_probs(table, zones, tau);
    residual = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      next[j] = 1.0 / (mean_backoff_slots(pc[j], table.ac_params(j)) + 1.0);
      residual = std::max(residual, std::abs(next[j] - tau[j]));
    }
    if (residual < config.tolerance) {
      tau = next;
      break;
    }
    for (std::size_t j = 0; j < J; ++j) tau[j] = (1.0 - config.damping) * tau[j] + config.damping * next[j];
  }
  if (!(residual < config.tolerance))
    throw ConvergenceError("saturation fixed point did not converge after " + std::to_string(it) +
                               " iterations (residual " + std::to_string(residual) + ")",
                           it, residual);
  sol.iterations = it + 1;
  pc = collision_probs(table, zones, tau, &sol.occupancy);
  {
    double r = 0.0;
    for (std::size_t j = 0; j < J; ++j)
      r = std::max(r, std::abs(1.0 / (mean_backoff_slots(pc[j], table.ac_params(j)) + 1.0) - tau[j]));
    sol.residual = r;
  }
  const auto& b = sol.occupancy;

  // Per-slot success probability of TC j, p_s{j,n}.
  std::vector<std::vector<double>> ps(J, std::vector<double>(w, 0.0));
  for (int n = 0; n < w; ++n) {
    const auto& elig = zones.eligible[n];
    const double idle = all_idle(elig, tau, table);
    for (int j : elig) ps[j][n] = table[j].flows * tau[j] * idle / sibling_idle(j, elig, tau, table);
  }

  // The normalizer runs over every slot so that the success shares sum to one.
  double success_mass = 0.0;
  for (int n = 0; n < w; ++n)
    for (std::size_t l = 0; l < J; ++l) success_mass += b[n] * ps[l][n];

  sol.classes.resize(J);
  for (std::size_t j = 0; j < J; ++j) {
    double num = 0.0;
    for (int n = 0; n < w; ++n) num += b[n] * ps[j][n];
    sol.classes[j].gamma = num / table[j].flows / success_mass;
  }

  sol.successes.assign(J, std::vector<double>(J, 0.0));
  for (std::size_t j = 0; j < J; ++j)
    for (std::size_t k = 0; k < J; ++k) {
      // f_k E[Q_j] γ_k / (1 - γ_j) with E[Q_j] = (1 - γ_j) / γ_j
      sol.successes[k][j] = (k == j) ? table[j].flows : table[k].flows * sol.classes[k].gamma / sol.classes[j].gamma;
    }

  // f_c: mean number of users in a collision, occupancy-averaged.
  double fc = 0.0;
  for (int n = 0; n < w; ++n) {
    const auto& elig = zones.eligible[n];
    double attempts = 0.0, single = 0.0;
    for (int j : elig) {
      attempts += table[j].flows * tau[j];
      single += ps[j][n];
    }
    const double multi = 1.0 - all_idle(elig, tau, table) - single;
    if (multi > 1e-14) fc += b[n] * (attempts - single) / multi;
  }
  sol.mean_collision_size = fc;

  const double slot = times.slot_us;

  for (std::size_t j = 0; j < J; ++j) {
    auto& c = sol.classes[j];
    const auto& ac = table.ac_params(j);
    c.tau = tau[j];
    c.p_collision = pc[j];
    c.p_drop = std::pow(pc[j], ac.retry_limit);
    c.backoff_slots = mean_backoff_slots(pc[j], ac);
    double suc = 0.0, col = 0.0;
    for (std::size_t k = 0; k < J; ++k) {
      suc += sol.successes[k][j] * times.success_us[k];
      const double ct = pc[k] / (1.0 - pc[k]) * sol.successes[k][j];
      col += ct * times.collision_us[k];
    }
    c.success_us = suc;
    c.collision_us = fc > 0.0 ? col / fc : 0.0;
    const double own_collisions = pc[j] / (1.0 - pc[j]) * table[j].flows;
    c.idle_us = c.backoff_slots * (own_collisions / table[j].flows + 1.0) * slot;
    c.cycle_us = c.success_us + c.collision_us + c.idle_us;
    c.throughput = table[j].flows * times.payload_us[j] / c.cycle_us;
    c.service_us = (1.0 - c.p_drop) * c.cycle_us;
  }
  return sol;
}

std::vector<double> service_times(const TrafficClassTable& table, std::span<const int> flows, const PhyParams& phy,
                                  AccessMode access, const SolverConfig& config) {
  if (flows.size() != table.size()) throw std::invalid_argument("flow vector size does not match the TC table");
  std::vector<double> out(table.size(), std::numeric_limits<double>::quiet_NaN());
  int total = 0;
  for (std::size_t j = 0; j < flows.size(); ++j) {
    if (flows[j] < 0) throw std::invalid_argument("negative flow count");
    if (flows[j] > 0) total += flows[j];
  }
  if (total < 1) throw std::invalid_argument("no active user");

  std::vector<int> kept;
  const auto reduced = table.reduced(flows, &kept);
  const auto times = exchange_times(reduced, phy, access);
  if (total == 1) {
    out[kept.front()] = times.success_us.front();
    return out;
  }
  const auto sol = solve_fixed_point(reduced, times, config);
  for (std::size_t i = 0; i < kept.size(); ++i) out[kept[i]] = sol.classes[i].service_us;
  return out;
}

}  // namespace edca
