#include "edca/capacity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "edca/error.hpp"

namespace edca {

double binomial_pmf(int n, int k, double p) {
  if (k < 0 || k > n) return 0.0;
  p = std::clamp(p, 0.0, 1.0);
  if (p == 0.0) return k == 0 ? 1.0 : 0.0;
  if (p == 1.0) return k == n ? 1.0 : 0.0;
  const double log_c = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
  return std::exp(log_c + k * std::log(p) + (n - k) * std::log1p(-p));
}

namespace {

bool is_pinned(const std::vector<bool>& pinned, std::size_t j) { return j < pinned.size() && pinned[j]; }

// One dimension of the activity lattice: values lo..hi with probabilities pmf.
struct Axis {
  int lo = 0;
  std::vector<double> pmf;
  double captured = 1.0;
};

// Distribution of active users of TC k; the conditioning TC contributes the
// tagged user plus a Binomial over the remaining f - 1.
Axis full_axis(int k, int tagged, std::span<const double> rho, const TrafficClassTable& table,
               const std::vector<bool>& pinned) {
  Axis a;
  const int f = table[k].flows;
  if (is_pinned(pinned, k)) {
    a.lo = f;
    a.pmf = {1.0};
    return a;
  }
  const double p = std::clamp(rho[k], 0.0, 1.0);
  const int offset = (k == tagged) ? 1 : 0;
  const int n = f - offset;
  a.lo = offset;
  a.pmf.resize(n + 1);
  for (int i = 0; i <= n; ++i) a.pmf[i] = binomial_pmf(n, i, p);
  return a;
}

// Keep the smallest run around the mode holding at least 1 - eps of the mass.
Axis truncate(Axis a, double eps) {
  if (a.pmf.size() <= 1) return a;
  const auto mode = static_cast<int>(std::max_element(a.pmf.begin(), a.pmf.end()) - a.pmf.begin());
  int lo = mode, hi = mode;
  double mass = a.pmf[mode];
  const int last = static_cast<int>(a.pmf.size()) - 1;
  while (mass < 1.0 - eps && (lo > 0 || hi < last)) {
    const double left = lo > 0 ? a.pmf[lo - 1] : -1.0;
    const double right = hi < last ? a.pmf[hi + 1] : -1.0;
    if (right >= left)
      mass += a.pmf[++hi];
    else
      mass += a.pmf[--lo];
  }
  Axis out;
  out.lo = a.lo + lo;
  out.pmf.assign(a.pmf.begin() + lo, a.pmf.begin() + hi + 1);
  out.captured = std::min(mass, 1.0);
  return out;
}

std::string cache_key(const TrafficClassTable& t, std::span<const int> flows, const PhyParams& phy, AccessMode access,
                      const SolverConfig& cfg) {
  std::ostringstream k;
  k.precision(17);
  k << phy.slot_us << ',' << phy.sifs_us << ',' << phy.data_rate_mbps << ',' << phy.basic_rate_mbps << ','
    << phy.ofdm_symbol_us << ',' << phy.preamble_us << ',' << phy.signal_extension_us << ',' << phy.mac_header_bytes
    << ',' << phy.ack_bytes << ',' << phy.rts_bytes << ',' << phy.cts_bytes << ',' << phy.propagation_us << '|'
    << static_cast<int>(access) << '|' << cfg.tolerance << ',' << cfg.max_iterations << ',' << cfg.damping << '|';
  for (const auto& ac : t.acs) {
    if (ac)
      k << ac->aifsn << ',' << ac->cw_min << ',' << ac->cw_max << ',' << ac->max_doubling << ',' << ac->retry_limit;
    k << ';';
  }
  k << '|';
  for (std::size_t j = 0; j < t.size(); ++j) {
    if (flows[j] < 1) continue;
    const auto& tc = t[j];
    k << tc.ac << ':';
    for (auto s : tc.sigma) k << static_cast<int>(s);
    k << ':' << tc.tag << ':' << tc.traffic.packet_bytes << ':' << flows[j] << ';';
  }
  return k.str();
}

}  // namespace

double activity_weight(int j, std::span<const int> flows, std::span<const double> rho, const TrafficClassTable& table,
                       const std::vector<bool>& pinned) {
  if (flows.size() != table.size() || rho.size() != table.size())
    throw std::invalid_argument("flow and utilization vectors must match the TC table");
  if (flows[j] < 1 || flows[j] > table[j].flows)
    throw std::out_of_range("active count of the conditioning TC must lie in [1, f_j]");
  double w = 1.0;
  for (std::size_t k = 0; k < table.size(); ++k) {
    const int f = table[k].flows;
    if (flows[k] < 0 || flows[k] > f) throw std::out_of_range("active count outside [0, f]");
    if (is_pinned(pinned, k)) {
      if (flows[k] != f) return 0.0;
      continue;
    }
    const double p = std::clamp(rho[k], 0.0, 1.0);
    if (static_cast<int>(k) == j)
      w *= binomial_pmf(f - 1, flows[k] - 1, p);
    else
      w *= binomial_pmf(f, flows[k], p);
  }
  return w;
}

std::vector<double> activity_pdf(int j, std::span<const double> rho, const TrafficClassTable& table,
                                 const std::vector<bool>& pinned) {
  std::vector<double> pdf{1.0};
  for (std::size_t k = 0; k < table.size(); ++k) {
    const auto axis = full_axis(static_cast<int>(k), j, rho, table, pinned);
    std::vector<double> next(pdf.size() + axis.lo + axis.pmf.size(), 0.0);
    for (std::size_t a = 0; a < pdf.size(); ++a)
      for (std::size_t b = 0; b < axis.pmf.size(); ++b) next[a + axis.lo + b] += pdf[a] * axis.pmf[b];
    pdf = std::move(next);
  }
  while (pdf.size() > 1 && pdf.back() == 0.0) pdf.pop_back();
  return pdf;
}

std::vector<double> ServiceTimeCache::service_times(const TrafficClassTable& table, std::span<const int> flows,
                                                    const PhyParams& phy, AccessMode access,
                                                    const SolverConfig& config) {
  if (!enabled_) return edca::service_times(table, flows, phy, access, config);
  const auto key = cache_key(table, flows, phy, access, config);
  {
    std::lock_guard lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) {
      ++hits_;
      // Stored compactly in reduced order; expand to the caller's indexing.
      std::vector<double> out(table.size(), std::numeric_limits<double>::quiet_NaN());
      std::size_t i = 0;
      for (std::size_t j = 0; j < table.size(); ++j)
        if (flows[j] >= 1) out[j] = it->second[i++];
      return out;
    }
  }
  auto result = edca::service_times(table, flows, phy, access, config);
  std::vector<double> compact;
  for (std::size_t j = 0; j < table.size(); ++j)
    if (flows[j] >= 1) compact.push_back(result[j]);
  std::lock_guard lock(mutex_);
  ++misses_;
  entries_[key] = std::move(compact);
  return result;
}

std::size_t ServiceTimeCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

ServiceRate mean_service_rate(int j, std::span<const double> rho, const CapacityModel& model) {
  const auto& table = model.table;
  const std::size_t J = table.size();
  if (rho.size() != J) throw std::invalid_argument("utilization vector does not match the TC table");
  if (table[j].traffic.saturated()) throw std::invalid_argument("service rate of a saturated TC is not defined");

  std::vector<bool> pinned(J);
  for (std::size_t k = 0; k < J; ++k) pinned[k] = table[k].traffic.saturated();

  std::vector<Axis> axes;
  int spread = 0;
  for (std::size_t k = 0; k < J; ++k) {
    axes.push_back(full_axis(static_cast<int>(k), j, rho, table, pinned));
    if (axes.back().pmf.size() > 1) ++spread;
  }
  const double per_axis_eps = model.weight_epsilon / std::max(spread, 1);
  double captured = 1.0;
  for (auto& a : axes) {
    a = truncate(std::move(a), per_axis_eps);
    captured *= a.captured;
  }

  ServiceRate out;
  out.discarded_mass = 1.0 - captured;
  std::vector<int> idx(J, 0), flows(J);
  double mean_us = 0.0;
  for (;;) {
    double w = 1.0;
    for (std::size_t k = 0; k < J; ++k) {
      flows[k] = axes[k].lo + idx[k];
      w *= axes[k].pmf[idx[k]];
    }
    if (w > 0.0) {
      const auto t = model.cache ? model.cache->service_times(table, flows, model.phy, model.access, model.solver)
                                 : service_times(table, flows, model.phy, model.access, model.solver);
      mean_us += w * t[j];
      ++out.lattice_points;
    }
    std::size_t k = 0;
    while (k < J && ++idx[k] == static_cast<int>(axes[k].pmf.size())) idx[k++] = 0;
    if (k == J) break;
  }
  out.mean_service_us = mean_us / captured;
  out.rate = 1e6 / out.mean_service_us;
  return out;
}

double CapacitySolution::max_realtime_rho() const {
  const int b = binding_class();
  return b < 0 ? 0.0 : classes[b].rho;
}

int CapacitySolution::binding_class() const {
  int best = -1;
  for (std::size_t j = 0; j < classes.size(); ++j)
    if (!classes[j].saturated && (best < 0 || classes[j].rho > classes[best].rho)) best = static_cast<int>(j);
  return best;
}

CapacitySolution solve_utilization(const CapacityModel& model, double initial_rho) {
  const auto& table = model.table;
  const std::size_t J = table.size();
  if (J == 0) throw ConfigError("stations", "no traffic classes");
  CapacitySolution sol;
  sol.classes.resize(J);
  std::vector<double> rho(J), next(J);
  for (std::size_t j = 0; j < J; ++j) {
    auto& c = sol.classes[j];
    c.saturated = table[j].traffic.saturated();
    c.lambda = table[j].traffic.packets_per_second();
    if (!c.saturated && !(c.lambda > 0.0))
      throw ConfigError("stations", "TC " + std::to_string(j) + " has no offered load");
    rho[j] = c.saturated ? 1.0 : initial_rho;
  }

  const auto& cfg = model.utilization;
  double residual = std::numeric_limits<double>::infinity();
  std::vector<double> mu(J, 0.0);
  int it = 0;
  for (; it < cfg.max_iterations; ++it) {
    residual = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      if (sol.classes[j].saturated) {
        next[j] = 1.0;
        continue;
      }
      const auto r = mean_service_rate(static_cast<int>(j), rho, model);
      sol.discarded_mass = std::max(sol.discarded_mass, r.discarded_mass);
      mu[j] = r.rate;
      next[j] = sol.classes[j].lambda / r.rate;
      residual = std::max(residual, std::abs(next[j] - rho[j]));
    }
    if (residual < cfg.tolerance) {
      rho = next;
      break;
    }
    for (std::size_t j = 0; j < J; ++j) rho[j] = (1.0 - cfg.damping) * rho[j] + cfg.damping * next[j];
  }
  if (!(residual < cfg.tolerance))
    throw ConvergenceError("utilization fixed point did not converge after " + std::to_string(it) +
                               " iterations (residual " + std::to_string(residual) + ")",
                           it, residual);
  sol.iterations = it + 1;
  sol.residual = residual;
  for (std::size_t j = 0; j < J; ++j) {
    auto& c = sol.classes[j];
    if (c.saturated) {
      c.rho = 1.0;
      continue;
    }
    c.mu = mu[j];
    c.rho = c.lambda / c.mu;
  }
  return sol;
}

int max_admissible_flows(const std::function<Scenario(int)>& scenario_for, int lo, int cap, ServiceTimeCache* cache) {
  for (int n = lo; n <= cap; ++n) {
    const Scenario sc = scenario_for(n);
    const auto table = derive_traffic_classes(sc.stations, sc.acs);
    CapacityModel model{table, sc.phy, sc.access, sc.solver, sc.utilization, sc.admission.weight_truncation_epsilon,
                        cache};
    try {
      if (solve_utilization(model).max_realtime_rho() > sc.admission.rho_threshold) return n - 1;
    } catch (const ConvergenceError&) {
      return n - 1;
    }
  }
  return cap;
}

int largest_passing(const std::function<bool(int)>& passes, int lo, int cap) {
  if (lo > cap || !passes(lo)) return lo - 1;
  int good = lo, step = 1;
  int bad = cap + 1;
  // gallop upward until the first failure
  while (true) {
    const int probe = std::min(good + step, cap);
    if (probe == good) break;
    if (passes(probe)) {
      good = probe;
      step *= 2;
    } else {
      bad = probe;
      break;
    }
  }
  while (bad - good > 1) {
    const int mid = good + (bad - good) / 2;
    if (passes(mid))
      good = mid;
    else
      bad = mid;
  }
  return good;
}

}  // namespace edca
