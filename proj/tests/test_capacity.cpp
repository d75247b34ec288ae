#include <doctest.h>

#include <cmath>

#include "edca/capacity.hpp"
#include "edca/error.hpp"

using namespace edca;

namespace {

TrafficDescriptor voice(double interval_ms = 20, int flows = 1) {
  TrafficDescriptor t;
  t.kind = TrafficKind::cbr;
  t.header_bytes = 40;
  t.packet_bytes = 64000 * interval_ms * 1e-3 / 8 + 40;
  t.interval_ms = interval_ms;
  t.rate_bps = 8 * t.packet_bytes / (interval_ms * 1e-3);
  t.flows = flows;
  return t;
}

Scenario calls(int n, double interval_ms = 20) {
  Scenario sc;
  sc.acs = default_edca_table();
  StationSpec s;
  s.name = "sta";
  s.count = n;
  s.activity = {0, 0, 0, 1};
  s.traffic[3] = voice(interval_ms);
  StationSpec ap;
  ap.name = "ap";
  ap.ap = true;
  ap.activity = {0, 0, 0, 1};
  ap.traffic[3] = voice(interval_ms, n);
  sc.stations = {s, ap};
  return sc;
}

double choose(int n, int k) { return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)); }

// 1/μ_j over the complete lattice, weights written out directly.
double brute_service_us(int j, const std::vector<double>& rho, const TrafficClassTable& t, const Scenario& sc) {
  const std::size_t J = t.size();
  std::vector<int> f(J, 0);
  double total = 0.0;
  for (;;) {
    bool valid = f[j] >= 1;
    double w = 1.0;
    for (std::size_t k = 0; k < J && valid; ++k) {
      const int n = t[k].flows;
      const double p = std::min(rho[k], 1.0);
      if (static_cast<int>(k) == j)
        w *= choose(n - 1, f[k] - 1) * std::pow(p, f[k] - 1) * std::pow(1 - p, n - f[k]);
      else
        w *= choose(n, f[k]) * std::pow(p, f[k]) * std::pow(1 - p, n - f[k]);
    }
    if (valid && w > 0) total += w * service_times(t, f, sc.phy, sc.access, sc.solver)[j];
    std::size_t k = 0;
    while (k < J && ++f[k] > t[k].flows) f[k++] = 0;
    if (k == J) break;
  }
  return total;
}

}  // namespace

TEST_CASE("binomial weights") {
  double s = 0;
  for (int k = 0; k <= 40; ++k) s += binomial_pmf(40, k, 0.3);
  CHECK(s == doctest::Approx(1.0));
  CHECK(binomial_pmf(5, 0, 0.0) == 1.0);
  CHECK(binomial_pmf(5, 5, 1.0) == 1.0);
  CHECK(binomial_pmf(5, 6, 0.5) == 0.0);
}

TEST_CASE("activity weights form a distribution") {
  const auto sc = calls(6);
  const auto t = derive_traffic_classes(sc.stations, sc.acs);
  const std::vector<double> rho{0.2, 0.7};
  for (int j = 0; j < 2; ++j) {
    double sum = 0;
    for (int a = 0; a <= t[0].flows; ++a)
      for (int b = 0; b <= t[1].flows; ++b) {
        std::vector<int> f{a, b};
        if (f[j] >= 1) sum += activity_weight(j, f, rho, t);
      }
    CHECK(sum == doctest::Approx(1.0));
    const auto pdf = activity_pdf(j, rho, t);
    double total = 0;
    for (double v : pdf) total += v;
    CHECK(total == doctest::Approx(1.0));
    CHECK(pdf[0] == 0.0);
  }
  // tagged station alone: the other 5 stations and the AP idle
  CHECK(activity_pdf(0, rho, t)[1] == doctest::Approx(std::pow(0.8, 5) * 0.3));
}

TEST_CASE("service rate matches the full lattice") {
  auto sc = calls(8);
  const auto t = derive_traffic_classes(sc.stations, sc.acs);
  const std::vector<double> rho{0.15, 0.8};
  for (double eps : {0.0, 1e-6}) {
    CapacityModel m{t, sc.phy, sc.access, sc.solver, sc.utilization, eps, nullptr};
    for (int j = 0; j < 2; ++j) {
      const auto r = mean_service_rate(j, rho, m);
      CHECK(r.mean_service_us == doctest::Approx(brute_service_us(j, rho, t, sc)).epsilon(eps > 0 ? 1e-4 : 1e-10));
      if (eps == 0.0) CHECK(r.discarded_mass == doctest::Approx(0.0));
    }
  }
}

TEST_CASE("memo does not change results") {
  const auto sc = calls(15);
  const auto t = derive_traffic_classes(sc.stations, sc.acs);
  ServiceTimeCache cache;
  CapacityModel with{t, sc.phy, sc.access, sc.solver, sc.utilization, 1e-6, &cache};
  CapacityModel without{t, sc.phy, sc.access, sc.solver, sc.utilization, 1e-6, nullptr};
  const auto a = solve_utilization(with);
  const auto b = solve_utilization(without);
  for (std::size_t j = 0; j < t.size(); ++j) CHECK(a.classes[j].rho == b.classes[j].rho);
  CHECK(cache.hits() > 0);
  CHECK(cache.size() == cache.misses());
}

TEST_CASE("start point does not matter") {
  const auto sc = calls(15);
  const auto t = derive_traffic_classes(sc.stations, sc.acs);
  ServiceTimeCache cache;
  CapacityModel m{t, sc.phy, sc.access, sc.solver, sc.utilization, 1e-6, &cache};
  const auto cold = solve_utilization(m, 0.0);
  const auto hot = solve_utilization(m, 0.9);
  for (std::size_t j = 0; j < t.size(); ++j)
    CHECK(cold.classes[j].rho == doctest::Approx(hot.classes[j].rho).epsilon(1e-4));
  CHECK(cold.residual < sc.utilization.tolerance);
  for (const auto& c : cold.classes) CHECK(c.rho == doctest::Approx(c.lambda / c.mu));
}

TEST_CASE("utilization grows with load") {
  ServiceTimeCache cache;
  std::vector<double> prev;
  for (int n = 4; n <= 20; n += 4) {
    const auto sc = calls(n);
    const auto t = derive_traffic_classes(sc.stations, sc.acs);
    CapacityModel m{t, sc.phy, sc.access, sc.solver, sc.utilization, 1e-6, &cache};
    const auto s = solve_utilization(m);
    if (!prev.empty()) {
      CHECK(s.classes[0].rho > prev[0]);
      CHECK(s.classes[1].rho > prev[1]);
    }
    prev = {s.classes[0].rho, s.classes[1].rho};
  }
  // a heavier AP stream at the same counts
  auto sc = calls(12);
  auto t = derive_traffic_classes(sc.stations, sc.acs);
  CapacityModel m{t, sc.phy, sc.access, sc.solver, sc.utilization, 1e-6, &cache};
  const auto base = solve_utilization(m);
  sc.stations[1].traffic[3]->rate_bps *= 1.2;
  sc.stations[1].traffic[3]->interval_ms /= 1.2;
  auto t2 = derive_traffic_classes(sc.stations, sc.acs);
  CapacityModel m2{t2, sc.phy, sc.access, sc.solver, sc.utilization, 1e-6, &cache};
  const auto heavier = solve_utilization(m2);
  CHECK(heavier.classes[0].rho > base.classes[0].rho);
  CHECK(heavier.classes[1].rho > base.classes[1].rho);
}

TEST_CASE("splitting a class by tag changes nothing") {
  auto sc = calls(10);
  const auto t = derive_traffic_classes(sc.stations, sc.acs);
  CapacityModel m{t, sc.phy, sc.access, sc.solver, sc.utilization, 0.0, nullptr};
  const auto merged = solve_utilization(m);

  auto split = sc;
  split.stations[0].count = 4;
  auto other = sc.stations[0];
  other.name = "sta2";
  other.count = 6;
  other.class_tag = "b";
  split.stations.push_back(other);
  const auto t2 = derive_traffic_classes(split.stations, split.acs);
  REQUIRE(t2.size() == 3);
  CapacityModel m2{t2, split.phy, split.access, split.solver, split.utilization, 0.0, nullptr};
  const auto parts = solve_utilization(m2);
  for (std::size_t j = 0; j < t2.size(); ++j) {
    const double expect = t2[j].tag == "ap" ? merged.classes[1].rho : merged.classes[0].rho;
    CHECK(parts.classes[j].rho == doctest::Approx(expect).epsilon(1e-5));
  }
}

TEST_CASE("saturated classes stay pinned") {
  auto sc = calls(5);
  StationSpec data;
  data.name = "data";
  data.count = 3;
  data.activity = {0, 1, 0, 0};
  TrafficDescriptor bulk;
  bulk.packet_bytes = 1000;
  data.traffic[1] = bulk;
  sc.stations.push_back(data);
  const auto t = derive_traffic_classes(sc.stations, sc.acs);
  CapacityModel m{t, sc.phy, sc.access, sc.solver, sc.utilization, 1e-6, nullptr};
  const auto s = solve_utilization(m);
  int saturated = 0;
  for (std::size_t j = 0; j < t.size(); ++j)
    if (s.classes[j].saturated) {
      ++saturated;
      CHECK(s.classes[j].rho == 1.0);
    }
  CHECK(saturated == 1);
  CHECK(t[s.binding_class()].ac == 3);
  CHECK_THROWS_AS(mean_service_rate(0, std::vector<double>(t.size(), 0.5), m), std::invalid_argument);

  // background load only lowers the voice capacity
  ServiceTimeCache cache;
  const int quiet = max_admissible_flows([](int n) { return calls(n); }, 1, 200, &cache);
  const int busy = max_admissible_flows(
      [&](int n) {
        auto s2 = calls(n);
        s2.stations.push_back(data);
        return s2;
      },
      1, 200, &cache);
  CHECK(busy < quiet);
}

TEST_CASE("analytic capacity is the last count under the threshold") {
  ServiceTimeCache cache;
  auto rho_at = [&](int n) {
    const auto sc = calls(n);
    const auto t = derive_traffic_classes(sc.stations, sc.acs);
    CapacityModel m{t, sc.phy, sc.access, sc.solver, sc.utilization, 1e-6, &cache};
    return solve_utilization(m).max_realtime_rho();
  };
  const int cap = max_admissible_flows([](int n) { return calls(n); }, 1, 200, &cache);
  CHECK(rho_at(cap) <= 1.0);
  CHECK(rho_at(cap + 1) > 1.0);
  const int tight = max_admissible_flows(
      [](int n) {
        auto sc = calls(n);
        sc.admission.rho_threshold = 0.5;
        return sc;
      },
      1, 200, &cache);
  CHECK(tight < cap);
  CHECK(rho_at(tight) <= 0.5);
}

TEST_CASE("largest_passing") {
  for (int edge : {0, 1, 2, 7, 64, 99, 100}) {
    int calls_made = 0;
    auto pass = [&](int n) {
      ++calls_made;
      return n <= edge;
    };
    CHECK(largest_passing(pass, 1, 100) == edge);
  }
}
