#include <doctest.h>

#include <cmath>
#include <numeric>

#include "backoff_chain.hpp"
#include "edca/saturation.hpp"

using namespace edca;
using oracle::chain_fixed_point;

namespace {

Scenario saturated(std::vector<std::pair<ActivityVector, int>> groups, int bytes = 1000) {
  Scenario sc;
  sc.acs = default_edca_table();
  int i = 0;
  for (auto [act, count] : groups) {
    StationSpec s;
    s.name = "s" + std::to_string(i++);
    s.count = count;
    s.activity = act;
    for (int a = 0; a < kNumAcs; ++a)
      if (act[a]) {
        TrafficDescriptor t;
        t.packet_bytes = bytes;
        s.traffic[a] = t;
      }
    sc.stations.push_back(s);
  }
  return sc;
}

SaturationSolution solve(const Scenario& sc, TrafficClassTable* out = nullptr) {
  auto table = derive_traffic_classes(sc.stations, sc.acs);
  auto sol = solve_fixed_point(table, exchange_times(table, sc.phy, sc.access), sc.solver);
  if (out) *out = table;
  return sol;
}

}  // namespace

TEST_CASE("symmetric case against the backoff chain") {
  for (int n : {2, 5, 10, 20}) {
    auto sc = saturated({{{0, 1, 0, 0}, n}});
    sc.acs[1] = AcParams{2, 15, 1023, 3, 7};
    const auto sol = solve(sc);
    const auto [tau, p] = chain_fixed_point(*sc.acs[1], n);
    CAPTURE(n);
    CHECK(sol.classes[0].tau == doctest::Approx(tau).epsilon(0.01));
    CHECK(sol.classes[0].p_collision == doctest::Approx(p).epsilon(0.01));
  }
}

TEST_CASE("solution identities") {
  TrafficClassTable table;
  const auto sc = saturated({{{0, 0, 0, 1}, 6}, {{0, 1, 0, 1}, 3}, {{0, 1, 0, 0}, 5}, {{1, 0, 1, 0}, 2}});
  const auto sol = solve(sc, &table);

  CHECK(std::accumulate(sol.occupancy.begin(), sol.occupancy.end(), 0.0) == doctest::Approx(1.0));
  double share = 0.0;
  for (std::size_t j = 0; j < table.size(); ++j) share += table[j].flows * sol.classes[j].gamma;
  CHECK(share == doctest::Approx(1.0));
  CHECK(sol.residual < sc.solver.tolerance);
  for (std::size_t j = 0; j < table.size(); ++j) {
    const auto& c = sol.classes[j];
    CHECK(sol.successes[j][j] == doctest::Approx(table[j].flows));
    CHECK(c.cycle_us == doctest::Approx(c.success_us + c.collision_us + c.idle_us));
    CHECK(c.service_us == doctest::Approx((1.0 - c.p_drop) * c.cycle_us));
    // the fixed point itself
    CHECK(c.tau == doctest::Approx(1.0 / (mean_backoff_slots(c.p_collision, table.ac_params(j)) + 1.0)).epsilon(1e-6));
  }
}

TEST_CASE("lone user never collides") {
  const auto sol = solve(saturated({{{0, 0, 0, 1}, 1}}));
  CHECK(sol.classes[0].p_collision == 0.0);
  CHECK(sol.classes[0].p_drop == 0.0);
}

TEST_CASE("slot occupancy") {
  const std::vector<double> p{0.5, 1.0};
  const auto b = slot_occupancy(p);
  CHECK(b[0] == doctest::Approx(2.0 / 3.0));
  CHECK(b[1] == doctest::Approx(1.0 / 3.0));
  const std::vector<double> none{0.0, 0.0, 0.0, 0.0};
  for (double v : slot_occupancy(none)) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("zones open with the AIFS offset") {
  TrafficClassTable table;
  auto sc = saturated({{{0, 0, 0, 1}, 2}, {{0, 1, 0, 0}, 2}, {{1, 0, 0, 0}, 2}});
  table = derive_traffic_classes(sc.stations, sc.acs);
  const auto z = zone_structure(table);
  CHECK(z.window == 15);  // smallest CWmax, AC3
  CHECK(z.eligible[0].size() == 1);      // only AC3 in the first slot
  CHECK(z.eligible[1].size() == 2);      // AC1 joins at d = 1
  CHECK(z.eligible[5].size() == 3);      // AC0 joins at d = 5
  CHECK(z.zone_ac[0] == 3);
  CHECK(z.zone_ac[1] == 1);
  CHECK(z.zone_ac[5] == 0);
}

TEST_CASE("shifting every AIFSN leaves the probabilities alone") {
  auto sc = saturated({{{0, 0, 0, 1}, 5}, {{0, 1, 0, 1}, 2}, {{0, 1, 0, 0}, 5}});
  const auto base = solve(sc);
  for (auto& a : sc.acs)
    if (a) a->aifsn += 1;
  const auto shifted = solve(sc);
  for (std::size_t j = 0; j < base.classes.size(); ++j) {
    CHECK(shifted.classes[j].tau == doctest::Approx(base.classes[j].tau).epsilon(1e-9));
    CHECK(shifted.classes[j].p_collision == doctest::Approx(base.classes[j].p_collision).epsilon(1e-9));
    CHECK(shifted.classes[j].gamma == doctest::Approx(base.classes[j].gamma).epsilon(1e-9));
  }
  REQUIRE(shifted.occupancy.size() == base.occupancy.size());
  for (std::size_t n = 0; n < base.occupancy.size(); ++n)
    CHECK(shifted.occupancy[n] == doctest::Approx(base.occupancy[n]).epsilon(1e-9));
}

TEST_CASE("priority ordering") {
  const auto sol = solve(saturated({{{0, 0, 0, 1}, 10}, {{0, 1, 0, 0}, 10}}));
  // table order: AC1 first
  CHECK(sol.classes[1].throughput > sol.classes[0].throughput);
  CHECK(sol.classes[1].p_collision < sol.classes[0].p_collision);
}

TEST_CASE("internal collisions favour the higher AC") {
  // Same population, once with AC1 and AC3 on the same stations and once apart.
  const auto apart = solve(saturated({{{0, 0, 0, 1}, 10}, {{0, 1, 0, 0}, 10}}));
  const auto together = solve(saturated({{{0, 1, 0, 1}, 10}}));
  const double ratio_apart = apart.classes[1].throughput / apart.classes[0].throughput;
  const double ratio_together = together.classes[1].throughput / together.classes[0].throughput;
  CHECK(ratio_together >= ratio_apart);
}

TEST_CASE("service time grows with contention") {
  auto sc = saturated({{{0, 0, 0, 1}, 1}, {{0, 1, 0, 0}, 1}});
  auto table = derive_traffic_classes(sc.stations, sc.acs);
  std::vector<double> prev;
  for (int n = 1; n <= 30; ++n) {
    const std::vector<int> flows{n, n};
    auto big = sc;
    big.stations[0].count = n;
    big.stations[1].count = n;
    auto t = derive_traffic_classes(big.stations, big.acs);
    const auto s = service_times(t, flows, sc.phy, sc.access, sc.solver);
    if (!prev.empty()) {
      CHECK(s[0] >= prev[0]);
      CHECK(s[1] >= prev[1]);
    }
    prev = s;
  }
  const std::vector<int> lone{0, 1};
  const auto s = service_times(table, lone, sc.phy, sc.access, sc.solver);
  CHECK(std::isnan(s[0]));
  CHECK(s[1] == doctest::Approx(exchange_times(table, sc.phy, sc.access).success_us[1]));
}
