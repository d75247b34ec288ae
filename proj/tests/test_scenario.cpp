#include <doctest.h>

#include <algorithm>
#include <random>

#include "edca/error.hpp"
#include "edca/scenario.hpp"

using namespace edca;

namespace {

StationSpec station(const std::string& name, int count, ActivityVector act, double bytes = 1000) {
  StationSpec s;
  s.name = name;
  s.count = count;
  s.activity = act;
  for (int i = 0; i < kNumAcs; ++i)
    if (act[i]) {
      TrafficDescriptor t;
      t.packet_bytes = bytes;
      s.traffic[i] = t;
    }
  return s;
}

bool same_tables(const TrafficClassTable& a, const TrafficClassTable& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const auto &x = a[j], &y = b[j];
    if (x.ac != y.ac || x.sigma != y.sigma || x.tag != y.tag || x.flows != y.flows || x.aifs_offset != y.aifs_offset ||
        x.siblings != y.siblings)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("traffic classes follow the activity vector") {
  const auto acs = default_edca_table();
  std::vector<StationSpec> st{station("a", 4, {0, 0, 0, 1}), station("b", 3, {0, 1, 0, 1}),
                              station("c", 2, {0, 1, 0, 0})};
  const auto t = derive_traffic_classes(st, acs);
  REQUIRE(t.size() == 4);
  // AC1 TCs first, then AC3
  CHECK(t[0].ac == 1);
  CHECK(t[3].ac == 3);
  int total = 0;
  for (const auto& tc : t.classes) total += tc.flows;
  CHECK(total == 4 + 2 * 3 + 2);
  CHECK(t.distinct_activity_count() == 3);

  // the two TCs of station b are siblings of each other
  for (std::size_t j = 0; j < t.size(); ++j) {
    const auto& tc = t[j];
    if (tc.sigma == ActivityVector{0, 1, 0, 1}) CHECK(tc.siblings.size() == 2);
    else CHECK(tc.siblings.size() == 1);
    CHECK(std::count(tc.siblings.begin(), tc.siblings.end(), static_cast<int>(j)) == 1);
  }
  // d_j against the smallest AIFSN (AC3 = 2, AC1 = 3)
  CHECK(t[0].aifs_offset == 1);
  CHECK(t[3].aifs_offset == 0);
}

TEST_CASE("class counts on random scenarios") {
  std::mt19937 rng(11);
  const auto acs = default_edca_table();
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<StationSpec> st;
    const int n = 1 + rng() % 6;
    for (int s = 0; s < n; ++s) {
      ActivityVector a{};
      while (std::none_of(a.begin(), a.end(), [](auto v) { return v; }))
        for (auto& v : a) v = rng() % 2;
      st.push_back(station("s" + std::to_string(s), 1 + rng() % 4, a));
    }
    const auto t = derive_traffic_classes(st, acs);
    std::array<int, kNumAcs> per_ac{};
    for (const auto& tc : t.classes) ++per_ac[tc.ac];
    int sum = 0;
    for (int v : per_ac) sum += v;
    CHECK(sum == static_cast<int>(t.size()));
    CHECK(t.distinct_activity_count() <= t.size());

    auto shuffled = st;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(same_tables(t, derive_traffic_classes(shuffled, acs)));
  }
}

TEST_CASE("identical stations declared once or many times") {
  const auto acs = default_edca_table();
  std::vector<StationSpec> once{station("a", 5, {0, 0, 0, 1})};
  std::vector<StationSpec> many;
  for (int i = 0; i < 5; ++i) many.push_back(station("a" + std::to_string(i), 1, {0, 0, 0, 1}));
  CHECK(same_tables(derive_traffic_classes(once, acs), derive_traffic_classes(many, acs)));
}

TEST_CASE("equal activity with different loads needs a class_tag") {
  const auto acs = default_edca_table();
  auto a = station("a", 2, {0, 0, 0, 1}, 200);
  auto b = station("b", 2, {0, 0, 0, 1}, 1000);
  CHECK_THROWS_AS(derive_traffic_classes(std::vector{a, b}, acs), ConfigError);
  b.class_tag = "big";
  CHECK(derive_traffic_classes(std::vector{a, b}, acs).size() == 2);
}

TEST_CASE("load applies defaults and round-trips") {
  const auto sc = load_scenario_text(R"({
    // comment
    "access": "rts",
    "stations": [
      {"name": "v", "count": 3, "traffic": {"VO": {"kind": "cbr", "codec_rate_bps": 64000, "interval_ms": 20}}},
      {"name": "ap", "ap": true, "traffic": {"VO": {"kind": "cbr", "codec_rate_bps": 64000, "interval_ms": 20, "flows": 3},
                                             "BE": {"kind": "saturated", "packet_bytes": 1500}}}
    ]
  })");
  CHECK(sc.access == AccessMode::rts_cts);
  CHECK(sc.phy.slot_us == 9.0);
  CHECK(sc.acs[3]->cw_min == 7);
  const auto& vo = *sc.stations[0].traffic[3];
  CHECK(vo.packet_bytes == doctest::Approx(160 + 40));
  CHECK(vo.packets_per_second() == doctest::Approx(50));
  CHECK(sc.stations[1].traffic[3]->packets_per_second() == doctest::Approx(150));

  const auto again = load_scenario(to_json(sc));
  CHECK(same_tables(derive_traffic_classes(sc.stations, sc.acs), derive_traffic_classes(again.stations, again.acs)));
  CHECK(to_json(again) == to_json(sc));
}

TEST_CASE("configuration errors name the field") {
  auto fails_at = [](const std::string& text, const std::string& path) {
    try {
      load_scenario_text(text);
    } catch (const ConfigError& e) {
      CHECK(e.path() == path);
      return;
    }
    FAIL("no ConfigError for " << text);
  };
  fails_at(R"({"stations": [{"traffic": {"VO": {"kind": "saturated", "packet_bytes": 100}}}], "bogus": 1})", "bogus");
  fails_at(R"({"acs": [null, {"aifsn": 3, "cw_min": 64, "cw_max": 1023}, null, {"m": 1}], "stations": []})", "acs[1].cw_min");
  fails_at(R"({"acs": [null, {"aifsn": 2, "m": 3}, null, {"aifsn": 3, "m": 1}], "stations": []})", "acs[3].aifsn");
  fails_at(R"({"stations": [{"traffic": {"VO": {"kind": "cbr", "packet_bytes": 100}}}]})",
           "stations[0].traffic.VO");
  fails_at(R"({"stations": [{"traffic": {"XX": {}}}]})", "stations[0].traffic.XX");
  fails_at(R"({"stations": [{"ap": true, "count": 2, "traffic": {"VO": {"kind": "saturated", "packet_bytes": 1}}}]})",
           "stations[0].count");
}

TEST_CASE("templates bind variables and expressions") {
  const auto t = ScenarioTemplate::from_text(R"({
    "stations": [
      {"name": "a", "count": "${10 - K}", "traffic": {"AC3": {"kind": "saturated", "packet_bytes": "${B}"}}},
      {"name": "b", "count": "${K}", "traffic": {"AC1": {"kind": "saturated", "packet_bytes": "${2 * B + 1}"}}}
    ],
    "sweep": {"K": [3, 4], "B": [500]}
  })");
  CHECK(t.variables() == std::vector<std::string>{"B", "K"});
  const auto sc = t.instantiate({{"K", 4}});
  REQUIRE(sc.stations.size() == 2);
  CHECK(sc.stations[0].count == 6);
  CHECK(sc.stations[1].traffic[1]->packet_bytes == 1001);
  // K = 10 leaves station a empty, which drops it
  CHECK(t.instantiate({{"K", 10}}).stations.size() == 1);
  CHECK_THROWS_AS(ScenarioTemplate::from_text(R"({"stations": [{"count": "${K +}"}]})").variables(), ConfigError);
}

TEST_CASE("template patches") {
  auto t = ScenarioTemplate::from_text(R"({"stations": [{"count": "${N}", "traffic": {"VO": {"kind": "saturated", "packet_bytes": 100}}}],
                                           "sweep": {"N": [2]}})");
  t.patch(nlohmann::json::parse(R"({"access": "rts_cts", "solver": {"tolerance": 1e-7}})"));
  const auto sc = t.instantiate({});
  CHECK(sc.access == AccessMode::rts_cts);
  CHECK(sc.solver.tolerance == 1e-7);
  CHECK(sc.stations[0].count == 2);
  CHECK_THROWS_AS(t.patch(nlohmann::json::parse(R"({"sweep": {}})")), ConfigError);
}

TEST_CASE("contention window stages") {
  AcParams a{2, 15, 1023, 3, 7};
  CHECK(a.window(1) == 15);
  CHECK(a.window(2) == 31);
  CHECK(a.window(4) == 127);
  CHECK(a.window(7) == 127);
  AcParams b{2, 7, 15, 5, 7};
  CHECK(b.window(3) == 15);
}
