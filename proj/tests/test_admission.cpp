#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "edca/admission.hpp"
#include "edca/error.hpp"

using namespace edca;

namespace {

Scenario empty_base(double threshold = 1.0) {
  Scenario sc;
  sc.acs = default_edca_table();
  sc.admission.rho_threshold = threshold;
  return sc;
}

Tspec call(const std::string& id, Direction dir, const std::string& station = "", int up = 6) {
  Tspec t;
  t.tsid = id;
  t.up = up;
  t.direction = dir;
  t.station = station;
  t.mean_rate_bps = 96000;
  t.mean_packet_bytes = 120;
  return t;
}

// Adds call pairs until the first rejection; returns admitted pairs.
int fill(AdmissionController& ac, int limit = 100) {
  for (int i = 0; i < limit; ++i) {
    const auto id = std::to_string(i);
    if (ac.addts(call("up" + id, Direction::uplink, "sta" + id)).verdict != Verdict::admit) return i;
    if (ac.addts(call("dn" + id, Direction::downlink)).verdict != Verdict::admit) {
      ac.delts("up" + id);
      return i;
    }
  }
  return limit;
}

}  // namespace

TEST_CASE("user priority mapping") {
  CHECK(ac_for_user_priority(1) == 0);
  CHECK(ac_for_user_priority(0) == 1);
  CHECK(ac_for_user_priority(5) == 2);
  CHECK(ac_for_user_priority(7) == 3);
  CHECK(ac_for_user_priority(8) == -1);
  CHECK(ac_for_user_priority(-1) == -1);
}

TEST_CASE("malformed requests are refused without touching the table") {
  AdmissionController ac(empty_base());
  CHECK(ac.addts(call("a", Direction::uplink, "s1")).verdict == Verdict::admit);

  auto d = ac.addts(call("a", Direction::uplink, "s2"));
  CHECK(d.verdict == Verdict::reject);
  CHECK(d.verdict_text() == "reject(duplicate TSID)");
  CHECK(std::isnan(d.max_rho));

  CHECK(ac.addts(call("b", Direction::uplink, "s1", 9)).verdict_text() == "reject(unmapped UP)");
  auto bad = call("c", Direction::uplink, "s1");
  bad.mean_rate_bps = 0;
  CHECK(ac.addts(bad).verdict == Verdict::reject);
  CHECK(ac.addts(call("d", Direction::uplink, "")).verdict == Verdict::reject);

  auto base = empty_base();
  base.acs[1].reset();
  AdmissionController no_be(base);
  CHECK(no_be.addts(call("e", Direction::uplink, "s1", 0)).verdict_text() == "reject(unmapped UP)");

  CHECK(ac.admitted().size() == 1);
  auto gone = ac.delts("zzz");
  CHECK(gone.verdict == Verdict::error);
  CHECK(gone.verdict_text() == "error(unknown TSID)");
  CHECK(ac.delts("a").verdict == Verdict::removed);
  CHECK(ac.admitted().empty());
}

TEST_CASE("threshold outside (0, 1] is a configuration error") {
  CHECK_THROWS_AS(AdmissionController(empty_base(0.0)), ConfigError);
  CHECK_THROWS_AS(AdmissionController(empty_base(1.5)), ConfigError);
}

TEST_CASE("capacity fills up and frees on DELTS") {
  AdmissionController ac(empty_base());
  const int n = fill(ac);
  CHECK(n > 5);
  CHECK(n < 100);
  const auto last = ac.last_solution();
  REQUIRE(last);
  CHECK(last->max_realtime_rho() <= 1.0);

  const auto id = std::to_string(n);
  auto r = ac.addts(call("up" + id, Direction::uplink, "sta" + id));
  if (r.verdict == Verdict::admit) r = ac.addts(call("dn" + id, Direction::downlink));
  CHECK(r.verdict == Verdict::reject);
  CHECK(r.max_rho > 1.0);
  CHECK_FALSE(r.binding_tc.empty());
  CHECK(r.verdict_text().rfind("reject(rho ", 0) == 0);
  ac.delts("up" + id);

  ac.delts("up0");
  ac.delts("dn0");
  CHECK(ac.addts(call("up" + id, Direction::uplink, "sta" + id)).verdict == Verdict::admit);
  CHECK(ac.addts(call("dn" + id, Direction::downlink)).verdict == Verdict::admit);
}

TEST_CASE("a lower threshold admits fewer calls") {
  AdmissionController loose(empty_base(1.0));
  AdmissionController tight(empty_base(0.6));
  const int a = fill(loose);
  const int b = fill(tight);
  CHECK(b < a);
  CHECK(tight.last_solution()->max_realtime_rho() <= 0.6);
}

TEST_CASE("a rejected flow stays rejected under more load") {
  AdmissionController small(empty_base());
  const int n = fill(small);
  AdmissionController big(empty_base());
  fill(big);
  // A flow rejected on top of n calls is also rejected on top of a superset.
  auto extra = call("x", Direction::downlink);
  extra.mean_rate_bps = 960000;
  extra.mean_packet_bytes = 1200;
  const auto d1 = small.addts(extra);
  CHECK(d1.verdict == Verdict::reject);
  big.addts(call("up" + std::to_string(n), Direction::uplink, "sta" + std::to_string(n)));
  CHECK(big.admitted().size() >= small.admitted().size());
  CHECK(big.addts(extra).verdict == Verdict::reject);
}

TEST_CASE("candidate aggregates flows") {
  AdmissionController ac(empty_base());
  const auto sc = ac.candidate({call("a", Direction::uplink, "s1"), call("b", Direction::uplink, "s2"),
                                call("c", Direction::uplink, "s3", 4), call("d", Direction::downlink),
                                call("e", Direction::downlink)});
  const auto table = derive_traffic_classes(sc.stations, sc.acs);
  int uplink_voice = 0, ap_flows = 0;
  for (const auto& tc : table.classes) {
    if (tc.tag == "ap") ap_flows += tc.flows;
    else if (tc.ac == 3) uplink_voice += tc.flows;
  }
  CHECK(uplink_voice == 2);
  CHECK(ap_flows == 1);
  const auto ap = std::find_if(sc.stations.begin(), sc.stations.end(), [](const StationSpec& s) { return s.ap; });
  REQUIRE(ap != sc.stations.end());
  CHECK(ap->traffic[3]->rate_bps == doctest::Approx(192000));
  CHECK(ap->traffic[3]->packets_per_second() == doctest::Approx(200));
}

TEST_CASE("event parsing") {
  std::istringstream ok(R"(# calls
0.0 ADDTS a 6 uplink s1 96000 120

DELTS a
1.5 addts b 6 downlink - 96000 120
)");
  const auto ev = parse_events(ok);
  REQUIRE(ev.size() == 3);
  CHECK(ev[0].time == 0.0);
  CHECK(ev[0].tspec.station == "s1");
  CHECK_FALSE(ev[1].add);
  CHECK(ev[1].line == 4);
  CHECK(ev[2].tspec.direction == Direction::downlink);

  for (const char* bad : {"ADDTS a 6 uplink s1 96000\n", "x ADDTS a 6 uplink s1 96000 120\n",
                          "ADDTS a 6 sideways s1 96000 120\n", "DELTS\n", "FOO a\n", "ADDTS a six uplink s 1 1\n"}) {
    std::istringstream in(std::string("# header\n") + bad);
    try {
      parse_events(in);
      FAIL("accepted: " << bad);
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
}

TEST_CASE("replay and decision log") {
  AdmissionController ac(empty_base());
  std::istringstream in("ADDTS a 6 uplink s1 96000 120\nADDTS a 6 uplink s1 96000 120\nDELTS a\nDELTS a\n");
  const auto log = replay(ac, parse_events(in));
  REQUIRE(log.size() == 4);
  CHECK(log[0].verdict == Verdict::admit);
  CHECK(log[1].verdict == Verdict::reject);
  CHECK(log[2].verdict == Verdict::removed);
  CHECK(log[3].verdict == Verdict::error);
  std::ostringstream out;
  write_decision_log(out, log);
  const auto text = out.str();
  CHECK(text.rfind("tsid,decision,max_rho,binding_tc\n", 0) == 0);
  CHECK(text.find("a,admit,") != std::string::npos);
  CHECK(text.find("a,reject(duplicate TSID),") != std::string::npos);
}

TEST_CASE("snapshot round-trip") {
  AdmissionController ac(empty_base());
  fill(ac, 4);
  const auto snap = ac.snapshot();
  AdmissionController other(empty_base());
  other.restore(snap);
  REQUIRE(other.admitted().size() == ac.admitted().size());
  for (std::size_t i = 0; i < ac.admitted().size(); ++i)
    CHECK(to_json(other.admitted()[i]) == to_json(ac.admitted()[i]));
  REQUIRE(other.last_solution());
  CHECK(other.last_solution()->max_realtime_rho() ==
        doctest::Approx(ac.last_solution()->max_realtime_rho()));
  CHECK(other.addts(call("up0", Direction::uplink, "sta0")).verdict_text() == "reject(duplicate TSID)");

  auto dup = snap;
  dup["admitted"].push_back(snap["admitted"][0]);
  CHECK_THROWS_AS(other.restore(dup), ConfigError);
  CHECK_THROWS_AS(other.restore(nlohmann::json::object()), ConfigError);
  CHECK(tspec_from_json(to_json(call("q", Direction::downlink))).direction == Direction::downlink);
}

TEST_CASE("random ADDTS/DELTS keep the admitted set under the threshold") {
  std::mt19937 rng(42);
  AdmissionController ac(empty_base(0.8));
  std::vector<std::string> live;
  for (int step = 0; step < 50; ++step) {
    if (!live.empty() && rng() % 3 == 0) {
      const auto i = rng() % live.size();
      CHECK(ac.delts(live[i]).verdict == Verdict::removed);
      live.erase(live.begin() + i);
    } else {
      const auto id = "t" + std::to_string(step);
      auto t = call(id, rng() % 2 ? Direction::uplink : Direction::downlink, "s" + std::to_string(rng() % 4),
                    std::array<int, 3>{0, 6, 7}[rng() % 3]);
      t.mean_rate_bps = 48000.0 * (1 + rng() % 2);
      const auto d = ac.addts(t);
      if (d.verdict == Verdict::admit) {
        live.push_back(id);
        CHECK(d.max_rho <= 0.8);
      }
    }
    CHECK(ac.admitted().size() == live.size());
    const auto sol = ac.last_solution();
    if (sol) CHECK(sol->max_realtime_rho() <= 0.8);
  }
}
