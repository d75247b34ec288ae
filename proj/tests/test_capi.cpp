#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "edca/edca.h"

namespace {

const char* kOne = R"({"acs":[null,null,null,{"aifsn":2,"cw_min":15,"cw_max":1023,"m":6,"retry_limit":7}],
  "stations":[{"name":"a","traffic":{"AC3":{"kind":"saturated","packet_bytes":1000}}}]})";

const char* kCalls = R"({"stations":[
  {"name":"sta","count":"${N}","traffic":{"AC3":{"kind":"cbr","codec_rate_bps":64000,"interval_ms":20}}},
  {"name":"ap","ap":true,"traffic":{"AC3":{"kind":"cbr","codec_rate_bps":64000,"interval_ms":20,"flows":"${N}"}}}],
  "sweep":{"N":[4]}})";

std::string take(char* s) {
  std::string out = s ? s : "";
  edca_string_free(s);
  return out;
}

}  // namespace

TEST_CASE("errors carry a code and a message") {
  CHECK(std::strlen(edca_version()) > 0);
  edca_scenario* sc = nullptr;
  CHECK(edca_scenario_load_text("{not json", nullptr, &sc) == EDCA_ERR_CONFIG);
  CHECK(sc == nullptr);
  CHECK(std::strlen(edca_last_error()) > 0);
  CHECK(edca_scenario_load_text(R"({"stations":[],"bogus":1})", nullptr, &sc) == EDCA_ERR_CONFIG);
  CHECK(std::string(edca_last_error()).find("bogus") != std::string::npos);
  CHECK(edca_scenario_load_file("/nonexistent/x.json", &sc) == EDCA_ERR_IO);
  CHECK(edca_scenario_load_text(nullptr, nullptr, &sc) == EDCA_ERR_INVALID_ARGUMENT);
  REQUIRE(edca_scenario_load_text(kOne, nullptr, &sc) == EDCA_OK);
  CHECK(std::strlen(edca_last_error()) == 0);
  size_t n = 0;
  CHECK(edca_scenario_class_count(sc, &n) == EDCA_OK);
  CHECK(n == 1);
  const char* label = nullptr;
  CHECK(edca_scenario_class_label(sc, 5, &label) == EDCA_ERR_INVALID_ARGUMENT);
  CHECK(edca_scenario_patch(sc, R"({"acs":[null,null,null,{"cw_min":-3}]})") == EDCA_ERR_CONFIG);
  edca_scenario_free(sc);
  edca_scenario_free(nullptr);
}

TEST_CASE("saturation through the C interface") {
  edca_scenario* sc = nullptr;
  REQUIRE(edca_scenario_load_text(kOne, nullptr, &sc) == EDCA_OK);
  edca_saturation* s = nullptr;
  REQUIRE(edca_saturation_solve(sc, &s) == EDCA_OK);
  edca_saturation_class c{};
  REQUIRE(edca_saturation_get(s, 0, &c) == EDCA_OK);
  CHECK(c.ac == 3);
  CHECK(c.p_collision == 0.0);
  CHECK(c.cycle_us == doctest::Approx(c.success_us + c.collision_us + c.idle_us));
  CHECK(edca_saturation_get(s, 1, &c) == EDCA_ERR_INVALID_ARGUMENT);
  size_t len = 0;
  REQUIRE(edca_saturation_occupancy(s, nullptr, 0, &len) == EDCA_OK);
  CHECK(len >= 1);
  std::vector<double> buf(len);
  size_t again = 0;
  CHECK(edca_saturation_occupancy(s, buf.data(), 2, &again) == EDCA_OK);
  CHECK(again == len);
  CHECK(edca_saturation_occupancy(s, buf.data(), len, &len) == EDCA_OK);
  double sum = 0;
  for (double b : buf) sum += b;
  CHECK(sum == doctest::Approx(1.0));
  char* js = nullptr;
  REQUIRE(edca_saturation_to_json(s, &js) == EDCA_OK);
  CHECK(take(js).find("p_collision") != std::string::npos);
  edca_saturation_free(s);

  edca_sim_options opt{};
  REQUIRE(edca_sim_options_from_scenario(sc, &opt) == EDCA_OK);
  opt.duration_s = 2;
  opt.warmup_s = 0.2;
  edca_sim* sim = nullptr;
  REQUIRE(edca_simulate(sc, 1, &opt, &sim) == EDCA_OK);
  edca_sim_class m{};
  REQUIRE(edca_sim_get(sim, 0, &m) == EDCA_OK);
  CHECK(m.collisions == 0);
  CHECK(m.saturated == 1);
  CHECK(m.throughput == doctest::Approx(c.throughput).epsilon(0.01));
  edca_sim_free(sim);
  edca_scenario_free(sc);
}

TEST_CASE("templates, capacity and activity") {
  edca_template* t = nullptr;
  REQUIRE(edca_template_load_text(kCalls, nullptr, &t) == EDCA_OK);
  char* vars = nullptr;
  REQUIRE(edca_template_variables(t, &vars) == EDCA_OK);
  CHECK(take(vars) == R"(["N"])");
  edca_scenario* sc = nullptr;
  CHECK(edca_template_instantiate(t, R"({"M":3})", &sc) == EDCA_ERR_CONFIG);
  REQUIRE(edca_template_instantiate(t, R"({"N":4})", &sc) == EDCA_OK);
  edca_capacity* cap = nullptr;
  REQUIRE(edca_capacity_solve(sc, &cap) == EDCA_OK);
  size_t n = 0;
  edca_capacity_class_count(cap, &n);
  CHECK(n == 2);
  double rho = 0;
  int binding = -2;
  REQUIRE(edca_capacity_max_rho(cap, &rho, &binding) == EDCA_OK);
  CHECK(rho > 0);
  CHECK(rho < 1);
  CHECK(binding >= 0);
  edca_capacity_class c{};
  REQUIRE(edca_capacity_get(cap, binding, &c) == EDCA_OK);
  CHECK(c.rho == doctest::Approx(c.lambda / c.mu));
  char* pdf = nullptr;
  REQUIRE(edca_capacity_activity_pdf(cap, 0, &pdf) == EDCA_OK);
  CHECK(take(pdf).front() == '[');
  edca_capacity_free(cap);

  int flows = 0;
  REQUIRE(edca_capacity_max_flows(t, "N", nullptr, 1, 200, &flows) == EDCA_OK);
  CHECK(flows > 4);
  CHECK(edca_capacity_max_flows(t, "Q", nullptr, 1, 200, &flows) != EDCA_OK);

  edca_sim_options opt{};
  edca_sim_options_from_scenario(sc, &opt);
  opt.duration_s = 1;
  opt.warmup_s = 0.1;
  const uint64_t seeds[] = {1, 2};
  char* hist = nullptr;
  REQUIRE(edca_sim_activity(sc, 0, seeds, 2, &opt, &hist) == EDCA_OK);
  CHECK(take(hist).front() == '[');
  edca_scenario_free(sc);
  edca_template_free(t);
}

TEST_CASE("admission through the C interface") {
  edca_scenario* base = nullptr;
  REQUIRE(edca_scenario_load_text(R"({"stations":[]})", nullptr, &base) == EDCA_OK);
  edca_saturation* s = nullptr;
  CHECK(edca_saturation_solve(base, &s) == EDCA_ERR_CONFIG);
  edca_admission* a = nullptr;
  REQUIRE(edca_admission_create(base, &a) == EDCA_OK);
  edca_tspec t{"up1", 6, 0, "sta1", 96000, 120};
  edca_decision d{};
  REQUIRE(edca_admission_addts(a, &t, &d) == EDCA_OK);
  CHECK(d.verdict == EDCA_ADMIT);
  CHECK(d.max_rho > 0);
  REQUIRE(edca_admission_addts(a, &t, &d) == EDCA_OK);
  CHECK(d.verdict == EDCA_REJECT);
  CHECK(std::string(d.reason) == "duplicate TSID");
  CHECK(std::isnan(d.max_rho));
  size_t n = 0;
  edca_admission_count(a, &n);
  CHECK(n == 1);

  char* snap = nullptr;
  REQUIRE(edca_admission_snapshot(a, &snap) == EDCA_OK);
  const auto saved = take(snap);
  REQUIRE(edca_admission_delts(a, "up1", &d) == EDCA_OK);
  CHECK(d.verdict == EDCA_REMOVED);
  REQUIRE(edca_admission_delts(a, "up1", &d) == EDCA_OK);
  CHECK(d.verdict == EDCA_DECISION_ERROR);
  REQUIRE(edca_admission_restore(a, saved.c_str()) == EDCA_OK);
  edca_admission_count(a, &n);
  CHECK(n == 1);

  char* csv = nullptr;
  REQUIRE(edca_admission_replay(a, "ADDTS dn1 6 downlink - 96000 120\nDELTS up1\n", &csv) == EDCA_OK);
  const auto log = take(csv);
  CHECK(log.find("dn1,admit,") != std::string::npos);
  CHECK(log.find("up1,removed,") != std::string::npos);
  CHECK(edca_admission_replay(a, "ADDTS broken\n", &csv) == EDCA_ERR_CONFIG);
  CHECK(std::string(edca_last_error()).find("line 1") != std::string::npos);
  edca_admission_free(a);
  edca_scenario_free(base);
}
