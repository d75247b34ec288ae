#include "edca/edca.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "edca/admission.hpp"
#include "edca/capacity.hpp"
#include "edca/error.hpp"
#include "edca/saturation.hpp"
#include "edca/scenario.hpp"
#include "edca/simulator.hpp"

#ifndef EDCA_VERSION
#define EDCA_VERSION "0.0.0"
#endif

using nlohmann::json;

struct edca_scenario {
  json doc;
  std::string base_dir;
  edca::Scenario scenario;
  edca::TrafficClassTable table;
  std::vector<std::string> labels;
};

struct edca_template {
  edca::ScenarioTemplate tmpl;
};

struct edca_saturation {
  edca::TrafficClassTable table;
  edca::SaturationSolution solution;
};

struct edca_capacity {
  edca::TrafficClassTable table;
  edca::CapacitySolution solution;
};

struct edca_sim {
  edca::SimMetrics metrics;
  std::vector<std::string> labels;
};

struct edca_admission {
  std::unique_ptr<edca::AdmissionController> controller;
};

namespace {

thread_local std::string g_last_error;

edca_status fail(edca_status code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

template <class F>
edca_status guarded(F&& f) {
  try {
    g_last_error.clear();
    f();
    return EDCA_OK;
  } catch (const edca::ConfigError& e) {
    return fail(EDCA_ERR_CONFIG, e.what());
  } catch (const edca::ParseError& e) {
    return fail(EDCA_ERR_CONFIG, e.what());
  } catch (const edca::ConvergenceError& e) {
    return fail(EDCA_ERR_CONVERGENCE, e.what());
  } catch (const edca::IoError& e) {
    return fail(EDCA_ERR_IO, e.what());
  } catch (const json::exception& e) {
    return fail(EDCA_ERR_CONFIG, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(EDCA_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::out_of_range& e) {
    return fail(EDCA_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::domain_error& e) {
    return fail(EDCA_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(EDCA_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(EDCA_ERR_INTERNAL, "unknown error");
  }
}

struct NullArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

template <class T>
void require(const T* p, const char* name) {
  if (!p) throw NullArgument(std::string(name) + " must not be null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::string read_text(const char* path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw edca::IoError(std::string("cannot open ") + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void rebuild(edca_scenario& h) {
  h.scenario = edca::load_scenario(h.doc, h.base_dir);
  // An empty station list is a valid admission base; solving one is not.
  h.table = h.scenario.stations.empty() ? edca::TrafficClassTable{}
                                         : edca::derive_traffic_classes(h.scenario.stations, h.scenario.acs);
  h.labels.clear();
  for (const auto& tc : h.table.classes) h.labels.push_back(edca::tc_label(tc));
}

void require_stations(const edca_scenario& h) {
  if (h.table.size() == 0) throw edca::ConfigError("stations", "station list is empty");
}

edca_scenario* make_scenario(json doc, std::string base_dir) {
  auto h = std::make_unique<edca_scenario>();
  h->doc = std::move(doc);
  h->base_dir = std::move(base_dir);
  rebuild(*h);
  return h.release();
}

std::map<std::string, double> parse_bindings(const char* bindings) {
  std::map<std::string, double> out;
  if (!bindings || !*bindings) return out;
  const auto j = json::parse(bindings);
  if (!j.is_object()) throw edca::ConfigError("bindings", "expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it->is_number()) throw edca::ConfigError("bindings." + it.key(), "expected a number");
    out[it.key()] = it->get<double>();
  }
  return out;
}

edca::SimOptions sim_options(const edca_sim_options* o) {
  edca::SimOptions s;
  if (!o) return s;
  s.duration_s = o->duration_s;
  s.warmup_s = o->warmup_s;
  s.deadline_ms = o->deadline_ms;
  s.wired_delay_ms = o->wired_delay_ms;
  s.buffer_packets = o->buffer_packets;
  if (o->packet_trace_path) s.packet_trace_path = o->packet_trace_path;
  if (!(s.duration_s > s.warmup_s) || s.warmup_s < 0.0)
    throw std::invalid_argument("simulation duration must exceed a non-negative warmup");
  if (s.buffer_packets < 1) throw std::invalid_argument("buffer must hold at least one packet");
  return s;
}

void copy_text(char* dst, std::size_t cap, const std::string& src) {
  std::snprintf(dst, cap, "%s", src.c_str());
}

void fill_decision(const edca::Decision& d, edca_decision* out) {
  switch (d.verdict) {
    case edca::Verdict::admit:
      out->verdict = EDCA_ADMIT;
      break;
    case edca::Verdict::reject:
      out->verdict = EDCA_REJECT;
      break;
    case edca::Verdict::removed:
      out->verdict = EDCA_REMOVED;
      break;
    case edca::Verdict::error:
      out->verdict = EDCA_DECISION_ERROR;
      break;
  }
  out->max_rho = d.max_rho;
  copy_text(out->reason, sizeof out->reason, d.reason);
  copy_text(out->binding_tc, sizeof out->binding_tc, d.binding_tc);
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

extern "C" {

const char* edca_last_error(void) { return g_last_error.c_str(); }
const char* edca_version(void) { return EDCA_VERSION; }
void edca_string_free(char* s) { std::free(s); }

edca_status edca_scenario_load_file(const char* path, edca_scenario** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    const auto tmpl = edca::ScenarioTemplate::from_text(read_text(path),
                                                        std::filesystem::path(path).parent_path().string());
    *out = make_scenario(tmpl.bind({}), tmpl.base_dir());
  });
}

edca_status edca_scenario_load_text(const char* text, const char* base_dir, edca_scenario** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    const auto tmpl = edca::ScenarioTemplate::from_text(text, base_dir ? base_dir : "");
    *out = make_scenario(tmpl.bind({}), tmpl.base_dir());
  });
}

edca_status edca_scenario_patch(edca_scenario* sc, const char* patch) {
  return guarded([&] {
    require(sc, "scenario");
    require(patch, "patch");
    json doc = sc->doc;
    doc.merge_patch(json::parse(patch, nullptr, true, true));
    edca_scenario next{doc, sc->base_dir, {}, {}, {}};
    rebuild(next);
    *sc = std::move(next);
  });
}

edca_status edca_scenario_to_json(const edca_scenario* sc, char** out) {
  return guarded([&] {
    require(sc, "scenario");
    require(out, "out");
    *out = dup_string(edca::to_json(sc->scenario).dump(2));
  });
}

edca_status edca_scenario_class_count(const edca_scenario* sc, size_t* out) {
  return guarded([&] {
    require(sc, "scenario");
    require(out, "out");
    *out = sc->table.size();
  });
}

edca_status edca_scenario_class_label(const edca_scenario* sc, size_t j, const char** out) {
  return guarded([&] {
    require(sc, "scenario");
    require(out, "out");
    *out = sc->labels.at(j).c_str();
  });
}

void edca_scenario_free(edca_scenario* sc) { delete sc; }

edca_status edca_template_load_file(const char* path, edca_template** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new edca_template{edca::ScenarioTemplate::from_file(path)};
  });
}

edca_status edca_template_load_text(const char* text, const char* base_dir, edca_template** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    *out = new edca_template{edca::ScenarioTemplate::from_text(text, base_dir ? base_dir : "")};
  });
}

edca_status edca_template_variables(const edca_template* t, char** out) {
  return guarded([&] {
    require(t, "template");
    require(out, "out");
    *out = dup_string(json(t->tmpl.variables()).dump());
  });
}

edca_status edca_template_sweep(const edca_template* t, char** out) {
  return guarded([&] {
    require(t, "template");
    require(out, "out");
    *out = dup_string(json(t->tmpl.sweep()).dump());
  });
}

edca_status edca_template_instantiate(const edca_template* t, const char* bindings, edca_scenario** out) {
  return guarded([&] {
    require(t, "template");
    require(out, "out");
    *out = make_scenario(t->tmpl.bind(parse_bindings(bindings)), t->tmpl.base_dir());
  });
}

edca_status edca_template_patch(edca_template* t, const char* patch) {
  return guarded([&] {
    require(t, "template");
    require(patch, "patch");
    auto next = t->tmpl;
    next.patch(json::parse(patch, nullptr, true, true));
    t->tmpl = std::move(next);
  });
}

void edca_template_free(edca_template* t) { delete t; }

edca_status edca_saturation_solve(const edca_scenario* sc, edca_saturation** out) {
  return guarded([&] {
    require(sc, "scenario");
    require(out, "out");
    auto h = std::make_unique<edca_saturation>();
    require_stations(*sc);
    h->table = sc->table;
    const auto times = edca::exchange_times(h->table, sc->scenario.phy, sc->scenario.access);
    h->solution = edca::solve_fixed_point(h->table, times, sc->scenario.solver);
    *out = h.release();
  });
}

edca_status edca_saturation_class_count(const edca_saturation* s, size_t* out) {
  return guarded([&] {
    require(s, "saturation");
    require(out, "out");
    *out = s->solution.classes.size();
  });
}

edca_status edca_saturation_get(const edca_saturation* s, size_t j, edca_saturation_class* out) {
  return guarded([&] {
    require(s, "saturation");
    require(out, "out");
    const auto& c = s->solution.classes.at(j);
    *out = {s->table[j].ac, s->table[j].flows, c.tau,      c.p_collision, c.p_drop,     c.gamma,
            c.success_us,   c.collision_us,    c.idle_us,  c.cycle_us,    c.throughput, c.service_us};
  });
}

edca_status edca_saturation_occupancy(const edca_saturation* s, double* buf, size_t cap, size_t* n) {
  return guarded([&] {
    require(s, "saturation");
    require(n, "n");
    const auto& b = s->solution.occupancy;
    if (cap > 0) require(buf, "buf");
    for (std::size_t i = 0; i < std::min(cap, b.size()); ++i) buf[i] = b[i];
    *n = b.size();
  });
}

edca_status edca_saturation_to_json(const edca_saturation* s, char** out) {
  return guarded([&] {
    require(s, "saturation");
    require(out, "out");
    json j;
    j["iterations"] = s->solution.iterations;
    j["residual"] = s->solution.residual;
    j["occupancy"] = s->solution.occupancy;
    j["mean_collision_size"] = s->solution.mean_collision_size;
    j["successes"] = s->solution.successes;
    j["classes"] = json::array();
    for (std::size_t k = 0; k < s->table.size(); ++k) {
      const auto& c = s->solution.classes[k];
      j["classes"].push_back({{"tc", edca::tc_label(s->table[k])},
                              {"ac", s->table[k].ac},
                              {"flows", s->table[k].flows},
                              {"tau", c.tau},
                              {"p_collision", c.p_collision},
                              {"p_drop", c.p_drop},
                              {"gamma", c.gamma},
                              {"success_us", c.success_us},
                              {"collision_us", c.collision_us},
                              {"idle_us", c.idle_us},
                              {"cycle_us", c.cycle_us},
                              {"throughput", c.throughput},
                              {"service_us", c.service_us}});
    }
    *out = dup_string(j.dump(2));
  });
}

void edca_saturation_free(edca_saturation* s) { delete s; }

edca_status edca_capacity_solve(const edca_scenario* sc, edca_capacity** out) {
  return guarded([&] {
    require(sc, "scenario");
    require(out, "out");
    require_stations(*sc);
    auto h = std::make_unique<edca_capacity>();
    h->table = sc->table;
    const auto& s = sc->scenario;
    edca::ServiceTimeCache cache;
    edca::CapacityModel model{h->table,    s.phy, s.access, s.solver, s.utilization, s.admission.weight_truncation_epsilon,
                              &cache};
    h->solution = edca::solve_utilization(model);
    *out = h.release();
  });
}

edca_status edca_capacity_class_count(const edca_capacity* c, size_t* out) {
  return guarded([&] {
    require(c, "capacity");
    require(out, "out");
    *out = c->solution.classes.size();
  });
}

edca_status edca_capacity_get(const edca_capacity* c, size_t j, edca_capacity_class* out) {
  return guarded([&] {
    require(c, "capacity");
    require(out, "out");
    const auto& k = c->solution.classes.at(j);
    *out = {c->table[j].ac, c->table[j].flows, k.saturated ? 1 : 0, k.lambda, k.mu, k.rho};
  });
}

edca_status edca_capacity_max_rho(const edca_capacity* c, double* rho, int* binding) {
  return guarded([&] {
    require(c, "capacity");
    if (rho) *rho = c->solution.max_realtime_rho();
    if (binding) *binding = c->solution.binding_class();
  });
}

edca_status edca_capacity_to_json(const edca_capacity* c, char** out) {
  return guarded([&] {
    require(c, "capacity");
    require(out, "out");
    json j;
    j["iterations"] = c->solution.iterations;
    j["residual"] = c->solution.residual;
    j["discarded_mass"] = c->solution.discarded_mass;
    j["max_rho"] = c->solution.max_realtime_rho();
    const int b = c->solution.binding_class();
    j["binding_tc"] = b >= 0 ? json(edca::tc_label(c->table[b])) : json(nullptr);
    j["classes"] = json::array();
    for (std::size_t k = 0; k < c->table.size(); ++k) {
      const auto& x = c->solution.classes[k];
      j["classes"].push_back({{"tc", edca::tc_label(c->table[k])},
                              {"ac", c->table[k].ac},
                              {"flows", c->table[k].flows},
                              {"saturated", x.saturated},
                              {"lambda", x.lambda},
                              {"mu", number_or_null(x.mu)},
                              {"rho", x.rho}});
    }
    *out = dup_string(j.dump(2));
  });
}

void edca_capacity_free(edca_capacity* c) { delete c; }

edca_status edca_capacity_max_flows(const edca_template* t, const char* variable, const char* bindings, int lo,
                                    int cap, int* out) {
  return guarded([&] {
    require(t, "template");
    require(variable, "variable");
    require(out, "out");
    if (lo < 1 || cap < lo) throw std::invalid_argument("flow range must satisfy 1 <= lo <= cap");
    auto bound = parse_bindings(bindings);
    edca::ServiceTimeCache cache;
    *out = edca::max_admissible_flows(
        [&](int n) {
          bound[variable] = n;
          return t->tmpl.instantiate(bound);
        },
        lo, cap, &cache);
  });
}

edca_status edca_capacity_activity_pdf(const edca_capacity* c, size_t tagged, char** out) {
  return guarded([&] {
    require(c, "capacity");
    require(out, "out");
    if (tagged >= c->table.size()) throw std::out_of_range("tagged TC index out of range");
    std::vector<double> rho;
    std::vector<bool> pinned;
    for (const auto& k : c->solution.classes) {
      rho.push_back(k.rho);
      pinned.push_back(k.saturated);
    }
    *out = dup_string(json(edca::activity_pdf(static_cast<int>(tagged), rho, c->table, pinned)).dump());
  });
}

edca_status edca_sim_options_from_scenario(const edca_scenario* sc, edca_sim_options* out) {
  return guarded([&] {
    require(sc, "scenario");
    require(out, "out");
    const auto& s = sc->scenario.simulation;
    *out = {s.duration_s, s.warmup_s, s.deadline_ms, s.wired_delay_ms, s.buffer_packets, nullptr};
  });
}

edca_status edca_simulate(const edca_scenario* sc, uint64_t seed, const edca_sim_options* opt, edca_sim** out) {
  return guarded([&] {
    require(sc, "scenario");
    require(out, "out");
    auto h = std::make_unique<edca_sim>();
    const auto o = opt ? sim_options(opt) : edca::SimOptions::from(sc->scenario.simulation);
    h->metrics = edca::simulate(sc->scenario, seed, o);
    h->labels = sc->labels;
    *out = h.release();
  });
}

edca_status edca_sim_class_count(const edca_sim* s, size_t* out) {
  return guarded([&] {
    require(s, "sim");
    require(out, "out");
    *out = s->metrics.classes.size();
  });
}

edca_status edca_sim_get(const edca_sim* s, size_t j, edca_sim_class* out) {
  return guarded([&] {
    require(s, "sim");
    require(out, "out");
    const auto& c = s->metrics.classes.at(j);
    *out = {c.ac,
            c.flows,
            c.saturated ? 1 : 0,
            c.throughput,
            c.mean_service_us,
            c.mean_delay_us,
            c.loss_ratio(),
            c.collision_probability(),
            c.generated,
            c.delivered,
            c.retry_drops,
            c.buffer_drops,
            c.deadline_drops,
            c.residual,
            c.attempts,
            c.collisions,
            c.internal_collisions};
  });
}

edca_status edca_sim_to_json(const edca_sim* s, char** out) {
  return guarded([&] {
    require(s, "sim");
    require(out, "out");
    const auto& m = s->metrics;
    json j;
    j["measured_s"] = m.measured_s;
    j["successes"] = m.successes;
    j["external_collisions"] = m.external_collisions;
    j["internal_collisions"] = m.internal_collisions;
    j["slot_visits"] = m.slot_visits;
    j["classes"] = json::array();
    for (std::size_t k = 0; k < m.classes.size(); ++k) {
      const auto& c = m.classes[k];
      j["classes"].push_back({{"tc", s->labels.at(k)},
                              {"ac", c.ac},
                              {"flows", c.flows},
                              {"saturated", c.saturated},
                              {"throughput", c.throughput},
                              {"mean_service_us", c.mean_service_us},
                              {"mean_delay_us", c.mean_delay_us},
                              {"loss_ratio", c.loss_ratio()},
                              {"collision_probability", c.collision_probability()},
                              {"generated", c.generated},
                              {"delivered", c.delivered},
                              {"retry_drops", c.retry_drops},
                              {"buffer_drops", c.buffer_drops},
                              {"deadline_drops", c.deadline_drops},
                              {"residual", c.residual},
                              {"delay_histogram_1ms", c.delay_histogram}});
    }
    *out = dup_string(j.dump(2));
  });
}

void edca_sim_free(edca_sim* s) { delete s; }

edca_status edca_sim_capacity(const edca_template* t, const char* variable, const char* bindings,
                              const uint64_t* seeds, size_t n_seeds, double loss_threshold, int lo, int cap,
                              const edca_sim_options* opt, int* out) {
  return guarded([&] {
    require(t, "template");
    require(variable, "variable");
    require(seeds, "seeds");
    require(out, "out");
    if (n_seeds == 0) throw std::invalid_argument("at least one seed is required");
    if (lo < 1 || cap < lo) throw std::invalid_argument("flow range must satisfy 1 <= lo <= cap");
    auto bound = parse_bindings(bindings);
    edca::CapacitySearch search;
    search.seeds.assign(seeds, seeds + n_seeds);
    search.loss_threshold = loss_threshold;
    search.lo = lo;
    search.cap = cap;
    edca::SimOptions o = opt ? sim_options(opt) : edca::SimOptions::from(t->tmpl.instantiate(bound).simulation);
    *out = edca::capacity_search(
        [&](int n) {
          auto b = bound;
          b[variable] = n;
          return t->tmpl.instantiate(b);
        },
        search, o);
  });
}

edca_status edca_sim_activity(const edca_scenario* sc, size_t tagged, const uint64_t* seeds, size_t n_seeds,
                              const edca_sim_options* opt, char** out) {
  return guarded([&] {
    require(sc, "scenario");
    require(seeds, "seeds");
    require(out, "out");
    if (n_seeds == 0) throw std::invalid_argument("at least one seed is required");
    const auto o = opt ? sim_options(opt) : edca::SimOptions::from(sc->scenario.simulation);
    const auto pdf = edca::activity_histogram(sc->scenario, static_cast<int>(tagged),
                                              std::vector<std::uint64_t>(seeds, seeds + n_seeds), o);
    *out = dup_string(json(pdf).dump());
  });
}

edca_status edca_admission_create(const edca_scenario* base, edca_admission** out) {
  return guarded([&] {
    require(base, "scenario");
    require(out, "out");
    auto h = std::make_unique<edca_admission>();
    h->controller = std::make_unique<edca::AdmissionController>(base->scenario);
    *out = h.release();
  });
}

edca_status edca_admission_addts(edca_admission* a, const edca_tspec* t, edca_decision* out) {
  return guarded([&] {
    require(a, "admission");
    require(t, "tspec");
    require(out, "out");
    edca::Tspec ts;
    ts.tsid = t->tsid ? t->tsid : "";
    ts.up = t->up;
    ts.direction = t->downlink ? edca::Direction::downlink : edca::Direction::uplink;
    ts.station = t->station ? t->station : "";
    ts.mean_rate_bps = t->mean_rate_bps;
    ts.mean_packet_bytes = t->mean_packet_bytes;
    fill_decision(a->controller->addts(ts), out);
  });
}

edca_status edca_admission_delts(edca_admission* a, const char* tsid, edca_decision* out) {
  return guarded([&] {
    require(a, "admission");
    require(tsid, "tsid");
    require(out, "out");
    fill_decision(a->controller->delts(tsid), out);
  });
}

edca_status edca_admission_count(const edca_admission* a, size_t* out) {
  return guarded([&] {
    require(a, "admission");
    require(out, "out");
    *out = a->controller->admitted().size();
  });
}

edca_status edca_admission_replay(edca_admission* a, const char* events, char** csv_out) {
  return guarded([&] {
    require(a, "admission");
    require(events, "events");
    require(csv_out, "csv_out");
    std::istringstream in(events);
    const auto parsed = edca::parse_events(in);
    const auto log = edca::replay(*a->controller, parsed);
    std::ostringstream csv;
    edca::write_decision_log(csv, log);
    *csv_out = dup_string(csv.str());
  });
}

edca_status edca_admission_snapshot(const edca_admission* a, char** json_out) {
  return guarded([&] {
    require(a, "admission");
    require(json_out, "json_out");
    *json_out = dup_string(a->controller->snapshot().dump(2));
  });
}

edca_status edca_admission_restore(edca_admission* a, const char* text) {
  return guarded([&] {
    require(a, "admission");
    require(text, "json");
    a->controller->restore(json::parse(text));
  });
}

void edca_admission_free(edca_admission* a) { delete a; }

}  // extern "C"
