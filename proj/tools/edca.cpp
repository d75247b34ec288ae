#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "edca/edca.h"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kConvergence = 3, kIo = 4, kInvalid = 5, kInternal = 6 };

struct Failure {
  int code;
  std::string message;
};

int exit_code(edca_status s) {
  switch (s) {
    case EDCA_OK:
      return kOk;
    case EDCA_ERR_CONFIG:
      return kConfig;
    case EDCA_ERR_CONVERGENCE:
      return kConvergence;
    case EDCA_ERR_IO:
      return kIo;
    case EDCA_ERR_INVALID_ARGUMENT:
      return kInvalid;
    default:
      return kInternal;
  }
}

void check(edca_status s) {
  if (s != EDCA_OK) throw Failure{exit_code(s), edca_last_error()};
}

std::string take(char* s) {
  std::string out(s ? s : "");
  edca_string_free(s);
  return out;
}

struct TemplateDeleter {
  void operator()(edca_template* t) const { edca_template_free(t); }
};
struct ScenarioDeleter {
  void operator()(edca_scenario* s) const { edca_scenario_free(s); }
};
struct SaturationDeleter {
  void operator()(edca_saturation* s) const { edca_saturation_free(s); }
};
struct CapacityDeleter {
  void operator()(edca_capacity* c) const { edca_capacity_free(c); }
};
struct SimDeleter {
  void operator()(edca_sim* s) const { edca_sim_free(s); }
};
struct AdmissionDeleter {
  void operator()(edca_admission* a) const { edca_admission_free(a); }
};
using TemplatePtr = std::unique_ptr<edca_template, TemplateDeleter>;
using ScenarioPtr = std::unique_ptr<edca_scenario, ScenarioDeleter>;
using SaturationPtr = std::unique_ptr<edca_saturation, SaturationDeleter>;
using CapacityPtr = std::unique_ptr<edca_capacity, CapacityDeleter>;
using SimPtr = std::unique_ptr<edca_sim, SimDeleter>;
using AdmissionPtr = std::unique_ptr<edca_admission, AdmissionDeleter>;

std::string num(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct Options {
  std::string scenario;
  std::string out = ".";
  std::vector<std::string> sets;
  std::string seeds = "1";
  double tolerance = NAN;
  double rho_th = NAN;
  std::string access;
  double duration = NAN;

  // command extras
  std::string vary;
  int lo = 1;
  int cap = 500;
  double loss = 0.01;
  std::string events;
  std::string snapshot_in;
  std::string tc;
  bool packet_trace = false;
};

using Point = std::map<std::string, double>;

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  for (std::string tok; std::getline(ss, tok, ',');) {
    if (tok.empty()) continue;
    if (const auto dash = tok.find('-'); dash != std::string::npos && dash > 0) {
      const auto a = std::stoull(tok.substr(0, dash)), b = std::stoull(tok.substr(dash + 1));
      if (b < a) throw Failure{kConfig, "bad seed range " + tok};
      for (auto s = a; s <= b; ++s) seeds.push_back(s);
    } else {
      seeds.push_back(std::stoull(tok));
    }
  }
  if (seeds.empty()) throw Failure{kConfig, "no seeds given"};
  return seeds;
}

class Session {
public:
  Session(std::string command, const Options& o) : command_(std::move(command)), o_(o) {
    edca_template* t = nullptr;
    check(edca_template_load_file(o.scenario.c_str(), &t));
    tmpl_.reset(t);
    json patch = json::object();
    if (std::isfinite(o.tolerance)) patch["solver"]["tolerance"] = o.tolerance;
    if (std::isfinite(o.rho_th)) patch["admission"]["rho_threshold"] = o.rho_th;
    if (!o.access.empty()) patch["access"] = o.access;
    if (std::isfinite(o.duration)) patch["simulation"]["duration_s"] = o.duration;
    if (!patch.empty()) check(edca_template_patch(tmpl_.get(), patch.dump().c_str()));

    for (const auto& s : o.sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) throw Failure{kConfig, "--set expects NAME=v1,v2,...: " + s};
      auto& vals = sets_[s.substr(0, eq)];
      std::stringstream ss(s.substr(eq + 1));
      for (std::string tok; std::getline(ss, tok, ',');) {
        try {
          vals.push_back(std::stod(tok));
        } catch (const std::exception&) {
          throw Failure{kConfig, "--set value is not a number: " + tok};
        }
      }
      if (vals.empty()) throw Failure{kConfig, "--set " + s + " has no values"};
    }
    std::error_code ec;
    fs::create_directories(o.out, ec);
    if (ec) throw Failure{kIo, "cannot create output directory " + o.out + ": " + ec.message()};
  }

  edca_template* tmpl() const { return tmpl_.get(); }

  // Grid over every template variable except `skip`, in name order.
  std::vector<Point> grid(const std::string& skip = {}) const {
    const auto vars = json::parse(take(call_string(edca_template_variables)));
    const auto sweep = json::parse(take(call_string(edca_template_sweep)));
    std::vector<Point> points{Point{}};
    for (const auto& v : vars) {
      const auto name = v.get<std::string>();
      if (name == skip) continue;
      std::vector<double> vals;
      if (auto it = sets_.find(name); it != sets_.end())
        vals = it->second;
      else if (sweep.contains(name))
        vals = sweep[name].get<std::vector<double>>();
      if (vals.empty()) throw Failure{kConfig, "template variable " + name + " has no values; use --set"};
      std::vector<Point> next;
      for (const auto& p : points)
        for (double x : vals) {
          auto q = p;
          q[name] = x;
          next.push_back(std::move(q));
        }
      points = std::move(next);
    }
    return points;
  }

  std::vector<std::string> grid_names(const std::string& skip = {}) const {
    std::vector<std::string> names;
    for (const auto& v : json::parse(take(call_string(edca_template_variables)))) {
      const auto name = v.get<std::string>();
      if (name != skip) names.push_back(name);
    }
    return names;
  }

  ScenarioPtr instantiate(const Point& p) const {
    edca_scenario* s = nullptr;
    check(edca_template_instantiate(tmpl_.get(), json(p).dump().c_str(), &s));
    return ScenarioPtr(s);
  }

  std::ofstream open(const std::string& name) {
    const auto path = (fs::path(o_.out) / name).string();
    std::ofstream f(path);
    if (!f) throw Failure{kIo, "cannot write " + path};
    outputs_.push_back(path);
    return f;
  }

  void manifest(const std::vector<std::uint64_t>& seeds = {}) {
    json m;
    m["command"] = command_;
    m["scenario"] = o_.scenario;
    json opts;
    opts["set"] = o_.sets;
    if (std::isfinite(o_.tolerance)) opts["tolerance"] = o_.tolerance;
    if (std::isfinite(o_.rho_th)) opts["rho_th"] = o_.rho_th;
    if (!o_.access.empty()) opts["access"] = o_.access;
    if (std::isfinite(o_.duration)) opts["duration_s"] = o_.duration;
    if (!o_.vary.empty()) {
      opts["vary"] = o_.vary;
      opts["lo"] = o_.lo;
      opts["cap"] = o_.cap;
    }
    if (command_ == "sim-capacity") opts["loss_threshold"] = o_.loss;
    if (!o_.events.empty()) opts["events"] = o_.events;
    if (!o_.snapshot_in.empty()) opts["snapshot_in"] = o_.snapshot_in;
    if (!o_.tc.empty()) opts["tc"] = o_.tc;
    m["options"] = opts;
    m["seeds"] = seeds;
    m["outputs"] = outputs_;
    m["tool_version"] = edca_version();
    const auto path = (fs::path(o_.out) / "manifest.json").string();
    std::ofstream f(path);
    if (!f) throw Failure{kIo, "cannot write " + path};
    f << m.dump(2) << '\n';
  }

private:
  char* call_string(edca_status (*fn)(const edca_template*, char**)) const {
    char* s = nullptr;
    check(fn(tmpl_.get(), &s));
    return s;
  }

  std::string command_;
  Options o_;
  TemplatePtr tmpl_;
  std::map<std::string, std::vector<double>> sets_;
  std::vector<std::string> outputs_;
};

std::string point_prefix(const std::vector<std::string>& names, const Point& p) {
  std::string s;
  for (const auto& n : names) s += num(p.at(n)) + ",";
  return s;
}

std::string header_prefix(const std::vector<std::string>& names) {
  std::string s;
  for (const auto& n : names) s += n + ",";
  return s;
}

std::string label(edca_scenario* s, std::size_t j) {
  const char* l = nullptr;
  check(edca_scenario_class_label(s, j, &l));
  return l;
}

// Evaluates f on every point concurrently; results come back in grid order.
template <class F>
auto for_points(const std::vector<Point>& points, F f) {
  using R = decltype(f(points.front()));
  std::vector<std::future<R>> jobs;
  for (const auto& p : points) jobs.push_back(std::async(std::launch::async, [&f, &p] { return f(p); }));
  std::vector<R> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

int cmd_solve(const Options& o) {
  Session s("solve", o);
  const auto points = s.grid();
  const auto names = s.grid_names();
  const auto rows = for_points(points, [&](const Point& p) {
    auto sc = s.instantiate(p);
    edca_saturation* raw = nullptr;
    check(edca_saturation_solve(sc.get(), &raw));
    SaturationPtr sat(raw);
    std::size_t n = 0;
    check(edca_saturation_class_count(sat.get(), &n));
    std::vector<std::pair<std::string, edca_saturation_class>> out;
    for (std::size_t j = 0; j < n; ++j) {
      edca_saturation_class c{};
      check(edca_saturation_get(sat.get(), j, &c));
      out.emplace_back(label(sc.get(), j), c);
    }
    return out;
  });
  auto f = s.open("saturation.csv");
  f << header_prefix(names)
    << "tc,ac,flows,tau,p_collision,p_drop,gamma,throughput,service_time_us,cycle_time_us,success_time_us,"
       "collision_time_us,idle_time_us\n";
  for (std::size_t i = 0; i < points.size(); ++i)
    for (const auto& [tc, c] : rows[i]) {
      f << point_prefix(names, points[i]) << tc << ',' << c.ac << ',' << c.flows << ',' << num(c.tau) << ','
        << num(c.p_collision) << ',' << num(c.p_drop) << ',' << num(c.gamma) << ',' << num(c.throughput) << ','
        << num(c.service_us) << ',' << num(c.cycle_us) << ',' << num(c.success_us) << ',' << num(c.collision_us)
        << ',' << num(c.idle_us) << '\n';
      std::printf("%s%-18s tau=%.4f p_c=%.4f S=%.4f E[t_srv]=%.1f us\n", point_prefix(names, points[i]).c_str(),
                  tc.c_str(), c.tau, c.p_collision, c.throughput, c.service_us);
    }
  s.manifest();
  return kOk;
}

int cmd_capacity(const Options& o) {
  Session s("capacity", o);
  if (!o.vary.empty()) {
    const auto points = s.grid(o.vary);
    const auto names = s.grid_names(o.vary);
    const auto counts = for_points(points, [&](const Point& p) {
      int n = 0;
      check(edca_capacity_max_flows(s.tmpl(), o.vary.c_str(), json(p).dump().c_str(), o.lo, o.cap, &n));
      return n;
    });
    auto f = s.open("capacity.csv");
    f << header_prefix(names) << "max_" << o.vary << '\n';
    for (std::size_t i = 0; i < points.size(); ++i) {
      f << point_prefix(names, points[i]) << counts[i] << '\n';
      std::printf("%smax %s = %d\n", point_prefix(names, points[i]).c_str(), o.vary.c_str(), counts[i]);
    }
    s.manifest();
    return kOk;
  }
  const auto points = s.grid();
  const auto names = s.grid_names();
  const auto rows = for_points(points, [&](const Point& p) {
    auto sc = s.instantiate(p);
    edca_capacity* raw = nullptr;
    check(edca_capacity_solve(sc.get(), &raw));
    CapacityPtr cap(raw);
    std::size_t n = 0;
    check(edca_capacity_class_count(cap.get(), &n));
    std::vector<std::pair<std::string, edca_capacity_class>> out;
    for (std::size_t j = 0; j < n; ++j) {
      edca_capacity_class c{};
      check(edca_capacity_get(cap.get(), j, &c));
      out.emplace_back(label(sc.get(), j), c);
    }
    return out;
  });
  auto f = s.open("utilization.csv");
  f << header_prefix(names) << "tc,ac,flows,saturated,lambda_pps,mu_pps,rho\n";
  for (std::size_t i = 0; i < points.size(); ++i)
    for (const auto& [tc, c] : rows[i]) {
      f << point_prefix(names, points[i]) << tc << ',' << c.ac << ',' << c.flows << ',' << c.saturated << ','
        << num(c.lambda) << ',' << num(c.mu) << ',' << num(c.rho) << '\n';
      std::printf("%s%-18s rho=%.4f\n", point_prefix(names, points[i]).c_str(), tc.c_str(), c.rho);
    }
  s.manifest();
  return kOk;
}

struct SimRow {
  std::string tc;
  edca_sim_class c;
  std::vector<std::uint64_t> histogram;
};

std::vector<SimRow> run_sim(Session& s, const Point& p, std::uint64_t seed, const char* trace_path) {
  auto sc = s.instantiate(p);
  edca_sim_options opt{};
  check(edca_sim_options_from_scenario(sc.get(), &opt));
  opt.packet_trace_path = trace_path;
  edca_sim* raw = nullptr;
  check(edca_simulate(sc.get(), seed, &opt, &raw));
  SimPtr sim(raw);
  const auto doc = json::parse(take([&] {
    char* j = nullptr;
    check(edca_sim_to_json(sim.get(), &j));
    return j;
  }()));
  std::size_t n = 0;
  check(edca_sim_class_count(sim.get(), &n));
  std::vector<SimRow> rows;
  for (std::size_t j = 0; j < n; ++j) {
    SimRow r;
    r.tc = label(sc.get(), j);
    check(edca_sim_get(sim.get(), j, &r.c));
    r.histogram = doc["classes"][j]["delay_histogram_1ms"].get<std::vector<std::uint64_t>>();
    rows.push_back(std::move(r));
  }
  return rows;
}

int cmd_simulate(const Options& o) {
  Session s("simulate", o);
  const auto seeds = parse_seeds(o.seeds);
  const auto points = s.grid();
  const auto names = s.grid_names();
  std::vector<std::pair<std::size_t, std::uint64_t>> jobs;
  for (std::size_t i = 0; i < points.size(); ++i)
    for (auto seed : seeds) jobs.emplace_back(i, seed);
  std::vector<std::future<std::vector<SimRow>>> futures;
  std::vector<std::string> traces;
  for (const auto& [i, seed] : jobs) {
    std::string path;
    if (o.packet_trace)
      path = (fs::path(o.out) / ("packets_p" + std::to_string(i) + "_s" + std::to_string(seed) + ".csv")).string();
    traces.push_back(path);
  }
  for (std::size_t k = 0; k < jobs.size(); ++k)
    futures.push_back(std::async(std::launch::async, [&, k] {
      return run_sim(s, points[jobs[k].first], jobs[k].second, traces[k].empty() ? nullptr : traces[k].c_str());
    }));
  auto f = s.open("simulation.csv");
  auto h = s.open("delay_histogram.csv");
  f << header_prefix(names)
    << "seed,tc,ac,flows,throughput,service_time_us,delay_us,loss_ratio,p_collision,generated,delivered,retry_drops,"
       "buffer_drops,deadline_drops,residual\n";
  h << header_prefix(names) << "seed,tc,delay_bin_ms,packets\n";
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const auto rows = futures[k].get();
    const auto prefix = point_prefix(names, points[jobs[k].first]) + std::to_string(jobs[k].second) + ",";
    for (const auto& r : rows) {
      const auto& c = r.c;
      f << prefix << r.tc << ',' << c.ac << ',' << c.flows << ',' << num(c.throughput) << ',' << num(c.mean_service_us)
        << ',' << num(c.mean_delay_us) << ',' << num(c.loss_ratio) << ',' << num(c.collision_probability) << ','
        << c.generated << ',' << c.delivered << ',' << c.retry_drops << ',' << c.buffer_drops << ','
        << c.deadline_drops << ',' << c.residual << '\n';
      for (std::size_t b = 0; b < r.histogram.size(); ++b)
        if (r.histogram[b]) h << prefix << r.tc << ',' << b << ',' << r.histogram[b] << '\n';
      std::printf("%s%-18s S=%.4f loss=%.4f delay=%.1f us\n", prefix.c_str(), r.tc.c_str(), c.throughput,
                  c.loss_ratio, c.mean_delay_us);
    }
  }
  s.manifest(seeds);
  return kOk;
}

int cmd_compare(const Options& o) {
  Session s("compare", o);
  const auto seeds = parse_seeds(o.seeds);
  const auto points = s.grid();
  const auto names = s.grid_names();
  auto f = s.open("compare.csv");
  f << header_prefix(names)
    << "tc,throughput_analysis,throughput_simulation,throughput_rel_delta,service_time_analysis_us,"
       "service_time_simulation_us,service_time_rel_delta\n";
  double worst = 0.0;
  for (const auto& p : points) {
    auto sc = s.instantiate(p);
    edca_saturation* raw = nullptr;
    check(edca_saturation_solve(sc.get(), &raw));
    SaturationPtr sat(raw);
    std::size_t n = 0;
    check(edca_saturation_class_count(sat.get(), &n));
    std::vector<double> thr(n, 0.0), srv(n, 0.0);
    std::vector<std::future<std::vector<SimRow>>> runs;
    for (auto seed : seeds) runs.push_back(std::async(std::launch::async, [&, seed] { return run_sim(s, p, seed, nullptr); }));
    for (auto& r : runs) {
      const auto rows = r.get();
      for (std::size_t j = 0; j < n; ++j) {
        thr[j] += rows[j].c.throughput / seeds.size();
        srv[j] += rows[j].c.mean_service_us / seeds.size();
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      edca_saturation_class c{};
      check(edca_saturation_get(sat.get(), j, &c));
      const double dt = (thr[j] - c.throughput) / c.throughput;
      const double ds = (srv[j] - c.service_us) / c.service_us;
      worst = std::max(worst, std::abs(dt));
      f << point_prefix(names, p) << label(sc.get(), j) << ',' << num(c.throughput) << ',' << num(thr[j]) << ','
        << num(dt) << ',' << num(c.service_us) << ',' << num(srv[j]) << ',' << num(ds) << '\n';
    }
  }
  std::printf("max relative throughput delta: %.4f\n", worst);
  s.manifest(seeds);
  return kOk;
}

int cmd_admit(const Options& o) {
  Session s("admit", o);
  const auto points = s.grid();
  if (points.size() != 1) throw Failure{kConfig, "admit needs a single scenario point; bind variables with --set"};
  auto sc = s.instantiate(points.front());
  edca_admission* raw = nullptr;
  check(edca_admission_create(sc.get(), &raw));
  AdmissionPtr adm(raw);
  auto read = [](const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Failure{kIo, "cannot open " + path};
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  if (!o.snapshot_in.empty()) check(edca_admission_restore(adm.get(), read(o.snapshot_in).c_str()));
  const std::string events = o.events.empty() ? std::string() : read(o.events);
  char* csv = nullptr;
  check(edca_admission_replay(adm.get(), events.c_str(), &csv));
  const auto log = take(csv);
  s.open("decisions.csv") << log;
  char* snap = nullptr;
  check(edca_admission_snapshot(adm.get(), &snap));
  s.open("snapshot.json") << take(snap) << '\n';
  std::size_t admitted = 0;
  check(edca_admission_count(adm.get(), &admitted));
  std::cout << log << "admitted flows: " << admitted << '\n';
  s.manifest();
  return kOk;
}

int cmd_sim_capacity(const Options& o) {
  Session s("sim-capacity", o);
  if (o.vary.empty()) throw Failure{kConfig, "sim-capacity needs --vary NAME"};
  const auto seeds = parse_seeds(o.seeds);
  const auto points = s.grid(o.vary);
  const auto names = s.grid_names(o.vary);
  auto f = s.open("sim_capacity.csv");
  f << header_prefix(names) << "max_" << o.vary << '\n';
  for (const auto& p : points) {
    auto sc = s.instantiate([&] {
      auto q = p;
      q[o.vary] = o.lo;
      return q;
    }());
    edca_sim_options opt{};
    check(edca_sim_options_from_scenario(sc.get(), &opt));
    int n = 0;
    check(edca_sim_capacity(s.tmpl(), o.vary.c_str(), json(p).dump().c_str(), seeds.data(), seeds.size(), o.loss,
                            o.lo, o.cap, &opt, &n));
    f << point_prefix(names, p) << n << '\n';
    std::printf("%smax %s = %d\n", point_prefix(names, p).c_str(), o.vary.c_str(), n);
  }
  s.manifest(seeds);
  return kOk;
}

int cmd_activity(const Options& o) {
  Session s("activity", o);
  const auto seeds = parse_seeds(o.seeds);
  const auto points = s.grid();
  if (points.size() != 1) throw Failure{kConfig, "activity needs a single scenario point; bind variables with --set"};
  auto sc = s.instantiate(points.front());
  std::size_t n = 0, tagged = 0;
  check(edca_scenario_class_count(sc.get(), &n));
  bool found = false;
  for (std::size_t j = 0; j < n; ++j)
    if (label(sc.get(), j) == o.tc || std::to_string(j) == o.tc) {
      tagged = j;
      found = true;
    }
  if (!found) throw Failure{kConfig, "unknown traffic class " + o.tc};

  edca_capacity* raw = nullptr;
  check(edca_capacity_solve(sc.get(), &raw));
  CapacityPtr cap(raw);
  char* a = nullptr;
  check(edca_capacity_activity_pdf(cap.get(), tagged, &a));
  const auto analytic = json::parse(take(a)).get<std::vector<double>>();
  edca_sim_options opt{};
  check(edca_sim_options_from_scenario(sc.get(), &opt));
  char* e = nullptr;
  check(edca_sim_activity(sc.get(), tagged, seeds.data(), seeds.size(), &opt, &e));
  const auto empirical = json::parse(take(e)).get<std::vector<double>>();

  auto f = s.open("activity.csv");
  f << "active_users,analytic,simulation\n";
  double tv = 0.0;
  for (std::size_t k = 0; k < std::max(analytic.size(), empirical.size()); ++k) {
    const double x = k < analytic.size() ? analytic[k] : 0.0;
    const double y = k < empirical.size() ? empirical[k] : 0.0;
    tv += 0.5 * std::abs(x - y);
    f << k << ',' << num(x) << ',' << num(y) << '\n';
  }
  std::printf("%s: total variation distance %.4f\n", label(sc.get(), tagged).c_str(), tv);
  s.manifest(seeds);
  return kOk;
}

void common_flags(CLI::App* c, Options& o) {
  c->add_option("--scenario", o.scenario, "scenario or template file")->required()->check(CLI::ExistingFile);
  c->add_option("--out", o.out, "output directory")->capture_default_str();
  c->add_option("--set", o.sets, "bind a template variable: NAME=v1,v2,...");
  c->add_option("--tolerance", o.tolerance, "saturation solver tolerance");
  c->add_option("--rho-th", o.rho_th, "admission threshold on rho");
  c->add_option("--access", o.access, "channel access")->check(CLI::IsMember({"basic", "rts"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EDCA saturation, capacity and admission toolkit"};
  app.set_version_flag("--version", std::string(edca_version()));
  app.require_subcommand(1);
  Options o;

  auto* solve = app.add_subcommand("solve", "saturation throughput and service time per traffic class");
  common_flags(solve, o);

  auto* capacity = app.add_subcommand("capacity", "queue utilization, or the largest admissible flow count");
  common_flags(capacity, o);
  capacity->add_option("--vary", o.vary, "template variable holding the flow count");
  capacity->add_option("--lo", o.lo, "smallest flow count")->capture_default_str();
  capacity->add_option("--cap", o.cap, "largest flow count probed")->capture_default_str();

  auto* simulate = app.add_subcommand("simulate", "discrete-event simulation");
  common_flags(simulate, o);
  simulate->add_option("--seeds", o.seeds, "seed list, e.g. 1,2,3 or 1-5")->capture_default_str();
  simulate->add_option("--duration", o.duration, "simulated seconds");
  simulate->add_flag("--packet-trace", o.packet_trace, "write a per-packet CSV per run");

  auto* compare = app.add_subcommand("compare", "saturation model against simulation");
  common_flags(compare, o);
  compare->add_option("--seeds", o.seeds, "seed list")->capture_default_str();
  compare->add_option("--duration", o.duration, "simulated seconds");

  auto* admit = app.add_subcommand("admit", "replay ADDTS/DELTS events through admission control");
  common_flags(admit, o);
  admit->add_option("--events", o.events, "event stream file")->check(CLI::ExistingFile);
  admit->add_option("--snapshot-in", o.snapshot_in, "admitted-flow snapshot to start from")->check(CLI::ExistingFile);

  auto* simcap = app.add_subcommand("sim-capacity", "largest flow count meeting the loss threshold in simulation");
  common_flags(simcap, o);
  simcap->add_option("--vary", o.vary, "template variable holding the flow count")->required();
  simcap->add_option("--seeds", o.seeds, "seed list")->capture_default_str();
  simcap->add_option("--loss", o.loss, "loss ratio threshold")->capture_default_str();
  simcap->add_option("--lo", o.lo, "smallest flow count")->capture_default_str();
  simcap->add_option("--cap", o.cap, "largest flow count probed")->capture_default_str();
  simcap->add_option("--duration", o.duration, "simulated seconds");

  auto* activity = app.add_subcommand("activity", "conditional activity pdf, analytic against simulated");
  common_flags(activity, o);
  activity->add_option("--tc", o.tc, "traffic class label or index")->required();
  activity->add_option("--seeds", o.seeds, "seed list")->capture_default_str();
  activity->add_option("--duration", o.duration, "simulated seconds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfig;
  }

  try {
    if (*solve) return cmd_solve(o);
    if (*capacity) return cmd_capacity(o);
    if (*simulate) return cmd_simulate(o);
    if (*compare) return cmd_compare(o);
    if (*admit) return cmd_admit(o);
    if (*simcap) return cmd_sim_capacity(o);
    if (*activity) return cmd_activity(o);
  } catch (const Failure& f) {
    std::cerr << "edca: " << f.message << '\n';
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "edca: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}
