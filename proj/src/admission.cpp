#include "edca/admission.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>

#include "edca/error.hpp"

namespace edca {

int ac_for_user_priority(int up) {
  switch (up) {
    case 1:
    case 2:
      return 0;
    case 0:
    case 3:
      return 1;
    case 4:
    case 5:
      return 2;
    case 6:
    case 7:
      return 3;
    default:
      return -1;
  }
}

std::string Decision::verdict_text() const {
  switch (verdict) {
    case Verdict::admit:
      return "admit";
    case Verdict::removed:
      return "removed";
    case Verdict::reject:
      return "reject(" + reason + ")";
    case Verdict::error:
      return "error(" + reason + ")";
  }
  return "error";
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Load {
  double rate_bps = 0.0;
  double packets_per_s = 0.0;
  bool present() const { return packets_per_s > 0.0; }
  void add(double rate, double pps) {
    rate_bps += rate;
    packets_per_s += pps;
  }
};

using AcLoads = std::array<Load, kNumAcs>;

TrafficDescriptor cbr_descriptor(const Load& l) {
  TrafficDescriptor t;
  t.kind = TrafficKind::cbr;
  t.rate_bps = l.rate_bps;
  t.packet_bytes = l.rate_bps / (8.0 * l.packets_per_s);
  t.interval_ms = 1e3 / l.packets_per_s;
  t.flows = 1;
  return t;
}

std::string load_signature(const AcLoads& loads) {
  std::ostringstream s;
  s.precision(10);
  bool first = true;
  for (int ac = kNumAcs - 1; ac >= 0; --ac) {
    if (!loads[ac].present()) continue;
    if (!first) s << '+';
    first = false;
    s << ac << ':' << loads[ac].rate_bps << '/' << loads[ac].rate_bps / (8.0 * loads[ac].packets_per_s);
  }
  return s.str();
}

Decision rejected(const std::string& tsid, std::string reason) {
  Decision d;
  d.tsid = tsid;
  d.verdict = Verdict::reject;
  d.reason = std::move(reason);
  d.max_rho = kNaN;
  return d;
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  return s;
}

bool parse_number(const std::string& tok, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(tok, &used);
    return used == tok.size() && std::isfinite(out);
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_int(const std::string& tok, int& out) {
  try {
    std::size_t used = 0;
    out = std::stoi(tok, &used);
    return used == tok.size();
  } catch (const std::exception&) {
    return false;
  }
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

}  // namespace

AdmissionController::AdmissionController(Scenario base) : base_(std::move(base)) {
  const double th = base_.admission.rho_threshold;
  if (!(th > 0.0 && th <= 1.0)) throw ConfigError("admission.rho_threshold", "must lie in (0, 1]");
}

Scenario AdmissionController::candidate(const std::vector<Tspec>& flows) const {
  Scenario sc = base_;
  std::map<std::string, AcLoads> uplink;
  AcLoads downlink{};
  for (const auto& t : flows) {
    const int ac = ac_for_user_priority(t.up);
    if (ac < 0) throw ConfigError("tspec " + t.tsid, "unmapped UP");
    if (t.direction == Direction::uplink)
      uplink[t.station][ac].add(t.mean_rate_bps, t.packets_per_second());
    else
      downlink[ac].add(t.mean_rate_bps, t.packets_per_second());
  }

  // Stations with identical per-AC load collapse into one entry.
  std::map<std::string, StationSpec> merged;
  for (const auto& [name, loads] : uplink) {
    const auto sig = load_signature(loads);
    auto it = merged.find(sig);
    if (it != merged.end()) {
      ++it->second.count;
      continue;
    }
    StationSpec st;
    st.name = name;
    st.class_tag = sig;
    for (int ac = 0; ac < kNumAcs; ++ac) {
      if (!loads[ac].present()) continue;
      st.activity[ac] = 1;
      st.traffic[ac] = cbr_descriptor(loads[ac]);
    }
    merged.emplace(sig, std::move(st));
  }
  for (auto& [sig, st] : merged) sc.stations.push_back(std::move(st));

  if (std::any_of(downlink.begin(), downlink.end(), [](const Load& l) { return l.present(); })) {
    auto ap = std::find_if(sc.stations.begin(), sc.stations.end(), [](const StationSpec& s) { return s.ap; });
    if (ap == sc.stations.end()) {
      StationSpec st;
      st.name = "ap";
      st.ap = true;
      sc.stations.push_back(std::move(st));
      ap = std::prev(sc.stations.end());
    }
    for (int ac = 0; ac < kNumAcs; ++ac) {
      if (!downlink[ac].present()) continue;
      auto& slot = ap->traffic[ac];
      if (ap->activity[ac] && slot) {
        if (slot->kind != TrafficKind::cbr)
          throw ConfigError("stations.ap", "downlink flows cannot share AC" + std::to_string(ac) +
                                               " with non-CBR background traffic");
        Load l;
        l.add(slot->rate_bps * slot->flows, slot->packets_per_second());
        l.add(downlink[ac].rate_bps, downlink[ac].packets_per_s);
        slot = cbr_descriptor(l);
      } else {
        ap->activity[ac] = 1;
        slot = cbr_descriptor(downlink[ac]);
      }
    }
  }
  validate(sc);
  return sc;
}

Decision AdmissionController::evaluate(const std::vector<Tspec>& flows, const std::string& tsid,
                                       CapacitySolution* out) const {
  try {
    const Scenario sc = candidate(flows);
    const auto table = derive_traffic_classes(sc.stations, sc.acs);
    CapacityModel model{table, sc.phy, sc.access, sc.solver, sc.utilization,
                        sc.admission.weight_truncation_epsilon, &cache_};
    auto sol = solve_utilization(model);
    Decision d;
    d.tsid = tsid;
    for (const auto& c : sol.classes) d.rho.push_back(c.rho);
    d.max_rho = sol.max_realtime_rho();
    const int b = sol.binding_class();
    if (b >= 0) d.binding_tc = tc_label(table[b]);
    if (d.max_rho <= sc.admission.rho_threshold) {
      d.verdict = Verdict::admit;
    } else {
      d.verdict = Verdict::reject;
      std::ostringstream r;
      r << "rho " << d.max_rho << " exceeds threshold " << sc.admission.rho_threshold;
      d.reason = r.str();
    }
    if (out) *out = std::move(sol);
    return d;
  } catch (const ConvergenceError& e) {
    return rejected(tsid, std::string("model did not converge: ") + e.what());
  } catch (const ConfigError& e) {
    return rejected(tsid, e.what());
  }
}

Decision AdmissionController::addts(const Tspec& t) {
  std::unique_lock lock(mutex_);
  if (t.tsid.empty()) return rejected(t.tsid, "invalid tspec: empty TSID");
  if (std::any_of(admitted_.begin(), admitted_.end(), [&](const Tspec& a) { return a.tsid == t.tsid; }))
    return rejected(t.tsid, "duplicate TSID");
  const int ac = ac_for_user_priority(t.up);
  if (ac < 0 || !base_.acs[ac]) return rejected(t.tsid, "unmapped UP");
  if (!(t.mean_rate_bps > 0.0) || !(t.mean_packet_bytes > 0.0))
    return rejected(t.tsid, "invalid tspec: R and L must be positive");
  if (t.direction == Direction::uplink && t.station.empty())
    return rejected(t.tsid, "invalid tspec: uplink flow without station");

  auto flows = admitted_;
  flows.push_back(t);
  CapacitySolution sol;
  auto d = evaluate(flows, t.tsid, &sol);
  if (d.verdict == Verdict::admit) {
    admitted_ = std::move(flows);
    last_ = std::move(sol);
  }
  return d;
}

Decision AdmissionController::delts(const std::string& tsid) {
  std::unique_lock lock(mutex_);
  auto it = std::find_if(admitted_.begin(), admitted_.end(), [&](const Tspec& a) { return a.tsid == tsid; });
  Decision d;
  d.tsid = tsid;
  d.max_rho = kNaN;
  if (it == admitted_.end()) {
    d.verdict = Verdict::error;
    d.reason = "unknown TSID";
    return d;
  }
  admitted_.erase(it);
  last_.reset();
  d.verdict = Verdict::removed;
  return d;
}

std::vector<Tspec> AdmissionController::admitted() const {
  std::shared_lock lock(mutex_);
  return admitted_;
}

std::optional<CapacitySolution> AdmissionController::last_solution() const {
  std::shared_lock lock(mutex_);
  return last_;
}

nlohmann::json AdmissionController::snapshot() const {
  std::shared_lock lock(mutex_);
  nlohmann::json j;
  j["rho_threshold"] = base_.admission.rho_threshold;
  j["admitted"] = nlohmann::json::array();
  for (const auto& t : admitted_) j["admitted"].push_back(to_json(t));
  return j;
}

void AdmissionController::restore(const nlohmann::json& snap) {
  if (!snap.is_object() || !snap.contains("admitted") || !snap["admitted"].is_array())
    throw ConfigError("admitted", "snapshot must hold an `admitted` array");
  std::vector<Tspec> flows;
  for (const auto& j : snap["admitted"]) {
    auto t = tspec_from_json(j);
    if (std::any_of(flows.begin(), flows.end(), [&](const Tspec& a) { return a.tsid == t.tsid; }))
      throw ConfigError("admitted", "duplicate TSID " + t.tsid);
    flows.push_back(std::move(t));
  }
  std::unique_lock lock(mutex_);
  admitted_ = std::move(flows);
  last_.reset();
  if (admitted_.empty()) return;
  CapacitySolution sol;
  if (evaluate(admitted_, "", &sol).verdict == Verdict::admit) last_ = std::move(sol);
}

nlohmann::json to_json(const Tspec& t) {
  return {{"tsid", t.tsid},
          {"up", t.up},
          {"direction", t.direction == Direction::uplink ? "uplink" : "downlink"},
          {"station", t.station},
          {"mean_rate_bps", t.mean_rate_bps},
          {"mean_packet_bytes", t.mean_packet_bytes}};
}

Tspec tspec_from_json(const nlohmann::json& j) {
  try {
    Tspec t;
    t.tsid = j.at("tsid").get<std::string>();
    t.up = j.at("up").get<int>();
    const auto dir = j.at("direction").get<std::string>();
    if (dir == "uplink")
      t.direction = Direction::uplink;
    else if (dir == "downlink")
      t.direction = Direction::downlink;
    else
      throw ConfigError("direction", "expected uplink or downlink");
    t.station = j.value("station", std::string{});
    t.mean_rate_bps = j.at("mean_rate_bps").get<double>();
    t.mean_packet_bytes = j.at("mean_packet_bytes").get<double>();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("admitted", e.what());
  }
}

std::vector<AdmissionEvent> parse_events(std::istream& in) {
  std::vector<AdmissionEvent> events;
  std::string line;
  int lineno = 0;
  double last_time = -std::numeric_limits<double>::infinity();
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string w; ls >> w;) tok.push_back(w);
    if (tok.empty()) continue;

    AdmissionEvent ev;
    ev.line = lineno;
    std::size_t i = 0;
    double t = 0.0;
    if (parse_number(tok[0], t)) {
      ev.time = t;
      ++i;
      if (t < last_time) throw ParseError(lineno, "timestamps must not decrease");
      last_time = t;
    } else if (last_time > -std::numeric_limits<double>::infinity()) {
      ev.time = last_time;
    }
    if (i >= tok.size()) throw ParseError(lineno, "missing record type");
    const auto kind = upper(tok[i++]);
    const std::size_t rest = tok.size() - i;
    if (kind == "DELTS") {
      if (rest != 1) throw ParseError(lineno, "DELTS expects exactly one field: tsid");
      ev.add = false;
      ev.tspec.tsid = tok[i];
    } else if (kind == "ADDTS") {
      if (rest != 6) throw ParseError(lineno, "ADDTS expects 6 fields: tsid up dir station R L");
      auto& ts = ev.tspec;
      ts.tsid = tok[i];
      if (!parse_int(tok[i + 1], ts.up)) throw ParseError(lineno, "user priority is not an integer: " + tok[i + 1]);
      const auto dir = upper(tok[i + 2]);
      if (dir == "UPLINK" || dir == "UP" || dir == "UL")
        ts.direction = Direction::uplink;
      else if (dir == "DOWNLINK" || dir == "DOWN" || dir == "DL")
        ts.direction = Direction::downlink;
      else
        throw ParseError(lineno, "direction must be uplink or downlink: " + tok[i + 2]);
      ts.station = tok[i + 3];
      if (!parse_number(tok[i + 4], ts.mean_rate_bps)) throw ParseError(lineno, "bad mean rate: " + tok[i + 4]);
      if (!parse_number(tok[i + 5], ts.mean_packet_bytes)) throw ParseError(lineno, "bad packet size: " + tok[i + 5]);
    } else {
      throw ParseError(lineno, "unknown record type " + tok[i - 1]);
    }
    events.push_back(std::move(ev));
  }
  return events;
}

std::vector<Decision> replay(AdmissionController& controller, const std::vector<AdmissionEvent>& events) {
  std::vector<Decision> log;
  log.reserve(events.size());
  for (const auto& ev : events) log.push_back(ev.add ? controller.addts(ev.tspec) : controller.delts(ev.tspec.tsid));
  return log;
}

void write_decision_log(std::ostream& out, const std::vector<Decision>& log) {
  out << "tsid,decision,max_rho,binding_tc\n";
  for (const auto& d : log) {
    out << csv_field(d.tsid) << ',' << csv_field(d.verdict_text()) << ',';
    if (std::isfinite(d.max_rho)) {
      std::ostringstream r;
      r.precision(9);
      r << d.max_rho;
      out << r.str();
    }
    out << ',' << csv_field(d.binding_tc) << '\n';
  }
}

}  // namespace edca
