#include "edca/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "edca/error.hpp"

namespace edca {

using nlohmann::json;

int AcParams::window(int stage) const {
  const int doublings = std::min(std::max(stage - 1, 0), max_doubling);
  const long long w = (static_cast<long long>(cw_min) + 1) << std::min(doublings, 30);
  return static_cast<int>(std::min<long long>(w, static_cast<long long>(cw_max) + 1) - 1);
}

double TrafficDescriptor::packets_per_second() const {
  if (kind == TrafficKind::saturated || packet_bytes <= 0.0) return 0.0;
  return flows * rate_bps / (8.0 * packet_bytes);
}

int Scenario::min_aifsn() const {
  int best = -1;
  for (const auto& ac : acs)
    if (ac && (best < 0 || ac->aifsn < best)) best = ac->aifsn;
  return best;
}

std::array<std::optional<AcParams>, kNumAcs> default_edca_table() {
  std::array<std::optional<AcParams>, kNumAcs> t;
  t[0] = AcParams{7, 31, 1023, 5, 7};
  t[1] = AcParams{3, 31, 1023, 5, 7};
  t[2] = AcParams{2, 15, 31, 1, 7};
  t[3] = AcParams{2, 7, 15, 1, 7};
  return t;
}

std::size_t TrafficClassTable::distinct_activity_count() const {
  std::set<ActivityVector> seen;
  for (const auto& tc : classes) seen.insert(tc.sigma);
  return seen.size();
}

namespace {

void link_classes(TrafficClassTable& table) {
  int min_aifsn = -1;
  for (const auto& tc : table.classes) {
    const int a = table.acs[tc.ac]->aifsn;
    if (min_aifsn < 0 || a < min_aifsn) min_aifsn = a;
  }
  table.min_aifsn = std::max(min_aifsn, 0);
  for (std::size_t j = 0; j < table.classes.size(); ++j) {
    auto& tc = table.classes[j];
    tc.aifs_offset = table.acs[tc.ac]->aifsn - table.min_aifsn;
    tc.siblings.clear();
    for (std::size_t k = 0; k < table.classes.size(); ++k)
      if (table.classes[k].sigma == tc.sigma && table.classes[k].tag == tc.tag)
        tc.siblings.push_back(static_cast<int>(k));
  }
}

bool same_load(const TrafficDescriptor& a, const TrafficDescriptor& b) {
  return a.kind == b.kind && a.rate_bps == b.rate_bps && a.packet_bytes == b.packet_bytes &&
         a.interval_ms == b.interval_ms && a.flows == b.flows && a.trace_path == b.trace_path &&
         a.header_bytes == b.header_bytes;
}

std::string effective_tag(const StationSpec& s) {
  if (!s.class_tag.empty()) return s.class_tag;
  return s.ap ? "ap" : "";
}

}  // namespace

TrafficClassTable TrafficClassTable::reduced(std::span<const int> flows_override, std::vector<int>* kept) const {
  TrafficClassTable out;
  out.acs = acs;
  if (kept) kept->clear();
  for (std::size_t j = 0; j < classes.size(); ++j) {
    if (flows_override[j] < 1) continue;
    auto tc = classes[j];
    tc.flows = flows_override[j];
    out.classes.push_back(std::move(tc));
    if (kept) kept->push_back(static_cast<int>(j));
  }
  link_classes(out);
  return out;
}

TrafficClassTable derive_traffic_classes(std::span<const StationSpec> stations,
                                         const std::array<std::optional<AcParams>, kNumAcs>& acs) {
  if (stations.empty()) throw ConfigError("stations", "station list is empty");

  // (ac, σ, tag) -> TC under construction
  std::map<std::tuple<int, ActivityVector, std::string>, TrafficClass> groups;
  for (std::size_t s = 0; s < stations.size(); ++s) {
    const auto& st = stations[s];
    const std::string where = "stations[" + std::to_string(s) + "]";
    if (std::none_of(st.activity.begin(), st.activity.end(), [](auto v) { return v != 0; }))
      throw ConfigError(where + ".activity", "no active AC");
    if (st.count < 1) throw ConfigError(where + ".count", "must be >= 1");
    const std::string tag = effective_tag(st);
    for (int ac = 0; ac < kNumAcs; ++ac) {
      if (!st.activity[ac]) continue;
      if (!acs[ac]) throw ConfigError(where + ".activity", "AC" + std::to_string(ac) + " has no EDCA parameters");
      if (!st.traffic[ac]) throw ConfigError(where + ".traffic", "missing descriptor for AC" + std::to_string(ac));
      auto key = std::make_tuple(ac, st.activity, tag);
      auto it = groups.find(key);
      if (it == groups.end()) {
        TrafficClass tc;
        tc.ac = ac;
        tc.sigma = st.activity;
        tc.tag = tag;
        tc.flows = st.count;
        tc.traffic = *st.traffic[ac];
        groups.emplace(key, std::move(tc));
      } else {
        if (!same_load(it->second.traffic, *st.traffic[ac]))
          throw ConfigError(where + ".traffic",
                            "stations sharing activity vector and class_tag must carry identical traffic; "
                            "set distinct class_tag values");
        it->second.flows += st.count;
      }
    }
  }

  TrafficClassTable table;
  table.acs = acs;
  for (auto& [key, tc] : groups) table.classes.push_back(std::move(tc));
  link_classes(table);
  return table;
}

std::string tc_label(const TrafficClass& tc) {
  std::string s = "AC" + std::to_string(tc.ac) + "-";
  for (auto b : tc.sigma) s += b ? '1' : '0';
  if (!tc.tag.empty()) s += "-" + tc.tag;
  return s;
}

int class_index_of(const TrafficClassTable& table, const StationSpec& station, int ac) {
  const std::string tag = effective_tag(station);
  for (std::size_t j = 0; j < table.classes.size(); ++j) {
    const auto& tc = table.classes[j];
    if (tc.ac == ac && tc.sigma == station.activity && tc.tag == tag) return static_cast<int>(j);
  }
  return -1;
}

void validate(const Scenario& sc) {
  const auto& p = sc.phy;
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ConfigError(std::string("phy.") + name, "must be strictly positive");
  };
  positive(p.slot_us, "slot_us");
  positive(p.sifs_us, "sifs_us");
  positive(p.data_rate_mbps, "data_rate_mbps");
  positive(p.basic_rate_mbps, "basic_rate_mbps");
  positive(p.ofdm_symbol_us, "ofdm_symbol_us");
  positive(p.preamble_us, "preamble_us");
  positive(p.signal_extension_us + 1.0, "signal_extension_us");
  positive(p.mac_header_bytes, "mac_header_bytes");
  positive(p.ack_bytes, "ack_bytes");
  positive(p.rts_bytes, "rts_bytes");
  positive(p.cts_bytes, "cts_bytes");
  if (p.propagation_us < 0.0) throw ConfigError("phy.propagation_us", "must be non-negative");
  if (p.basic_rate_mbps > p.data_rate_mbps) throw ConfigError("phy.basic_rate_mbps", "exceeds data rate");

  int prev_aifsn = -1;
  for (int i = 0; i < kNumAcs; ++i) {
    if (!sc.acs[i]) continue;
    const auto& a = *sc.acs[i];
    const std::string where = "acs[" + std::to_string(i) + "]";
    if (a.aifsn < 2) throw ConfigError(where + ".aifsn", "must be >= 2");
    if (a.cw_min < 1 || ((a.cw_min + 1) & a.cw_min) != 0)
      throw ConfigError(where + ".cw_min", "must be a power of two minus one");
    if (a.cw_max < a.cw_min)
      throw ConfigError(where + ".cw_max", "AC" + std::to_string(i) + ": cw_min " + std::to_string(a.cw_min) +
                                                " exceeds cw_max " + std::to_string(a.cw_max));
    if (a.max_doubling < 0) throw ConfigError(where + ".m", "must be >= 0");
    if (a.retry_limit < 1) throw ConfigError(where + ".retry_limit", "must be >= 1");
    if (prev_aifsn >= 0 && a.aifsn > prev_aifsn)
      throw ConfigError(where + ".aifsn", "AIFSN must be non-increasing with AC index");
    prev_aifsn = a.aifsn;
  }

  int aps = 0;
  for (std::size_t s = 0; s < sc.stations.size(); ++s) {
    const auto& st = sc.stations[s];
    const std::string where = "stations[" + std::to_string(s) + "]";
    if (st.ap) {
      ++aps;
      if (st.count != 1) throw ConfigError(where + ".count", "the AP entry must have count 1");
    }
    for (int ac = 0; ac < kNumAcs; ++ac) {
      if (!st.traffic[ac]) continue;
      const auto& t = *st.traffic[ac];
      const std::string tw = where + ".traffic.AC" + std::to_string(ac);
      if (!(t.packet_bytes > 0.0)) throw ConfigError(tw + ".packet_bytes", "must be positive");
      if (t.flows < 0) throw ConfigError(tw + ".flows", "must be >= 0");
      if (t.kind != TrafficKind::saturated && !(t.rate_bps > 0.0) && t.flows > 0)
        throw ConfigError(tw + ".rate_bps", "must be positive");
      if (t.kind == TrafficKind::cbr && t.flows > 0) {
        const double bits = t.rate_bps * t.interval_ms * 1e-3;
        if (std::abs(bits - 8.0 * t.packet_bytes) > 1e-6 * 8.0 * t.packet_bytes + 1e-9)
          throw ConfigError(tw, "rate_bps * interval does not equal 8 * packet_bytes");
      }
    }
  }
  if (aps > 1) throw ConfigError("stations", "more than one AP entry");
  if (!sc.stations.empty()) (void)derive_traffic_classes(sc.stations, sc.acs);
}

namespace {

template <typename T>
void read_opt(const json& obj, const char* key, T& out, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path + "." + key, std::string("wrong type: ") + e.what());
  }
}

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const auto& k = it.key();
    if (!k.empty() && k[0] == '_') continue;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
      throw ConfigError(path.empty() ? k : path + "." + k, "unknown key");
  }
}

int ac_from_key(const std::string& key, const std::string& path) {
  static const std::map<std::string, int> names{{"AC0", 0}, {"AC1", 1}, {"AC2", 2}, {"AC3", 3}, {"BK", 0},
                                                {"BE", 1},  {"VI", 2},  {"VO", 3},  {"0", 0},   {"1", 1},
                                                {"2", 2},   {"3", 3}};
  auto it = names.find(key);
  if (it == names.end()) throw ConfigError(path + "." + key, "not an access category");
  return it->second;
}

TrafficDescriptor parse_traffic(const json& j, const std::string& path, const std::string& base_dir) {
  check_keys(j, path,
             {"kind", "rate_bps", "codec_rate_bps", "packet_bytes", "payload_bytes", "header_bytes", "interval_ms", "flows",
              "trace"});
  TrafficDescriptor t;
  std::string kind = "cbr";
  read_opt(j, "kind", kind, path);
  if (kind == "saturated")
    t.kind = TrafficKind::saturated;
  else if (kind == "cbr")
    t.kind = TrafficKind::cbr;
  else if (kind == "trace")
    t.kind = TrafficKind::trace;
  else
    throw ConfigError(path + ".kind", "expected saturated, cbr or trace");

  const bool realtime = t.kind != TrafficKind::saturated;
  t.header_bytes = realtime ? 40 : 0;
  read_opt(j, "header_bytes", t.header_bytes, path);
  read_opt(j, "flows", t.flows, path);
  read_opt(j, "rate_bps", t.rate_bps, path);
  read_opt(j, "interval_ms", t.interval_ms, path);

  double payload = -1.0;
  read_opt(j, "payload_bytes", payload, path);
  read_opt(j, "packet_bytes", t.packet_bytes, path);
  if (j.contains("codec_rate_bps")) {
    // Codec bit rate: one codec frame per interval, header added on top.
    double codec = 0.0;
    read_opt(j, "codec_rate_bps", codec, path);
    if (j.contains("packet_bytes") || j.contains("payload_bytes") || j.contains("rate_bps"))
      throw ConfigError(path, "codec_rate_bps excludes rate_bps, packet_bytes and payload_bytes");
    if (!(t.interval_ms > 0.0)) throw ConfigError(path + ".interval_ms", "required with codec_rate_bps");
    payload = codec * t.interval_ms * 1e-3 / 8.0;
  }
  if (payload >= 0.0) {
    if (j.contains("packet_bytes"))
      throw ConfigError(path, "give either payload_bytes or packet_bytes, not both");
    t.packet_bytes = payload + t.header_bytes;
  }

  if (t.kind == TrafficKind::trace) {
    std::string trace;
    read_opt(j, "trace", trace, path);
    if (trace.empty()) throw ConfigError(path + ".trace", "trace kind requires a trace path");
    std::filesystem::path p(trace);
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    t.trace_path = p.lexically_normal().string();
    const auto [interval, mean_payload] = trace_means(t.trace_path);
    t.interval_ms = interval;
    t.packet_bytes = mean_payload + t.header_bytes;
    t.rate_bps = 8.0 * t.packet_bytes / (interval * 1e-3);
  } else if (t.kind == TrafficKind::cbr) {
    if (t.interval_ms > 0.0 && t.rate_bps <= 0.0 && t.packet_bytes > 0.0)
      t.rate_bps = 8.0 * t.packet_bytes / (t.interval_ms * 1e-3);
    else if (t.interval_ms <= 0.0 && t.rate_bps > 0.0 && t.packet_bytes > 0.0)
      t.interval_ms = 8.0 * t.packet_bytes / t.rate_bps * 1e3;
    if (!(t.interval_ms > 0.0)) throw ConfigError(path, "cbr traffic needs interval_ms or rate_bps");
  }
  if (!(t.packet_bytes > 0.0)) throw ConfigError(path + ".packet_bytes", "must be positive");
  return t;
}

AcParams parse_ac(const json& j, const std::string& path) {
  check_keys(j, path, {"aifsn", "cw_min", "cw_max", "m", "retry_limit"});
  AcParams a;
  a.max_doubling = -1;
  a.cw_max = -1;
  read_opt(j, "aifsn", a.aifsn, path);
  read_opt(j, "cw_min", a.cw_min, path);
  read_opt(j, "cw_max", a.cw_max, path);
  read_opt(j, "m", a.max_doubling, path);
  read_opt(j, "retry_limit", a.retry_limit, path);
  if (a.cw_max < 0 && a.max_doubling < 0) throw ConfigError(path, "give cw_max or m");
  if (a.cw_max < 0) {
    a.cw_max = static_cast<int>(((static_cast<long long>(a.cw_min) + 1) << std::min(a.max_doubling, 20)) - 1);
  } else if (a.max_doubling < 0) {
    // doublings needed to reach cw_max
    a.max_doubling = 0;
    long long w = a.cw_min + 1;
    while (w - 1 < a.cw_max && a.max_doubling < 30) {
      w <<= 1;
      ++a.max_doubling;
    }
  }
  return a;
}

}  // namespace

Scenario load_scenario(const json& doc, const std::string& base_dir) {
  check_keys(doc, "", {"phy", "access", "acs", "stations", "admission", "solver", "utilization", "simulation",
                       "sweep"});
  Scenario sc;
  if (auto it = doc.find("phy"); it != doc.end()) {
    const auto& j = *it;
    check_keys(j, "phy", {"slot_us", "sifs_us", "data_rate_mbps", "basic_rate_mbps", "ofdm_symbol_us",
                          "preamble_us", "signal_extension_us", "mac_header_bytes", "ack_bytes", "rts_bytes",
                          "cts_bytes", "propagation_us"});
    auto& p = sc.phy;
    read_opt(j, "slot_us", p.slot_us, "phy");
    read_opt(j, "sifs_us", p.sifs_us, "phy");
    read_opt(j, "data_rate_mbps", p.data_rate_mbps, "phy");
    read_opt(j, "basic_rate_mbps", p.basic_rate_mbps, "phy");
    read_opt(j, "ofdm_symbol_us", p.ofdm_symbol_us, "phy");
    read_opt(j, "preamble_us", p.preamble_us, "phy");
    read_opt(j, "signal_extension_us", p.signal_extension_us, "phy");
    read_opt(j, "mac_header_bytes", p.mac_header_bytes, "phy");
    read_opt(j, "ack_bytes", p.ack_bytes, "phy");
    read_opt(j, "rts_bytes", p.rts_bytes, "phy");
    read_opt(j, "cts_bytes", p.cts_bytes, "phy");
    read_opt(j, "propagation_us", p.propagation_us, "phy");
  }

  std::string access = "basic";
  read_opt(doc, "access", access, "");
  if (access == "basic")
    sc.access = AccessMode::basic;
  else if (access == "rts_cts" || access == "rts")
    sc.access = AccessMode::rts_cts;
  else
    throw ConfigError("access", "expected basic or rts_cts");

  if (auto it = doc.find("acs"); it != doc.end()) {
    if (!it->is_array() || it->size() != kNumAcs) throw ConfigError("acs", "expected an array of 4 entries");
    for (int i = 0; i < kNumAcs; ++i) {
      const auto& e = (*it)[i];
      if (!e.is_null()) sc.acs[i] = parse_ac(e, "acs[" + std::to_string(i) + "]");
    }
  } else {
    sc.acs = default_edca_table();
  }

  auto st_it = doc.find("stations");
  if (st_it == doc.end() || !st_it->is_array()) throw ConfigError("stations", "required array");
  for (std::size_t s = 0; s < st_it->size(); ++s) {
    const auto& j = (*st_it)[s];
    const std::string path = "stations[" + std::to_string(s) + "]";
    check_keys(j, path, {"name", "ap", "count", "activity", "traffic", "class_tag"});
    StationSpec st;
    read_opt(j, "name", st.name, path);
    read_opt(j, "ap", st.ap, path);
    read_opt(j, "count", st.count, path);
    read_opt(j, "class_tag", st.class_tag, path);
    if (auto tr = j.find("traffic"); tr != j.end()) {
      if (!tr->is_object()) throw ConfigError(path + ".traffic", "expected an object keyed by AC");
      for (auto e = tr->begin(); e != tr->end(); ++e) {
        const int ac = ac_from_key(e.key(), path + ".traffic");
        st.traffic[ac] = parse_traffic(e.value(), path + ".traffic." + e.key(), base_dir);
      }
    }
    if (auto act = j.find("activity"); act != j.end()) {
      if (!act->is_array() || act->size() != kNumAcs) throw ConfigError(path + ".activity", "expected 4 entries");
      for (int i = 0; i < kNumAcs; ++i) {
        const int v = (*act)[i].get<int>();
        if (v != 0 && v != 1) throw ConfigError(path + ".activity", "entries must be 0 or 1");
        st.activity[i] = static_cast<std::uint8_t>(v);
      }
      for (int i = 0; i < kNumAcs; ++i)
        if (!st.activity[i] && st.traffic[i])
          throw ConfigError(path + ".traffic", "traffic given for inactive AC" + std::to_string(i));
    } else {
      for (int i = 0; i < kNumAcs; ++i) st.activity[i] = st.traffic[i] ? 1 : 0;
    }
    // A queue carrying zero streams is idle; drop it from the activity vector.
    for (int i = 0; i < kNumAcs; ++i)
      if (st.traffic[i] && st.traffic[i]->flows == 0) {
        st.traffic[i].reset();
        st.activity[i] = 0;
      }
    if (std::none_of(st.activity.begin(), st.activity.end(), [](auto v) { return v != 0; })) continue;
    if (st.count == 0) continue;
    sc.stations.push_back(std::move(st));
  }

  if (auto it = doc.find("admission"); it != doc.end()) {
    check_keys(*it, "admission", {"rho_threshold", "weight_truncation_epsilon"});
    read_opt(*it, "rho_threshold", sc.admission.rho_threshold, "admission");
    read_opt(*it, "weight_truncation_epsilon", sc.admission.weight_truncation_epsilon, "admission");
    if (!(sc.admission.rho_threshold > 0.0 && sc.admission.rho_threshold <= 1.0))
      throw ConfigError("admission.rho_threshold", "must lie in (0, 1]");
    if (!(sc.admission.weight_truncation_epsilon > 0.0 && sc.admission.weight_truncation_epsilon < 1.0))
      throw ConfigError("admission.weight_truncation_epsilon", "must lie in (0, 1)");
  }
  if (auto it = doc.find("solver"); it != doc.end()) {
    check_keys(*it, "solver", {"tolerance", "max_iterations", "damping"});
    read_opt(*it, "tolerance", sc.solver.tolerance, "solver");
    read_opt(*it, "max_iterations", sc.solver.max_iterations, "solver");
    read_opt(*it, "damping", sc.solver.damping, "solver");
    if (!(sc.solver.damping > 0.0 && sc.solver.damping <= 1.0))
      throw ConfigError("solver.damping", "must lie in (0, 1]");
  }
  if (auto it = doc.find("utilization"); it != doc.end()) {
    check_keys(*it, "utilization", {"tolerance", "max_iterations", "damping"});
    read_opt(*it, "tolerance", sc.utilization.tolerance, "utilization");
    read_opt(*it, "max_iterations", sc.utilization.max_iterations, "utilization");
    read_opt(*it, "damping", sc.utilization.damping, "utilization");
  }
  if (auto it = doc.find("simulation"); it != doc.end()) {
    check_keys(*it, "simulation", {"duration_s", "warmup_s", "buffer_packets", "deadline_ms", "wired_delay_ms"});
    read_opt(*it, "duration_s", sc.simulation.duration_s, "simulation");
    read_opt(*it, "warmup_s", sc.simulation.warmup_s, "simulation");
    read_opt(*it, "buffer_packets", sc.simulation.buffer_packets, "simulation");
    read_opt(*it, "deadline_ms", sc.simulation.deadline_ms, "simulation");
    read_opt(*it, "wired_delay_ms", sc.simulation.wired_delay_ms, "simulation");
  }

  validate(sc);
  return sc;
}

Scenario load_scenario_text(const std::string& text, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed document: ") + e.what());
  }
  return load_scenario(doc, base_dir);
}

namespace {
std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}
}  // namespace

Scenario load_scenario_file(const std::string& path) {
  return ScenarioTemplate::from_file(path).instantiate({});
}

json to_json(const Scenario& sc) {
  json doc;
  const auto& p = sc.phy;
  doc["phy"] = {{"slot_us", p.slot_us},
                {"sifs_us", p.sifs_us},
                {"data_rate_mbps", p.data_rate_mbps},
                {"basic_rate_mbps", p.basic_rate_mbps},
                {"ofdm_symbol_us", p.ofdm_symbol_us},
                {"preamble_us", p.preamble_us},
                {"signal_extension_us", p.signal_extension_us},
                {"mac_header_bytes", p.mac_header_bytes},
                {"ack_bytes", p.ack_bytes},
                {"rts_bytes", p.rts_bytes},
                {"cts_bytes", p.cts_bytes},
                {"propagation_us", p.propagation_us}};
  doc["access"] = sc.access == AccessMode::basic ? "basic" : "rts_cts";
  json acs = json::array();
  for (const auto& a : sc.acs) {
    if (!a) {
      acs.push_back(nullptr);
      continue;
    }
    acs.push_back({{"aifsn", a->aifsn},
                   {"cw_min", a->cw_min},
                   {"cw_max", a->cw_max},
                   {"m", a->max_doubling},
                   {"retry_limit", a->retry_limit}});
  }
  doc["acs"] = acs;
  json stations = json::array();
  for (const auto& st : sc.stations) {
    json s;
    s["name"] = st.name;
    if (st.ap) s["ap"] = true;
    s["count"] = st.count;
    s["activity"] = json::array();
    for (auto v : st.activity) s["activity"].push_back(static_cast<int>(v));
    if (!st.class_tag.empty()) s["class_tag"] = st.class_tag;
    json tr = json::object();
    for (int ac = 0; ac < kNumAcs; ++ac) {
      if (!st.traffic[ac]) continue;
      const auto& t = *st.traffic[ac];
      json tj;
      tj["header_bytes"] = t.header_bytes;
      tj["flows"] = t.flows;
      switch (t.kind) {
        case TrafficKind::saturated:
          tj["kind"] = "saturated";
          tj["packet_bytes"] = t.packet_bytes;
          break;
        case TrafficKind::cbr:
          tj["kind"] = "cbr";
          tj["packet_bytes"] = t.packet_bytes;
          tj["interval_ms"] = t.interval_ms;
          tj["rate_bps"] = t.rate_bps;
          break;
        case TrafficKind::trace:
          tj["kind"] = "trace";
          tj["trace"] = t.trace_path;
          break;
      }
      tr["AC" + std::to_string(ac)] = tj;
    }
    s["traffic"] = tr;
    stations.push_back(s);
  }
  doc["stations"] = stations;
  doc["admission"] = {{"rho_threshold", sc.admission.rho_threshold},
                      {"weight_truncation_epsilon", sc.admission.weight_truncation_epsilon}};
  doc["solver"] = {{"tolerance", sc.solver.tolerance},
                   {"max_iterations", sc.solver.max_iterations},
                   {"damping", sc.solver.damping}};
  doc["utilization"] = {{"tolerance", sc.utilization.tolerance},
                        {"max_iterations", sc.utilization.max_iterations},
                        {"damping", sc.utilization.damping}};
  doc["simulation"] = {{"duration_s", sc.simulation.duration_s},
                       {"warmup_s", sc.simulation.warmup_s},
                       {"buffer_packets", sc.simulation.buffer_packets},
                       {"deadline_ms", sc.simulation.deadline_ms},
                       {"wired_delay_ms", sc.simulation.wired_delay_ms}};
  return doc;
}

std::pair<double, double> trace_means(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace " + path);
  std::string line;
  int lineno = 0;
  double sum_interval = 0.0, sum_bytes = 0.0;
  long n = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    double interval = 0.0, bytes = 0.0;
    if (!(ls >> interval >> bytes) || interval <= 0.0 || bytes <= 0.0)
      throw ParseError(lineno, "expected '<frame_interval_ms> <payload_bytes>' in " + path);
    sum_interval += interval;
    sum_bytes += bytes;
    ++n;
  }
  if (n == 0) throw IoError("trace " + path + " has no frames");
  return {sum_interval / n, sum_bytes / n};
}

namespace {

std::optional<std::string> placeholder(const json& v) {
  if (!v.is_string()) return std::nullopt;
  const auto& s = v.get_ref<const std::string&>();
  if (s.size() > 3 && s.starts_with("${") && s.back() == '}') return s.substr(2, s.size() - 3);
  return std::nullopt;
}

// Placeholder bodies are a name or a small expression over names and numbers
// with + - * (e.g. "10 - K").
struct Expr {
  struct Token {
    char op = 0;  // 0 for operands
    std::string name;
    double value = 0.0;
  };
  std::vector<Token> tokens;

  explicit Expr(const std::string& text) {
    std::size_t i = 0;
    while (i < text.size()) {
      const char c = text[i];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++i;
      } else if (c == '+' || c == '-' || c == '*') {
        tokens.push_back({c, {}, 0.0});
        ++i;
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        std::size_t used = 0;
        const double x = std::stod(text.substr(i), &used);
        tokens.push_back({0, {}, x});
        i += used;
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t j = i;
        while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_')) ++j;
        tokens.push_back({0, text.substr(i, j - i), 0.0});
        i = j;
      } else {
        throw ConfigError("", "bad template expression ${" + text + "}");
      }
    }
    bool want_operand = true;
    for (const auto& t : tokens) {
      if ((t.op == 0) != want_operand) throw ConfigError("", "bad template expression ${" + text + "}");
      want_operand = !want_operand;
    }
    if (tokens.empty() || want_operand) throw ConfigError("", "bad template expression ${" + text + "}");
  }

  double eval(const std::map<std::string, double>& bindings) const {
    auto operand = [&](const Token& t) {
      if (t.name.empty()) return t.value;
      auto it = bindings.find(t.name);
      if (it == bindings.end()) throw ConfigError("", "unbound template variable ${" + t.name + "}");
      return it->second;
    };
    double sum = 0.0, term = operand(tokens[0]);
    char sign = '+';
    for (std::size_t k = 1; k < tokens.size(); k += 2) {
      const double x = operand(tokens[k + 1]);
      if (tokens[k].op == '*') {
        term *= x;
      } else {
        sum += sign == '+' ? term : -term;
        sign = tokens[k].op;
        term = x;
      }
    }
    return sum + (sign == '+' ? term : -term);
  }
};

void collect_vars(const json& v, std::set<std::string>& out) {
  if (auto body = placeholder(v)) {
    for (const auto& t : Expr(*body).tokens)
      if (t.op == 0 && !t.name.empty()) out.insert(t.name);
  } else if (v.is_structured()) {
    for (const auto& e : v) collect_vars(e, out);
  }
}

void substitute(json& v, const std::map<std::string, double>& bindings) {
  if (auto body = placeholder(v)) {
    const double x = Expr(*body).eval(bindings);
    if (x == std::floor(x) && std::abs(x) < 1e15)
      v = static_cast<long long>(x);
    else
      v = x;
  } else if (v.is_structured()) {
    for (auto& e : v) substitute(e, bindings);
  }
}

}  // namespace

ScenarioTemplate ScenarioTemplate::from_text(const std::string& text, const std::string& base_dir) {
  ScenarioTemplate t;
  try {
    t.doc_ = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed document: ") + e.what());
  }
  if (!t.doc_.is_object()) throw ConfigError("", "top level must be an object");
  t.base_dir_ = base_dir;
  if (auto it = t.doc_.find("sweep"); it != t.doc_.end()) {
    if (!it->is_object()) throw ConfigError("sweep", "expected an object of value lists");
    for (auto e = it->begin(); e != it->end(); ++e) {
      if (!e->is_array()) throw ConfigError("sweep." + e.key(), "expected an array");
      auto& vals = t.sweep_[e.key()];
      for (const auto& x : *e) {
        if (!x.is_number()) throw ConfigError("sweep." + e.key(), "values must be numbers");
        vals.push_back(x.get<double>());
      }
    }
  }
  return t;
}

ScenarioTemplate ScenarioTemplate::from_file(const std::string& path) {
  const auto dir = std::filesystem::path(path).parent_path().string();
  return from_text(read_file(path), dir);
}

std::vector<std::string> ScenarioTemplate::variables() const {
  std::set<std::string> names;
  json body = doc_;
  body.erase("sweep");
  collect_vars(body, names);
  return {names.begin(), names.end()};
}

json ScenarioTemplate::bind(const std::map<std::string, double>& bindings) const {
  json body = doc_;
  body.erase("sweep");
  const auto known = variables();
  for (const auto& [name, v] : bindings)
    if (std::find(known.begin(), known.end(), name) == known.end())
      throw ConfigError(name, "not a template variable");
  std::map<std::string, double> full = bindings;
  // An unbound variable takes the first value of its sweep list.
  for (const auto& [name, vals] : sweep_)
    if (!full.count(name) && !vals.empty()) full[name] = vals.front();
  substitute(body, full);
  return body;
}

void ScenarioTemplate::patch(const json& merge_patch) {
  if (merge_patch.contains("sweep")) throw ConfigError("sweep", "cannot be patched");
  doc_.merge_patch(merge_patch);
}

Scenario ScenarioTemplate::instantiate(const std::map<std::string, double>& bindings) const {
  return load_scenario(bind(bindings), base_dir_);
}

}  // namespace edca
