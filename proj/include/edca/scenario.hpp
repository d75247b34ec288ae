#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace edca {

inline constexpr int kNumAcs = 4;

// AC_i active flags, index i = AC index (3 is the highest priority).
using ActivityVector = std::array<std::uint8_t, kNumAcs>;

enum class AccessMode { basic, rts_cts };

// ERP-OFDM (802.11g) defaults. Durations in microseconds, rates in Mb/s.
struct PhyParams {
  double slot_us = 9.0;
  double sifs_us = 10.0;
  double data_rate_mbps = 54.0;
  double basic_rate_mbps = 6.0;
  double ofdm_symbol_us = 4.0;
  double preamble_us = 20.0;  // PLCP preamble + SIGNAL
  double signal_extension_us = 6.0;
  int mac_header_bytes = 30;  // QoS data header + FCS
  int ack_bytes = 14;
  int rts_bytes = 20;
  int cts_bytes = 14;
  double propagation_us = 1.0;
};

struct AcParams {
  int aifsn = 2;
  int cw_min = 15;
  int cw_max = 1023;
  int max_doubling = 10;  // m
  int retry_limit = 7;    // r: attempts before the frame is discarded

  // Contention window of backoff stage k (1-based): doubles per failure,
  // capped by both m and cw_max.
  int window(int stage) const;
};

enum class TrafficKind { saturated, cbr, trace };

// Per-(station, AC) offered load. `packet_bytes` and `rate_bps` are MSDU-level
// (codec payload plus RTP/UDP/IP header) and describe one stream; `flows`
// streams are multiplexed onto the same queue (AP downlink aggregation).
struct TrafficDescriptor {
  TrafficKind kind = TrafficKind::saturated;
  double rate_bps = 0.0;
  double packet_bytes = 0.0;
  double interval_ms = 0.0;
  int header_bytes = 0;  // already included in packet_bytes; traces add it per frame
  int flows = 1;
  std::string trace_path;

  // λ in packets per second for the aggregate of all streams; 0 if saturated.
  double packets_per_second() const;
  bool saturated() const { return kind == TrafficKind::saturated; }
};

struct StationSpec {
  std::string name;
  bool ap = false;
  int count = 1;
  ActivityVector activity{};
  std::array<std::optional<TrafficDescriptor>, kNumAcs> traffic;
  std::string class_tag;
};

struct SolverConfig {
  double tolerance = 1e-9;
  int max_iterations = 10000;
  double damping = 0.5;
};

struct UtilizationConfig {
  double tolerance = 1e-6;
  int max_iterations = 1000;
  double damping = 0.5;
};

struct AdmissionConfig {
  double rho_threshold = 1.0;
  double weight_truncation_epsilon = 1e-6;
};

struct SimulationConfig {
  double duration_s = 100.0;
  double warmup_s = 5.0;
  int buffer_packets = 100;
  double deadline_ms = 150.0;
  double wired_delay_ms = 20.0;
};

struct Scenario {
  PhyParams phy;
  AccessMode access = AccessMode::basic;
  std::array<std::optional<AcParams>, kNumAcs> acs;
  std::vector<StationSpec> stations;
  AdmissionConfig admission;
  SolverConfig solver;
  UtilizationConfig utilization;
  SimulationConfig simulation;

  int min_aifsn() const;
};

// 802.11e default EDCA parameter set (AC0..AC3), retry limit 7.
std::array<std::optional<AcParams>, kNumAcs> default_edca_table();

struct TrafficClass {
  int ac = 0;               // F(j)
  ActivityVector sigma{};   // σ_j
  std::string tag;          // distinguishes equal σ with different loads
  int aifs_offset = 0;      // d_j
  int flows = 0;            // f_j
  std::vector<int> siblings;  // G(j), includes j
  TrafficDescriptor traffic;
};

// The TC universe. Ordering is deterministic: ascending AC index, then
// lexicographic σ, then tag.
struct TrafficClassTable {
  std::vector<TrafficClass> classes;
  std::array<std::optional<AcParams>, kNumAcs> acs;
  int min_aifsn = 0;

  std::size_t size() const { return classes.size(); }
  const TrafficClass& operator[](std::size_t j) const { return classes[j]; }
  const AcParams& ac_params(std::size_t j) const { return *acs[classes[j].ac]; }

  // Number of distinct activity vectors, N(ζ).
  std::size_t distinct_activity_count() const;

  // Copy keeping only TCs with flows_override[j] >= 1, flow counts replaced.
  // `kept` receives the original index of each surviving TC.
  TrafficClassTable reduced(std::span<const int> flows_override, std::vector<int>* kept = nullptr) const;
};

TrafficClassTable derive_traffic_classes(std::span<const StationSpec> stations,
                                         const std::array<std::optional<AcParams>, kNumAcs>& acs);

// Short printable TC name, e.g. "AC3-0001-ap" (AC, activity bits AC0..AC3, tag).
std::string tc_label(const TrafficClass& tc);

// Index of the TC that (station, ac) belongs to in `table`, or -1.
int class_index_of(const TrafficClassTable& table, const StationSpec& station, int ac);

void validate(const Scenario& scenario);

// Parsing accepts // and /* */ comments. Relative trace paths are resolved
// against `base_dir`.
Scenario load_scenario(const nlohmann::json& doc, const std::string& base_dir = {});
Scenario load_scenario_text(const std::string& text, const std::string& base_dir = {});
Scenario load_scenario_file(const std::string& path);
nlohmann::json to_json(const Scenario& scenario);

// Reads `frame_interval_ms payload_bytes` lines. Returns (mean interval ms,
// mean payload bytes).
std::pair<double, double> trace_means(const std::string& path);

// A scenario document whose string values of the form "${NAME}" (or a small
// expression such as "${10 - K}") are bound
// per instantiation. An optional top-level `sweep` object lists default
// values for each variable.
class ScenarioTemplate {
public:
  static ScenarioTemplate from_text(const std::string& text, const std::string& base_dir = {});
  static ScenarioTemplate from_file(const std::string& path);

  std::vector<std::string> variables() const;
  const std::map<std::string, std::vector<double>>& sweep() const { return sweep_; }
  Scenario instantiate(const std::map<std::string, double>& bindings) const;
  nlohmann::json bind(const std::map<std::string, double>& bindings) const;
  const std::string& base_dir() const { return base_dir_; }
  // JSON merge patch on the document body (the sweep table is kept).
  void patch(const nlohmann::json& merge_patch);

private:
  nlohmann::json doc_;
  std::string base_dir_;
  std::map<std::string, std::vector<double>> sweep_;
};

}  // namespace edca
