#pragma once

#include <iosfwd>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "edca/capacity.hpp"
#include "edca/scenario.hpp"

namespace edca {

enum class Direction { uplink, downlink };

struct Tspec {
  std::string tsid;
  int up = 6;
  Direction direction = Direction::uplink;
  std::string station;
  double mean_rate_bps = 0.0;     // R, MSDU level
  double mean_packet_bytes = 0.0; // L, MSDU level

  double packets_per_second() const { return mean_rate_bps / (8.0 * mean_packet_bytes); }
};

// 802.1D user priority to AC index; -1 outside 0..7.
int ac_for_user_priority(int up);

enum class Verdict { admit, reject, removed, error };

struct Decision {
  std::string tsid;
  Verdict verdict = Verdict::reject;
  std::string reason;
  double max_rho = 0.0;  // NaN when the model was not evaluated
  std::string binding_tc;
  std::vector<double> rho;  // per TC of the candidate table

  // "admit", "removed", "reject(reason)" or "error(reason)".
  std::string verdict_text() const;
};

// Admitted-flow table and ADDTS/DELTS decisions. `base` supplies PHY, EDCA
// parameters, the admission threshold and any background stations (which may
// include the AP with its own queues); admitted flows are layered on top.
class AdmissionController {
public:
  explicit AdmissionController(Scenario base);

  Decision addts(const Tspec& tspec);
  Decision delts(const std::string& tsid);

  std::vector<Tspec> admitted() const;
  std::optional<CapacitySolution> last_solution() const;
  double rho_threshold() const { return base_.admission.rho_threshold; }

  // Base scenario plus `flows`: uplink flows aggregate per (station, AC),
  // downlink flows per AC on the AP, and stations with equal load merge.
  Scenario candidate(const std::vector<Tspec>& flows) const;

  nlohmann::json snapshot() const;
  // Rebuilds the admitted set without re-testing it.
  void restore(const nlohmann::json& snapshot);

  ServiceTimeCache& cache() { return cache_; }

private:
  Decision evaluate(const std::vector<Tspec>& flows, const std::string& tsid, CapacitySolution* out) const;

  Scenario base_;
  std::vector<Tspec> admitted_;
  std::optional<CapacitySolution> last_;
  mutable ServiceTimeCache cache_;
  mutable std::shared_mutex mutex_;
};

// Event stream: one record per line, `[time] ADDTS tsid up dir station R L`
// or `[time] DELTS tsid`. Blank lines and '#' comments are skipped. Throws
// ParseError naming the line of a malformed record.
struct AdmissionEvent {
  int line = 0;
  double time = 0.0;
  bool add = true;
  Tspec tspec;  // only tsid is set for DELTS
};
std::vector<AdmissionEvent> parse_events(std::istream& in);

std::vector<Decision> replay(AdmissionController& controller, const std::vector<AdmissionEvent>& events);

// CSV with header `tsid,decision,max_rho,binding_tc`.
void write_decision_log(std::ostream& out, const std::vector<Decision>& log);

nlohmann::json to_json(const Tspec& t);
Tspec tspec_from_json(const nlohmann::json& j);

}  // namespace edca
