#ifndef EDCA_EDCA_H
#define EDCA_EDCA_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define EDCA_API __declspec(dllexport)
#else
#define EDCA_API __attribute__((visibility("default")))
#endif

typedef enum edca_status {
  EDCA_OK = 0,
  EDCA_ERR_CONFIG = 1,
  EDCA_ERR_CONVERGENCE = 2,
  EDCA_ERR_IO = 3,
  EDCA_ERR_INVALID_ARGUMENT = 4,
  EDCA_ERR_INTERNAL = 5
} edca_status;

/* Message of the last failed call on this thread; empty after success. */
EDCA_API const char* edca_last_error(void);
EDCA_API const char* edca_version(void);
/* Releases strings returned through char** out-parameters. */
EDCA_API void edca_string_free(char* s);

/* ---- scenarios ---- */

typedef struct edca_scenario edca_scenario;
typedef struct edca_template edca_template;

EDCA_API edca_status edca_scenario_load_file(const char* path, edca_scenario** out);
EDCA_API edca_status edca_scenario_load_text(const char* text, const char* base_dir, edca_scenario** out);
/* Applies a JSON merge patch to the scenario document, then re-validates. */
EDCA_API edca_status edca_scenario_patch(edca_scenario* sc, const char* json_patch);
EDCA_API edca_status edca_scenario_to_json(const edca_scenario* sc, char** out);
/* Traffic classes in model order and their printable labels. */
EDCA_API edca_status edca_scenario_class_count(const edca_scenario* sc, size_t* out);
EDCA_API edca_status edca_scenario_class_label(const edca_scenario* sc, size_t j, const char** out);
EDCA_API void edca_scenario_free(edca_scenario* sc);

/* Documents with "${NAME}" placeholders and an optional `sweep` table. */
EDCA_API edca_status edca_template_load_file(const char* path, edca_template** out);
EDCA_API edca_status edca_template_load_text(const char* text, const char* base_dir, edca_template** out);
/* JSON array of variable names / JSON object name -> list of values. */
EDCA_API edca_status edca_template_variables(const edca_template* t, char** out);
EDCA_API edca_status edca_template_sweep(const edca_template* t, char** out);
/* `bindings` is a JSON object of name -> number; may be NULL. */
EDCA_API edca_status edca_template_instantiate(const edca_template* t, const char* bindings, edca_scenario** out);
/* JSON merge patch applied to every later instantiation. */
EDCA_API edca_status edca_template_patch(edca_template* t, const char* json_patch);
EDCA_API void edca_template_free(edca_template* t);

/* ---- saturation model ---- */

typedef struct edca_saturation edca_saturation;

typedef struct edca_saturation_class {
  int ac;
  int flows;
  double tau;
  double p_collision;
  double p_drop;
  double gamma;
  double success_us;
  double collision_us;
  double idle_us;
  double cycle_us;
  double throughput;
  double service_us;
} edca_saturation_class;

EDCA_API edca_status edca_saturation_solve(const edca_scenario* sc, edca_saturation** out);
EDCA_API edca_status edca_saturation_class_count(const edca_saturation* s, size_t* out);
EDCA_API edca_status edca_saturation_get(const edca_saturation* s, size_t j, edca_saturation_class* out);
/* Copies up to `cap` slot occupancies b'_n; *n receives the full count. */
EDCA_API edca_status edca_saturation_occupancy(const edca_saturation* s, double* buf, size_t cap, size_t* n);
EDCA_API edca_status edca_saturation_to_json(const edca_saturation* s, char** out);
EDCA_API void edca_saturation_free(edca_saturation* s);

/* ---- utilization / capacity ---- */

typedef struct edca_capacity edca_capacity;

typedef struct edca_capacity_class {
  int ac;
  int flows;
  int saturated;
  double lambda;
  double mu;
  double rho;
} edca_capacity_class;

EDCA_API edca_status edca_capacity_solve(const edca_scenario* sc, edca_capacity** out);
EDCA_API edca_status edca_capacity_class_count(const edca_capacity* c, size_t* out);
EDCA_API edca_status edca_capacity_get(const edca_capacity* c, size_t j, edca_capacity_class* out);
/* Largest real-time ρ and its TC index (-1 if there is none). */
EDCA_API edca_status edca_capacity_max_rho(const edca_capacity* c, double* rho, int* binding);
EDCA_API edca_status edca_capacity_to_json(const edca_capacity* c, char** out);
EDCA_API void edca_capacity_free(edca_capacity* c);

/* Analytic capacity over template variable `variable` in [lo, cap], other
   variables bound by `bindings` (JSON object, may be NULL). */
EDCA_API edca_status edca_capacity_max_flows(const edca_template* t, const char* variable, const char* bindings,
                                             int lo, int cap, int* out);

/* Conditional activity pdf of TC `tagged` under the solved ρ (JSON array). */
EDCA_API edca_status edca_capacity_activity_pdf(const edca_capacity* c, size_t tagged, char** out);

/* ---- simulator ---- */

typedef struct edca_sim edca_sim;

typedef struct edca_sim_options {
  double duration_s;
  double warmup_s;
  double deadline_ms;
  double wired_delay_ms;
  int buffer_packets;
  const char* packet_trace_path; /* NULL or empty: no trace */
} edca_sim_options;

typedef struct edca_sim_class {
  int ac;
  int flows;
  int saturated;
  double throughput;
  double mean_service_us;
  double mean_delay_us;
  double loss_ratio;
  double collision_probability;
  uint64_t generated;
  uint64_t delivered;
  uint64_t retry_drops;
  uint64_t buffer_drops;
  uint64_t deadline_drops;
  uint64_t residual;
  uint64_t attempts;
  uint64_t collisions;
  uint64_t internal_collisions;
} edca_sim_class;

/* Options as configured in the scenario's `simulation` block. */
EDCA_API edca_status edca_sim_options_from_scenario(const edca_scenario* sc, edca_sim_options* out);
EDCA_API edca_status edca_simulate(const edca_scenario* sc, uint64_t seed, const edca_sim_options* opt, edca_sim** out);
EDCA_API edca_status edca_sim_class_count(const edca_sim* s, size_t* out);
EDCA_API edca_status edca_sim_get(const edca_sim* s, size_t j, edca_sim_class* out);
EDCA_API edca_status edca_sim_to_json(const edca_sim* s, char** out);
EDCA_API void edca_sim_free(edca_sim* s);

/* Simulated capacity: largest value of `variable` whose real-time loss stays
   at or below `loss_threshold` in a majority of the seeds. */
EDCA_API edca_status edca_sim_capacity(const edca_template* t, const char* variable, const char* bindings,
                                       const uint64_t* seeds, size_t n_seeds, double loss_threshold, int lo, int cap,
                                       const edca_sim_options* opt, int* out);

/* Seed-averaged empirical activity pdf of TC `tagged` (JSON array). */
EDCA_API edca_status edca_sim_activity(const edca_scenario* sc, size_t tagged, const uint64_t* seeds, size_t n_seeds,
                                       const edca_sim_options* opt, char** out);

/* ---- admission control ---- */

typedef struct edca_admission edca_admission;

typedef struct edca_tspec {
  const char* tsid;
  int up;        /* user priority 0..7 */
  int downlink;  /* 0 uplink, 1 downlink */
  const char* station;
  double mean_rate_bps;
  double mean_packet_bytes;
} edca_tspec;

typedef enum edca_verdict { EDCA_ADMIT = 0, EDCA_REJECT = 1, EDCA_REMOVED = 2, EDCA_DECISION_ERROR = 3 } edca_verdict;

typedef struct edca_decision {
  edca_verdict verdict;
  double max_rho; /* NaN when the model was not evaluated */
  char reason[256];
  char binding_tc[128];
} edca_decision;

EDCA_API edca_status edca_admission_create(const edca_scenario* base, edca_admission** out);
EDCA_API edca_status edca_admission_addts(edca_admission* a, const edca_tspec* t, edca_decision* out);
EDCA_API edca_status edca_admission_delts(edca_admission* a, const char* tsid, edca_decision* out);
EDCA_API edca_status edca_admission_count(const edca_admission* a, size_t* out);
/* Replays an event stream and returns the decision log as CSV. */
EDCA_API edca_status edca_admission_replay(edca_admission* a, const char* events, char** csv_out);
EDCA_API edca_status edca_admission_snapshot(const edca_admission* a, char** json_out);
EDCA_API edca_status edca_admission_restore(edca_admission* a, const char* json);
EDCA_API void edca_admission_free(edca_admission* a);

#ifdef __cplusplus
}
#endif

#endif
