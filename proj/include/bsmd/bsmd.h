#ifndef BSMD_BSMD_H
#define BSMD_BSMD_H

/* C interface to the BSMD library. Every function returning int yields
 * BSMD_OK (0) or a negated bsmd error code; bsmd_last_error() then holds a
 * message for the calling thread. Handles are opaque and owned by the
 * caller; strings returned through char** are released with
 * bsmd_free_string(). */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define BSMD_API __declspec(dllexport)
#else
#define BSMD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

enum {
  BSMD_OK = 0,
  BSMD_E_INVALID_ARGUMENT = -1,
  BSMD_E_NO_PROOF = -10,
  BSMD_E_UNVERIFIED_BROKER = -14,
  BSMD_E_UNKNOWN_ENTITY = -21,
  BSMD_E_PARSE = -22,
  BSMD_E_IO = -23,
  BSMD_E_CONFIG = -24,
  BSMD_E_CRYPTO = -25,
  BSMD_E_INTERNAL = -99
};

BSMD_API const char* bsmd_version(void);
BSMD_API const char* bsmd_last_error(void);
BSMD_API void bsmd_free_string(char* s);

typedef void (*bsmd_log_fn)(const char* line, void* user);

/* ---- run configuration and workload simulation ---- */

typedef struct bsmd_config bsmd_config;
typedef struct bsmd_sim_result bsmd_sim_result;

BSMD_API int bsmd_config_default(bsmd_config** out);
BSMD_API int bsmd_config_parse(const char* json_text, bsmd_config** out);
BSMD_API int bsmd_config_load(const char* path, bsmd_config** out);
BSMD_API void bsmd_config_free(bsmd_config* config);
BSMD_API int bsmd_config_set_seed(bsmd_config* config, uint64_t seed);
BSMD_API int bsmd_config_set_out_dir(bsmd_config* config, const char* dir);
/* Consensus overrides; validated together by bsmd_config_validate. */
BSMD_API int bsmd_config_set_active_nodes(bsmd_config* config, size_t n);
BSMD_API int bsmd_config_set_faulty(bsmd_config* config, size_t f);
BSMD_API int bsmd_config_set_timeout_ms(bsmd_config* config, double timeout_ms);
BSMD_API int bsmd_config_validate(const bsmd_config* config);
BSMD_API const char* bsmd_config_out_dir(const bsmd_config* config);
BSMD_API uint64_t bsmd_config_seed(const bsmd_config* config);
BSMD_API int bsmd_config_to_json(const bsmd_config* config, char** json_out);

typedef struct {
  uint64_t population;
  uint64_t active_nodes;
  uint64_t generated_points;
  uint64_t sent;
  uint64_t served;
  uint64_t dropped;
  uint64_t pending;
  uint64_t max_sent_per_minute;
  double avg_latency_s;
  double sd_latency_s;
  double avg_throughput;
  double sd_throughput;
  uint64_t ledger_height;
} bsmd_sim_summary;

BSMD_API int bsmd_sim_run(const bsmd_config* config, bsmd_sim_result** out);
BSMD_API void bsmd_sim_free(bsmd_sim_result* result);
BSMD_API int bsmd_sim_summary_get(const bsmd_sim_result* result, bsmd_sim_summary* out);
/* Writes metrics.csv, moving_average.csv, summary.csv and ledger.ndjson. */
BSMD_API int bsmd_sim_write_outputs(const bsmd_sim_result* result, const char* dir);

/* ---- ledger export / import ---- */

typedef struct bsmd_ledger bsmd_ledger;

BSMD_API int bsmd_sim_ledger(const bsmd_sim_result* result, bsmd_ledger** out);
BSMD_API int bsmd_ledger_import(const char* path, bsmd_ledger** out);
BSMD_API int bsmd_ledger_export(const bsmd_ledger* ledger, const char* path);
/* *valid is 1 when every hash link and block signature checks. */
BSMD_API int bsmd_ledger_verify(const bsmd_ledger* ledger, int* valid);
BSMD_API size_t bsmd_ledger_height(const bsmd_ledger* ledger);
BSMD_API void bsmd_ledger_free(bsmd_ledger* ledger);

/* ---- security demos ---- */

typedef enum {
  BSMD_DEMO_SPOOFING = 0,
  BSMD_DEMO_INTERCEPTION = 1,
  BSMD_DEMO_REVOCATION = 2,
  BSMD_DEMO_BROKER = 3,
  BSMD_DEMO_PRIVACY = 4
} bsmd_demo_kind;

typedef struct {
  uint64_t seed;
  size_t active_nodes;
  size_t faulty;
  int64_t timeout_ms;
  size_t frames;
  size_t transfers;
  size_t samples;
  size_t trials;
  double fee;
  double epsilon;
  double donut_inner;
  double donut_outer;
} bsmd_demo_options;

typedef struct bsmd_demo_report bsmd_demo_report;

BSMD_API void bsmd_demo_options_default(bsmd_demo_options* options);
BSMD_API int bsmd_demo_run(bsmd_demo_kind kind, const bsmd_demo_options* options, bsmd_log_fn log, void* user,
                           bsmd_demo_report** out);
BSMD_API void bsmd_demo_free(bsmd_demo_report* report);
BSMD_API int bsmd_demo_passed(const bsmd_demo_report* report);
BSMD_API size_t bsmd_demo_check_count(const bsmd_demo_report* report);
BSMD_API int bsmd_demo_check(const bsmd_demo_report* report, size_t i, const char** name, int* passed,
                             const char** detail);
BSMD_API size_t bsmd_demo_value_count(const bsmd_demo_report* report);
BSMD_API int bsmd_demo_value(const bsmd_demo_report* report, size_t i, const char** key, const char** value);
/* Privacy demo only: geomask.csv and geoind.csv with sample_id,dx,dy,d. */
BSMD_API int bsmd_demo_write_samples(const bsmd_demo_report* report, const char* dir);

/* ---- location privacy ---- */

/* Writes n perturbed points as x0,y0,x1,y1,... into out_xy (2n doubles). */
BSMD_API int bsmd_privacy_geoind(double x, double y, double epsilon, uint64_t seed, size_t n, double* out_xy);
BSMD_API int bsmd_privacy_geomask(double x, double y, double inner, double outer, uint64_t seed, size_t n,
                                  double* out_xy);
BSMD_API double bsmd_planar_laplace_cdf(double r, double epsilon);

/* ---- incentive game ---- */

typedef struct {
  double r_n, r_m, c_d, c_i, c_r, c_f, B, D;
} bsmd_game_params;

typedef struct {
  int company_rewards; /* 1 rewards, 0 no_rewards */
  int user_shares;     /* 1 share, 0 not_share */
  double company_utility;
  double user_utility;
} bsmd_equilibrium;

BSMD_API int bsmd_game_params_load(const char* path, bsmd_game_params* out);
BSMD_API int bsmd_solve_game(const bsmd_game_params* params, bsmd_equilibrium* out);

/* ---- scalability ---- */

typedef struct {
  double tps;
  double tx_size_bytes;
  double lbs_fraction;
  double target_throughput;
} bsmd_capacity_params;

BSMD_API void bsmd_capacity_params_default(bsmd_capacity_params* params);
BSMD_API int bsmd_max_users(const bsmd_capacity_params* params, uint64_t* users);
BSMD_API int bsmd_ledger_growth(double tps, double tx_size_bytes, double* bytes_per_s, double* bytes_per_year);
/* CSV renderings of the users-by-LBS and growth-by-throughput tables. */
BSMD_API int bsmd_capacity_tables_csv(const bsmd_capacity_params* base, char** users_csv, char** growth_csv);

/* ---- consensus reference data ---- */

/* property is "permission", "energy" or "adversary"; NULL when unknown. */
BSMD_API const char* bsmd_consensus_reference(const char* algorithm, const char* property);
BSMD_API int bsmd_consensus_reference_csv(char** csv);

#ifdef __cplusplus
}
#endif

#endif
