/* Exercises the shared library through its C header only. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "bsmd/bsmd.h"

static int failures = 0;

#define EXPECT(cond)                                              \
  do {                                                            \
    if (!(cond)) {                                                \
      fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                 \
    }                                                             \
  } while (0)

static void count_lines(const char* line, void* user) {
  (void)line;
  ++*(int*)user;
}

int main(int argc, char** argv) {
  const char* out_dir = argc > 1 ? argv[1] : "capi_out";
  char path[1024];

  EXPECT(strlen(bsmd_version()) > 0);

  /* config */
  bsmd_config* cfg = NULL;
  EXPECT(bsmd_config_parse("{\"scenario\": {\"bogus\": 1}}", &cfg) == BSMD_E_CONFIG);
  EXPECT(strstr(bsmd_last_error(), "scenario.bogus") != NULL);
  EXPECT(bsmd_config_parse("{oops", &cfg) == BSMD_E_PARSE);
  EXPECT(bsmd_config_load("/nonexistent.json", &cfg) == BSMD_E_IO);
  EXPECT(bsmd_config_parse(
             "{\"seed\": 3, \"scenario\": {\"population\": 4, \"start_hour\": 7.9, \"duration_hours\": 0.05}}",
             &cfg) == BSMD_OK);
  EXPECT(bsmd_config_seed(cfg) == 3);
  EXPECT(bsmd_config_set_faulty(cfg, 1) == BSMD_OK);
  EXPECT(bsmd_config_validate(cfg) == BSMD_E_CONFIG);
  EXPECT(bsmd_config_set_active_nodes(cfg, 4) == BSMD_OK);
  EXPECT(bsmd_config_validate(cfg) == BSMD_OK);
  char* json = NULL;
  EXPECT(bsmd_config_to_json(cfg, &json) == BSMD_OK);
  EXPECT(json && strstr(json, "\"population\": 4") != NULL);
  bsmd_free_string(json);

  /* simulation and ledger */
  bsmd_sim_result* sim = NULL;
  EXPECT(bsmd_sim_run(cfg, &sim) == BSMD_OK);
  bsmd_sim_summary sum;
  EXPECT(bsmd_sim_summary_get(sim, &sum) == BSMD_OK);
  EXPECT(sum.population == 4);
  EXPECT(sum.active_nodes == 4);
  EXPECT(sum.served <= sum.sent);
  EXPECT(bsmd_sim_write_outputs(sim, out_dir) == BSMD_OK);
  bsmd_ledger* led = NULL;
  EXPECT(bsmd_sim_ledger(sim, &led) == BSMD_OK);
  int valid = 0;
  EXPECT(bsmd_ledger_verify(led, &valid) == BSMD_OK && valid == 1);
  EXPECT(bsmd_ledger_height(led) == sum.ledger_height);
  snprintf(path, sizeof path, "%s/ledger.ndjson", out_dir);
  bsmd_ledger* back = NULL;
  EXPECT(bsmd_ledger_import(path, &back) == BSMD_OK);
  EXPECT(bsmd_ledger_height(back) == bsmd_ledger_height(led));
  bsmd_ledger_free(back);
  bsmd_ledger_free(led);
  bsmd_sim_free(sim);
  bsmd_config_free(cfg);
  EXPECT(bsmd_ledger_import("/nonexistent.ndjson", &back) == BSMD_E_IO);

  /* demos */
  bsmd_demo_options opt;
  bsmd_demo_options_default(&opt);
  opt.frames = 20;
  opt.samples = 500;
  int lines = 0;
  for (int k = BSMD_DEMO_SPOOFING; k <= BSMD_DEMO_PRIVACY; ++k) {
    bsmd_demo_report* rep = NULL;
    EXPECT(bsmd_demo_run((bsmd_demo_kind)k, &opt, count_lines, &lines, &rep) == BSMD_OK);
    EXPECT(bsmd_demo_passed(rep) == 1);
    EXPECT(bsmd_demo_check_count(rep) > 0);
    const char *name, *detail;
    int passed = 0;
    EXPECT(bsmd_demo_check(rep, 0, &name, &passed, &detail) == BSMD_OK);
    EXPECT(bsmd_demo_check(rep, 9999, &name, &passed, &detail) == BSMD_E_INVALID_ARGUMENT);
    if (k == BSMD_DEMO_PRIVACY) EXPECT(bsmd_demo_write_samples(rep, out_dir) == BSMD_OK);
    bsmd_demo_free(rep);
  }
  EXPECT(lines > 0);
  EXPECT(bsmd_demo_run((bsmd_demo_kind)42, &opt, NULL, NULL, NULL) == BSMD_E_INVALID_ARGUMENT);

  /* privacy */
  double xy[2000];
  EXPECT(bsmd_privacy_geomask(0, 0, 100, 200, 1, 1000, xy) == BSMD_OK);
  for (int i = 0; i < 1000; ++i) {
    double d = hypot(xy[2 * i], xy[2 * i + 1]);
    EXPECT(d >= 100 - 1e-9 && d <= 200 + 1e-9);
  }
  EXPECT(bsmd_privacy_geoind(0, 0, 0.0, 1, 10, xy) < 0);
  EXPECT(fabs(bsmd_planar_laplace_cdf(100, 0.01) - (1 - 2 * exp(-1.0))) < 1e-12);

  /* game */
  bsmd_game_params gp = {5, 3, 1, 2, 1, 0, 2, 5};
  bsmd_equilibrium eq;
  EXPECT(bsmd_solve_game(&gp, &eq) == BSMD_OK);
  EXPECT(eq.company_rewards == 0 && eq.user_shares == 1);
  gp.c_r = 0;
  EXPECT(bsmd_solve_game(&gp, &eq) < 0);

  /* capacity */
  bsmd_capacity_params cp;
  bsmd_capacity_params_default(&cp);
  uint64_t users = 0;
  EXPECT(bsmd_max_users(&cp, &users) == BSMD_OK);
  EXPECT(users > 40000 && users < 56000);
  double bps = 0, bpy = 0;
  EXPECT(bsmd_ledger_growth(3500, 134, &bps, &bpy) == BSMD_OK);
  EXPECT(bps == 469000.0);
  char *ucsv = NULL, *gcsv = NULL;
  EXPECT(bsmd_capacity_tables_csv(&cp, &ucsv, &gcsv) == BSMD_OK);
  EXPECT(ucsv && strncmp(ucsv, "lbs_fraction,", 13) == 0);
  EXPECT(gcsv && strncmp(gcsv, "tps,", 4) == 0);
  bsmd_free_string(ucsv);
  bsmd_free_string(gcsv);

  /* consensus reference */
  EXPECT(strcmp(bsmd_consensus_reference("pBFT", "energy"), "yes") == 0);
  EXPECT(bsmd_consensus_reference("PoA", "energy") == NULL);

  if (failures) fprintf(stderr, "%d failures\n", failures);
  else printf("capi: all checks passed\n");
  return failures ? 1 : 0;
}
