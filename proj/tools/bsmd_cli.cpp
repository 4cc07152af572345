// Command-line front end. Talks to the library exclusively through bsmd.h.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bsmd/bsmd.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

struct Failure {
  int exit_code;
  std::string message;
};

// Usage/config problems exit 2, everything else the library reports exits 1.
void check(int rc, const std::string& what) {
  if (rc == BSMD_OK) return;
  const bool usage = rc == BSMD_E_CONFIG || rc == BSMD_E_PARSE || rc == BSMD_E_IO || rc == BSMD_E_INVALID_ARGUMENT ||
                     rc == -11 || rc == -12;  // BadRadii, BadEpsilon
  throw Failure{usage ? kExitUsage : kExitFailed, what + ": " + bsmd_last_error()};
}

struct CString {
  char* p = nullptr;
  ~CString() { bsmd_free_string(p); }
  std::string str() const { return p ? p : ""; }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw Failure{kExitFailed, "cannot write " + path.string()};
}

std::vector<std::vector<std::string>> parse_csv(const std::string& csv) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

void print_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    if (width.size() < r.size()) width.resize(r.size(), 0);
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  for (std::size_t k = 0; k < rows.size(); ++k) {
    std::string line;
    for (std::size_t i = 0; i < rows[k].size(); ++i) {
      const std::string& c = rows[k][i];
      line += (i ? "  " : "") + std::string(width[i] - c.size(), ' ') + c;
    }
    std::cout << line << "\n";
    if (k == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      std::cout << std::string(total + 2 * (width.size() - 1), '-') << "\n";
    }
  }
}

struct Globals {
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  std::string config;
  bool seed_set = false;
  bool out_dir_set = false;
};

struct ConsensusFlags {
  std::size_t active_nodes = 0;
  std::size_t faulty = 0;
  double timeout_ms = 0;
  bool active_set = false, faulty_set = false, timeout_set = false;
};

void add_consensus_flags(CLI::App* cmd, ConsensusFlags& f) {
  cmd->add_option_function<std::size_t>(
         "--active-nodes", [&f](std::size_t v) { f.active_nodes = v; f.active_set = true; }, "Number of active nodes")
      ->check(CLI::PositiveNumber);
  cmd->add_option_function<std::size_t>(
      "--faulty", [&f](std::size_t v) { f.faulty = v; f.faulty_set = true; }, "Byzantine active nodes (< n/3)");
  cmd->add_option_function<double>(
         "--timeout-ms", [&f](double v) { f.timeout_ms = v; f.timeout_set = true; }, "First-round consensus timeout")
      ->check(CLI::PositiveNumber);
}

// ---- run-sim / export-ledger --------------------------------------------

struct Sim {
  bsmd_config* config = nullptr;
  bsmd_sim_result* result = nullptr;
  ~Sim() {
    bsmd_sim_free(result);
    bsmd_config_free(config);
  }
};

fs::path prepare_sim(Sim& sim, const Globals& g, const ConsensusFlags& cf) {
  if (g.config.empty()) throw Failure{kExitUsage, "--config <file> is required"};
  if (!fs::exists(g.config)) throw Failure{kExitUsage, "config file not found: " + g.config};
  check(bsmd_config_load(g.config.c_str(), &sim.config), "config " + g.config);
  if (g.seed_set) check(bsmd_config_set_seed(sim.config, g.seed), "--seed");
  if (g.out_dir_set) check(bsmd_config_set_out_dir(sim.config, g.out_dir.c_str()), "--out-dir");
  if (cf.active_set) check(bsmd_config_set_active_nodes(sim.config, cf.active_nodes), "--active-nodes");
  if (cf.faulty_set) check(bsmd_config_set_faulty(sim.config, cf.faulty), "--faulty");
  if (cf.timeout_set) check(bsmd_config_set_timeout_ms(sim.config, cf.timeout_ms), "--timeout-ms");
  check(bsmd_config_validate(sim.config), "config " + g.config);
  return fs::path(bsmd_config_out_dir(sim.config));
}

int cmd_run_sim(const Globals& g, const ConsensusFlags& cf) {
  Sim sim;
  const fs::path out = prepare_sim(sim, g, cf);
  check(bsmd_sim_run(sim.config, &sim.result), "simulation");
  check(bsmd_sim_write_outputs(sim.result, out.string().c_str()), "outputs");
  CString json;
  check(bsmd_config_to_json(sim.config, &json.p), "config");
  write_text(out / "config.json", json.str());

  bsmd_sim_summary s{};
  check(bsmd_sim_summary_get(sim.result, &s), "summary");
  bsmd_ledger* ledger = nullptr;
  check(bsmd_sim_ledger(sim.result, &ledger), "ledger");
  int valid = 0;
  const int rc = bsmd_ledger_verify(ledger, &valid);
  bsmd_ledger_free(ledger);
  check(rc, "ledger verification");

  std::cout << "seed " << bsmd_config_seed(sim.config) << ", BFT consensus (tolerates "
            << bsmd_consensus_reference("pBFT", "adversary") << ")\n\n";
  print_table({{"individuals", "active_nodes", "total_messages", "max_msgs_per_min", "sent", "served", "dropped",
                "pending", "avg_latency_s", "sd_latency_s", "avg_throughput", "sd_throughput"},
               {std::to_string(s.population), std::to_string(s.active_nodes), std::to_string(s.generated_points),
                std::to_string(s.max_sent_per_minute), std::to_string(s.sent), std::to_string(s.served),
                std::to_string(s.dropped), std::to_string(s.pending), fmt("%.4f", s.avg_latency_s),
                fmt("%.4f", s.sd_latency_s), fmt("%.4f", s.avg_throughput), fmt("%.4f", s.sd_throughput)}});
  std::cout << "\nledger: " << s.ledger_height << " blocks, chain " << (valid ? "verified" : "INVALID") << "\n"
            << "wrote " << (out / "metrics.csv").string() << ", moving_average.csv, summary.csv, ledger.ndjson, "
            << "config.json\n";
  return valid ? kExitOk : kExitFailed;
}

int cmd_export_ledger(const Globals& g, const ConsensusFlags& cf, const std::string& input) {
  bsmd_ledger* ledger = nullptr;
  fs::path out_dir = g.out_dir;
  if (!input.empty()) {
    if (!fs::exists(input)) throw Failure{kExitUsage, "ledger file not found: " + input};
    check(bsmd_ledger_import(input.c_str(), &ledger), "import " + input);
  } else {
    Sim sim;
    out_dir = prepare_sim(sim, g, cf);
    check(bsmd_sim_run(sim.config, &sim.result), "simulation");
    check(bsmd_sim_ledger(sim.result, &ledger), "ledger");
  }
  int valid = 0;
  int rc = bsmd_ledger_verify(ledger, &valid);
  const std::size_t height = bsmd_ledger_height(ledger);
  const fs::path path = out_dir / "ledger.ndjson";
  if (rc == BSMD_OK) rc = bsmd_ledger_export(ledger, path.string().c_str());
  bsmd_ledger_free(ledger);
  check(rc, "export");
  std::cout << "ledger: " << height << " blocks, chain " << (valid ? "verified" : "INVALID") << "\n"
            << "wrote " << path.string() << "\n";
  return valid ? kExitOk : kExitFailed;
}

// ---- demos ---------------------------------------------------------------

struct DemoFlags {
  std::size_t frames = 0, samples = 0, transfers = 0;
  double fee = -1, epsilon = -1;
};

int cmd_demo(bsmd_demo_kind kind, const std::string& name, const Globals& g, const ConsensusFlags& cf,
             const DemoFlags& df) {
  bsmd_demo_options o;
  bsmd_demo_options_default(&o);
  o.seed = g.seed;
  if (cf.active_set) o.active_nodes = cf.active_nodes;
  if (cf.faulty_set) o.faulty = cf.faulty;
  if (cf.timeout_set) o.timeout_ms = static_cast<std::int64_t>(cf.timeout_ms);
  if (df.frames) o.frames = df.frames;
  if (df.samples) o.samples = df.samples;
  if (df.transfers) o.transfers = df.transfers;
  if (df.fee >= 0) o.fee = df.fee;
  if (df.epsilon >= 0) o.epsilon = df.epsilon;

  std::string log;
  auto sink = [](const char* line, void* user) {
    std::cout << line << "\n";
    *static_cast<std::string*>(user) += std::string(line) + "\n";
  };
  bsmd_demo_report* report = nullptr;
  check(bsmd_demo_run(kind, &o, sink, &log, &report), name);

  std::string csv = "check,passed,detail\n";
  for (std::size_t i = 0; i < bsmd_demo_check_count(report); ++i) {
    const char *cname = nullptr, *detail = nullptr;
    int passed = 0;
    bsmd_demo_check(report, i, &cname, &passed, &detail);
    csv += std::string(cname) + "," + (passed ? "1" : "0") + ",\"" + detail + "\"\n";
  }
  std::string values;
  for (std::size_t i = 0; i < bsmd_demo_value_count(report); ++i) {
    const char *k = nullptr, *v = nullptr;
    bsmd_demo_value(report, i, &k, &v);
    values += std::string(k) + "=" + v + "\n";
  }
  const fs::path out = g.out_dir;
  write_text(out / (name + "_checks.csv"), csv);
  write_text(out / (name + ".log"), log + values);
  int rc = BSMD_OK;
  if (kind == BSMD_DEMO_PRIVACY) rc = bsmd_demo_write_samples(report, out.string().c_str());
  const bool passed = bsmd_demo_passed(report) != 0;
  bsmd_demo_free(report);
  check(rc, "samples");
  if (!values.empty()) std::cout << values;
  std::cout << name << ": " << (passed ? "PASS" : "FAIL") << "\n";
  return passed ? kExitOk : kExitFailed;
}

// ---- analysis ------------------------------------------------------------

int cmd_calc_scale(const Globals& g, double tps, double lbs, double tx_size) {
  bsmd_capacity_params p;
  bsmd_capacity_params_default(&p);
  p.tps = tps;
  p.lbs_fraction = lbs;
  p.tx_size_bytes = tx_size;
  std::uint64_t users_100 = 0, users_90 = 0;
  check(bsmd_max_users(&p, &users_100), "max users");
  bsmd_capacity_params p90 = p;
  p90.target_throughput = 0.9;
  check(bsmd_max_users(&p90, &users_90), "max users");
  double bps = 0, bpy = 0;
  check(bsmd_ledger_growth(tps, tx_size, &bps, &bpy), "ledger growth");

  std::vector<std::vector<std::string>> custom = {
      {"tps", "tx_bytes", "lbs_fraction", "users_90", "users_100", "mb_per_s", "tb_per_year", "tib_per_year"},
      {fmt("%.0f", tps), fmt("%.0f", tx_size), fmt("%.2f", lbs), std::to_string(users_90), std::to_string(users_100),
       fmt("%.3f", bps / 1e6), fmt("%.2f", bpy / 1e12), fmt("%.2f", bpy / 1099511627776.0)}};
  CString users, growth;
  bsmd_capacity_params base;
  bsmd_capacity_params_default(&base);
  base.tx_size_bytes = tx_size;
  check(bsmd_capacity_tables_csv(&base, &users.p, &growth.p), "capacity tables");

  std::cout << "Requested configuration\n";
  print_table(custom);
  std::cout << "\nMaximum real-time users by LBS share (computed vs reported)\n";
  print_table(parse_csv(users.str()));
  std::cout << "\nLedger growth by throughput cap\n";
  print_table(parse_csv(growth.str()));

  std::string custom_csv;
  for (const auto& row : custom) {
    for (std::size_t i = 0; i < row.size(); ++i) custom_csv += (i ? "," : "") + row[i];
    custom_csv += "\n";
  }
  const fs::path out = g.out_dir;
  write_text(out / "scale.csv", custom_csv);
  write_text(out / "scale_users.csv", users.str());
  write_text(out / "scale_growth.csv", growth.str());
  return kExitOk;
}

int cmd_solve_game(const Globals& g, const std::string& params_path) {
  if (!fs::exists(params_path)) throw Failure{kExitUsage, "parameter file not found: " + params_path};
  bsmd_game_params p{};
  check(bsmd_game_params_load(params_path.c_str(), &p), "parameters");
  bsmd_equilibrium e{};
  check(bsmd_solve_game(&p, &e), "solve");
  const double share_r = p.r_m + p.r_n - p.c_d - p.c_i, share_n = p.r_n - p.c_d - p.c_i;
  std::vector<std::vector<std::string>> leaves = {
      {"company", "user", "company_utility", "user_utility"},
      {"rewards", "share", fmt("%.6f", p.B * p.D - p.c_r - p.c_f), fmt("%.6f", share_r)},
      {"no_rewards", "share", fmt("%.6f", p.B * p.D - p.c_f), fmt("%.6f", share_n)},
      {"rewards", "not_share", fmt("%.6f", -p.c_r), fmt("%.6f", 0.0)},
      {"no_rewards", "not_share", fmt("%.6f", 0.0), fmt("%.6f", 0.0)},
  };
  std::cout << "Game tree leaves\n";
  print_table(leaves);
  const std::string company = e.company_rewards ? "rewards" : "no_rewards";
  const std::string user = e.user_shares ? "share" : "not_share";
  std::cout << "\nequilibrium: " << company << "/" << user << " (company " << fmt("%.6f", e.company_utility)
            << ", user " << fmt("%.6f", e.user_utility) << ")\n";
  std::string csv = "company,user,company_utility,user_utility\n" + company + "," + user + "," +
                    fmt("%.6f", e.company_utility) + "," + fmt("%.6f", e.user_utility) + "\n";
  write_text(fs::path(g.out_dir) / "game.csv", csv);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blockchain smart mobility data-market simulator"};
  app.require_subcommand(1);
  Globals g;
  app.add_option_function<std::uint64_t>("--seed", [&g](std::uint64_t v) { g.seed = v; g.seed_set = true; },
                                         "Random seed (default 1)");
  app.add_option_function<std::string>(
      "--out-dir", [&g](const std::string& v) { g.out_dir = v; g.out_dir_set = true; }, "Output directory");
  app.add_option("--config", g.config, "Run configuration (JSON)");
  app.fallthrough();

  ConsensusFlags cf;
  DemoFlags df;

  auto* run_sim = app.add_subcommand("run-sim", "Run a workload scenario and write CSV artifacts");
  add_consensus_flags(run_sim, cf);

  auto* spoof = app.add_subcommand("demo-spoofing", "Spoofing attack against the two-step credential check");
  add_consensus_flags(spoof, cf);
  auto* intercept = app.add_subcommand("demo-interception", "Eavesdrop on encrypted peer channels");
  add_consensus_flags(intercept, cf);
  intercept->add_option("--frames", df.frames, "Frames to send and tap")->check(CLI::PositiveNumber);
  auto* revoke = app.add_subcommand("demo-revocation", "Contract lifecycle and access revocation");
  add_consensus_flags(revoke, cf);
  auto* priv = app.add_subcommand("demo-privacy", "Sample both location-privacy mechanisms");
  priv->add_option("--samples", df.samples, "Samples per mechanism")->check(CLI::PositiveNumber);
  priv->add_option("--epsilon", df.epsilon, "GeoInd epsilon (1/m)")->check(CLI::PositiveNumber);
  auto* broker = app.add_subcommand("run-broker", "Brokered University/Individual arrangement");
  add_consensus_flags(broker, cf);
  broker->add_option("--fee", df.fee, "Broker fee fraction of the requester reward")->check(CLI::Range(0.0, 1.0));
  broker->add_option("--transfers", df.transfers, "Data transfers to enforce")->check(CLI::PositiveNumber);

  double tps = 3500, lbs = 1.0, tx_size = 134;
  auto* scale = app.add_subcommand("calc-scale", "Maximum users and ledger growth");
  scale->add_option("--tps", tps, "Transactions per second")->check(CLI::PositiveNumber);
  scale->add_option("--lbs", lbs, "Share of users sending LBS points")->check(CLI::Range(0.0, 1.0) & CLI::PositiveNumber);
  scale->add_option("--tx-size", tx_size, "Bytes per transaction")->check(CLI::PositiveNumber);

  std::string game_params;
  auto* game = app.add_subcommand("solve-game", "Backward induction on the sharing game");
  game->add_option("--params", game_params, "Game parameters (JSON)")->required();

  std::string ledger_input;
  auto* exp = app.add_subcommand("export-ledger", "Export (and verify) a ledger");
  add_consensus_flags(exp, cf);
  exp->add_option("--input", ledger_input, "Existing ledger file to verify and re-export");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*run_sim) return cmd_run_sim(g, cf);
    if (*spoof) return cmd_demo(BSMD_DEMO_SPOOFING, "spoofing", g, cf, df);
    if (*intercept) return cmd_demo(BSMD_DEMO_INTERCEPTION, "interception", g, cf, df);
    if (*revoke) return cmd_demo(BSMD_DEMO_REVOCATION, "revocation", g, cf, df);
    if (*priv) return cmd_demo(BSMD_DEMO_PRIVACY, "privacy", g, cf, df);
    if (*broker) return cmd_demo(BSMD_DEMO_BROKER, "broker", g, cf, df);
    if (*scale) return cmd_calc_scale(g, tps, lbs, tx_size);
    if (*game) return cmd_solve_game(g, game_params);
    if (*exp) {
      if (ledger_input.empty() && g.config.empty()) throw Failure{kExitUsage, "export-ledger needs --input or --config"};
      return cmd_export_ledger(g, cf, ledger_input);
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailed;
  }
  return kExitUsage;
}
