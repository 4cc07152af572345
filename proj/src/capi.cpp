#include "bsmd/bsmd.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "bsmd/config.hpp"
#include "bsmd/consensus.hpp"
#include "bsmd/demos.hpp"
#include "bsmd/econ.hpp"
#include "bsmd/error.hpp"
#include "bsmd/ledger.hpp"
#include "bsmd/privacy.hpp"
#include "bsmd/workload.hpp"
#include "json.hpp"

struct bsmd_config {
  bsmd::RunConfig run;
};

struct bsmd_sim_result {
  bsmd::ScenarioResult result;
};

struct bsmd_ledger {
  bsmd::Ledger ledger;
};

struct bsmd_demo_report {
  bsmd::DemoReport report;
  std::vector<std::pair<std::string, std::string>> values;
  std::vector<bsmd::PrivacySample> geomask;
  std::vector<bsmd::PrivacySample> geoind;
};

namespace {

thread_local std::string g_last_error;

int set_error(int code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

// Runs `fn`, mapping exceptions onto negated error codes.
template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return BSMD_OK;
  } catch (const bsmd::Error& e) {
    return set_error(-static_cast<int>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(BSMD_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(BSMD_E_INTERNAL, e.what());
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw bsmd::Error(bsmd::ErrorCode::kInvalidArgument, what);
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::filesystem::path ensure_dir(const char* dir) {
  require(dir != nullptr && *dir != '\0', "output directory is required");
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw bsmd::Error(bsmd::ErrorCode::kIo, "cannot create directory " + p.string() + ": " + ec.message());
  return p;
}

template <typename Writer>
void write_file(const std::filesystem::path& path, Writer&& w) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw bsmd::Error(bsmd::ErrorCode::kIo, "cannot write " + path.string());
  w(f);
  f.flush();
  if (!f) throw bsmd::Error(bsmd::ErrorCode::kIo, "cannot write " + path.string());
}

std::string num(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

bsmd::CapacityParams to_capacity(const bsmd_capacity_params* p) {
  bsmd::CapacityParams c;
  c.tps_capacity = p->tps;
  c.tx_size_bytes = p->tx_size_bytes;
  c.lbs_fraction = p->lbs_fraction;
  c.target_throughput = p->target_throughput;
  c.validate();
  return c;
}

}  // namespace

extern "C" {

const char* bsmd_version(void) { return "1.0.0"; }
const char* bsmd_last_error(void) { return g_last_error.c_str(); }
void bsmd_free_string(char* s) { std::free(s); }

int bsmd_config_default(bsmd_config** out) {
  return guarded([&] {
    require(out != nullptr, "out is null");
    *out = new bsmd_config{};
  });
}

int bsmd_config_parse(const char* json_text, bsmd_config** out) {
  return guarded([&] {
    require(json_text != nullptr && out != nullptr, "null argument");
    *out = new bsmd_config{bsmd::parse_run_config(json_text)};
  });
}

int bsmd_config_load(const char* path, bsmd_config** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    *out = new bsmd_config{bsmd::load_run_config(path)};
  });
}

void bsmd_config_free(bsmd_config* config) { delete config; }

int bsmd_config_set_seed(bsmd_config* c, uint64_t seed) {
  return guarded([&] {
    require(c != nullptr, "config is null");
    c->run.seed = seed;
    c->run.scenario.seed = seed;
  });
}

int bsmd_config_set_out_dir(bsmd_config* c, const char* dir) {
  return guarded([&] {
    require(c != nullptr && dir != nullptr && *dir != '\0', "out_dir must be a non-empty string");
    c->run.out_dir = dir;
  });
}

int bsmd_config_set_active_nodes(bsmd_config* c, size_t n) {
  return guarded([&] {
    require(c != nullptr, "config is null");
    c->run.scenario.active_nodes = n;
  });
}

int bsmd_config_set_faulty(bsmd_config* c, size_t f) {
  return guarded([&] {
    require(c != nullptr, "config is null");
    c->run.scenario.faulty = f;
  });
}

int bsmd_config_set_timeout_ms(bsmd_config* c, double t) {
  return guarded([&] {
    require(c != nullptr, "config is null");
    c->run.scenario.consensus_timeout_ms = t;
  });
}

int bsmd_config_validate(const bsmd_config* c) {
  return guarded([&] {
    require(c != nullptr, "config is null");
    // Round-trip so that overrides are checked with their JSON paths.
    bsmd::parse_run_config(bsmd::to_json(c->run));
  });
}

const char* bsmd_config_out_dir(const bsmd_config* c) { return c ? c->run.out_dir.c_str() : ""; }
uint64_t bsmd_config_seed(const bsmd_config* c) { return c ? c->run.seed : 0; }

int bsmd_config_to_json(const bsmd_config* c, char** json_out) {
  return guarded([&] {
    require(c != nullptr && json_out != nullptr, "null argument");
    *json_out = dup(bsmd::to_json(c->run));
  });
}

int bsmd_sim_run(const bsmd_config* c, bsmd_sim_result** out) {
  return guarded([&] {
    require(c != nullptr && out != nullptr, "null argument");
    bsmd::parse_run_config(bsmd::to_json(c->run));
    *out = new bsmd_sim_result{bsmd::run_scenario(c->run.scenario)};
  });
}

void bsmd_sim_free(bsmd_sim_result* r) { delete r; }

int bsmd_sim_summary_get(const bsmd_sim_result* r, bsmd_sim_summary* out) {
  return guarded([&] {
    require(r != nullptr && out != nullptr, "null argument");
    const auto& s = r->result.summary;
    *out = bsmd_sim_summary{s.population,    s.active_nodes,  r->result.generated_points, s.sent,
                            s.served,        s.dropped,       s.pending,                  s.max_sent_per_minute,
                            s.avg_latency_s, s.sd_latency_s,  s.avg_throughput,           s.sd_throughput,
                            r->result.ledger.size()};
  });
}

int bsmd_sim_write_outputs(const bsmd_sim_result* r, const char* dir) {
  return guarded([&] {
    require(r != nullptr, "result is null");
    auto base = ensure_dir(dir);
    write_file(base / "metrics.csv", [&](std::ostream& o) { bsmd::write_metrics_csv(r->result, o); });
    write_file(base / "moving_average.csv", [&](std::ostream& o) { bsmd::write_moving_average_csv(r->result, o); });
    write_file(base / "summary.csv", [&](std::ostream& o) { bsmd::write_summary_csv(r->result, o); });
    write_file(base / "ledger.ndjson", [&](std::ostream& o) { bsmd::export_ledger(r->result.ledger, o); });
  });
}

int bsmd_sim_ledger(const bsmd_sim_result* r, bsmd_ledger** out) {
  return guarded([&] {
    require(r != nullptr && out != nullptr, "null argument");
    *out = new bsmd_ledger{r->result.ledger};
  });
}

int bsmd_ledger_import(const char* path, bsmd_ledger** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    std::ifstream f(path, std::ios::binary);
    if (!f) throw bsmd::Error(bsmd::ErrorCode::kIo, std::string("cannot read ledger file ") + path);
    *out = new bsmd_ledger{bsmd::import_ledger(f)};
  });
}

int bsmd_ledger_export(const bsmd_ledger* l, const char* path) {
  return guarded([&] {
    require(l != nullptr && path != nullptr, "null argument");
    std::filesystem::path p(path);
    if (p.has_parent_path()) ensure_dir(p.parent_path().string().c_str());
    write_file(p, [&](std::ostream& o) { bsmd::export_ledger(l->ledger, o); });
  });
}

int bsmd_ledger_verify(const bsmd_ledger* l, int* valid) {
  return guarded([&] {
    require(l != nullptr && valid != nullptr, "null argument");
    *valid = bsmd::verify_chain(l->ledger) ? 1 : 0;
  });
}

size_t bsmd_ledger_height(const bsmd_ledger* l) { return l ? l->ledger.size() : 0; }
void bsmd_ledger_free(bsmd_ledger* l) { delete l; }

void bsmd_demo_options_default(bsmd_demo_options* o) {
  if (o == nullptr) return;
  const bsmd::DemoOptions d;
  *o = bsmd_demo_options{d.seed,      d.active_nodes, d.faulty, d.timeout_ms,
                         d.frames,    d.transfers,    d.samples, d.trials,
                         d.fee,       d.policy.geoind_epsilon, d.policy.donut_inner, d.policy.donut_outer};
}

int bsmd_demo_run(bsmd_demo_kind kind, const bsmd_demo_options* options, bsmd_log_fn log, void* user,
                  bsmd_demo_report** out) {
  return guarded([&] {
    require(out != nullptr, "out is null");
    bsmd_demo_options o;
    bsmd_demo_options_default(&o);
    if (options != nullptr) o = *options;
    require(o.active_nodes > 0 && 3 * o.faulty < o.active_nodes, "faulty must be below a third of active_nodes");
    require(o.timeout_ms > 0, "timeout_ms must be > 0");
    require(o.fee >= 0.0 && o.fee <= 1.0, "fee must be in [0, 1]");
    bsmd::DemoOptions d;
    d.seed = o.seed;
    d.active_nodes = o.active_nodes;
    d.faulty = o.faulty;
    d.timeout_ms = o.timeout_ms;
    d.frames = o.frames;
    d.transfers = o.transfers;
    d.samples = o.samples;
    d.trials = o.trials;
    d.fee = o.fee;
    d.policy.geoind_epsilon = o.epsilon;
    d.policy.donut_inner = o.donut_inner;
    d.policy.donut_outer = o.donut_outer;
    d.policy.validate();
    bsmd::DemoLog sink;
    if (log != nullptr) sink = [log, user](const std::string& line) { log(line.c_str(), user); };

    auto r = std::make_unique<bsmd_demo_report>();
    switch (kind) {
      case BSMD_DEMO_SPOOFING: r->report = bsmd::run_spoofing_demo(d, sink); break;
      case BSMD_DEMO_INTERCEPTION: r->report = bsmd::run_interception_demo(d, sink); break;
      case BSMD_DEMO_REVOCATION: r->report = bsmd::run_revocation_demo(d, sink); break;
      case BSMD_DEMO_BROKER: r->report = bsmd::run_broker_demo(d, sink); break;
      case BSMD_DEMO_PRIVACY: {
        auto p = bsmd::run_privacy_demo(d, sink);
        r->report = std::move(p.report);
        r->geomask = std::move(p.geomask);
        r->geoind = std::move(p.geoind);
        break;
      }
      default: throw bsmd::Error(bsmd::ErrorCode::kInvalidArgument, "unknown demo kind");
    }
    r->values.assign(r->report.values.begin(), r->report.values.end());
    *out = r.release();
  });
}

void bsmd_demo_free(bsmd_demo_report* r) { delete r; }
int bsmd_demo_passed(const bsmd_demo_report* r) { return r != nullptr && r->report.passed() ? 1 : 0; }
size_t bsmd_demo_check_count(const bsmd_demo_report* r) { return r ? r->report.checks.size() : 0; }

int bsmd_demo_check(const bsmd_demo_report* r, size_t i, const char** name, int* passed, const char** detail) {
  return guarded([&] {
    require(r != nullptr && i < r->report.checks.size(), "check index out of range");
    const auto& c = r->report.checks[i];
    if (name) *name = c.name.c_str();
    if (passed) *passed = c.passed ? 1 : 0;
    if (detail) *detail = c.detail.c_str();
  });
}

size_t bsmd_demo_value_count(const bsmd_demo_report* r) { return r ? r->values.size() : 0; }

int bsmd_demo_value(const bsmd_demo_report* r, size_t i, const char** key, const char** value) {
  return guarded([&] {
    require(r != nullptr && i < r->values.size(), "value index out of range");
    if (key) *key = r->values[i].first.c_str();
    if (value) *value = r->values[i].second.c_str();
  });
}

int bsmd_demo_write_samples(const bsmd_demo_report* r, const char* dir) {
  return guarded([&] {
    require(r != nullptr, "report is null");
    require(r->report.demo == "privacy", "only the privacy demo has samples");
    auto base = ensure_dir(dir);
    bsmd::write_privacy_csv((base / "geomask.csv").string(), r->geomask);
    bsmd::write_privacy_csv((base / "geoind.csv").string(), r->geoind);
  });
}

int bsmd_privacy_geoind(double x, double y, double epsilon, uint64_t seed, size_t n, double* out_xy) {
  return guarded([&] {
    require(n == 0 || out_xy != nullptr, "out_xy is null");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
      throw bsmd::Error(bsmd::ErrorCode::kBadEpsilon, "epsilon must be finite and > 0");
    }
    std::mt19937_64 rng(seed);
    for (size_t i = 0; i < n; ++i) {
      auto p = bsmd::privacy::geoind_perturb({x, y}, epsilon, rng);
      out_xy[2 * i] = p.x;
      out_xy[2 * i + 1] = p.y;
    }
  });
}

int bsmd_privacy_geomask(double x, double y, double inner, double outer, uint64_t seed, size_t n, double* out_xy) {
  return guarded([&] {
    require(n == 0 || out_xy != nullptr, "out_xy is null");
    std::mt19937_64 rng(seed);
    for (size_t i = 0; i < n; ++i) {
      auto p = bsmd::privacy::geomask_donut({x, y}, inner, outer, rng);
      out_xy[2 * i] = p.x;
      out_xy[2 * i + 1] = p.y;
    }
  });
}

double bsmd_planar_laplace_cdf(double r, double epsilon) { return bsmd::privacy::planar_laplace_cdf(r, epsilon); }

int bsmd_game_params_load(const char* path, bsmd_game_params* out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    std::ifstream f(path, std::ios::binary);
    if (!f) throw bsmd::Error(bsmd::ErrorCode::kIo, std::string("cannot read game parameters ") + path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
      throw bsmd::Error(bsmd::ErrorCode::kParse, std::string(path) + ": " + e.what());
    }
    if (!j.is_object()) throw bsmd::Error(bsmd::ErrorCode::kConfig, "game: must be an object");
    bsmd_game_params p{0, 0, 0, 0, 1, 0, 0, 0};
    const std::pair<const char*, double*> fields[] = {{"r_n", &p.r_n}, {"r_m", &p.r_m}, {"c_d", &p.c_d},
                                                      {"c_i", &p.c_i}, {"c_r", &p.c_r}, {"c_f", &p.c_f},
                                                      {"B", &p.B},     {"D", &p.D}};
    for (auto it = j.begin(); it != j.end(); ++it) {
      double* slot = nullptr;
      for (const auto& [name, ptr] : fields) {
        if (it.key() == name) slot = ptr;
      }
      if (slot == nullptr) throw bsmd::Error(bsmd::ErrorCode::kConfig, "game." + it.key() + ": unknown key");
      if (!it.value().is_number()) throw bsmd::Error(bsmd::ErrorCode::kConfig, "game." + it.key() + ": must be a number");
      *slot = it.value().get<double>();
    }
    bsmd::GameParams g{p.r_n, p.r_m, p.c_d, p.c_i, p.c_r, p.c_f, p.B, p.D};
    try {
      g.validate();
    } catch (const bsmd::Error& e) {
      throw bsmd::Error(bsmd::ErrorCode::kConfig, std::string("game: ") + e.what());
    }
    *out = p;
  });
}

int bsmd_solve_game(const bsmd_game_params* p, bsmd_equilibrium* out) {
  return guarded([&] {
    require(p != nullptr && out != nullptr, "null argument");
    bsmd::GameParams g{p->r_n, p->r_m, p->c_d, p->c_i, p->c_r, p->c_f, p->B, p->D};
    auto e = bsmd::solve_game(g);
    *out = bsmd_equilibrium{e.company == bsmd::CompanyAction::kRewards ? 1 : 0,
                            e.user == bsmd::UserAction::kShare ? 1 : 0, e.company_utility, e.user_utility};
  });
}

void bsmd_capacity_params_default(bsmd_capacity_params* p) {
  if (p == nullptr) return;
  const bsmd::CapacityParams d;
  *p = bsmd_capacity_params{d.tps_capacity, d.tx_size_bytes, d.lbs_fraction, d.target_throughput};
}

int bsmd_max_users(const bsmd_capacity_params* p, uint64_t* users) {
  return guarded([&] {
    require(p != nullptr && users != nullptr, "null argument");
    *users = bsmd::max_users(to_capacity(p));
  });
}

int bsmd_ledger_growth(double tps, double tx_size_bytes, double* bytes_per_s, double* bytes_per_year) {
  return guarded([&] {
    bsmd::CapacityParams c;
    c.tps_capacity = tps;
    c.tx_size_bytes = tx_size_bytes;
    c.validate();
    auto g = bsmd::ledger_growth(c);
    if (bytes_per_s) *bytes_per_s = g.bytes_per_s;
    if (bytes_per_year) *bytes_per_year = g.bytes_per_year;
  });
}

int bsmd_capacity_tables_csv(const bsmd_capacity_params* base, char** users_csv, char** growth_csv) {
  return guarded([&] {
    require(base != nullptr, "params are null");
    auto t = bsmd::capacity_table(to_capacity(base));
    std::string u = "lbs_fraction,users_90,users_100,reported_90,reported_100\n";
    for (const auto& r : t.users) {
      u += num("%.2f", r.lbs_fraction) + "," + std::to_string(r.users_90) + "," + std::to_string(r.users_100) + "," +
           std::to_string(r.reported_90) + "," + std::to_string(r.reported_100) + "\n";
    }
    std::string g = "tps,bytes_per_s,tb_per_year,reported_tb_per_year,users_90,reported_users\n";
    for (const auto& r : t.growth) {
      g += num("%.0f", r.tps) + "," + num("%.0f", r.bytes_per_s) + "," + num("%.3f", r.bytes_per_year / 1e12) + "," +
           num("%.1f", r.reported_tb_per_year) + "," + std::to_string(r.users_90) + "," +
           std::to_string(r.reported_users) + "\n";
    }
    if (users_csv) *users_csv = dup(u);
    if (growth_csv) *growth_csv = dup(g);
  });
}

const char* bsmd_consensus_reference(const char* algorithm, const char* property) {
  const char* out = nullptr;
  guarded([&] {
    require(algorithm != nullptr && property != nullptr, "null argument");
    out = bsmd::consensus_reference(algorithm, property).c_str();
  });
  return out;
}

int bsmd_consensus_reference_csv(char** csv) {
  return guarded([&] {
    require(csv != nullptr, "null argument");
    std::string s = "algorithm,permission,energy_saving,adversary_tolerance\n";
    for (const auto& r : bsmd::consensus_reference_table()) {
      s += r.algorithm + "," + r.permission + "," + r.energy_saving + "," + r.adversary_tolerance + "\n";
    }
    *csv = dup(s);
  });
}

}  // extern "C"
