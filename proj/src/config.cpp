#include "bsmd/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "bsmd/error.hpp"
#include "json.hpp"

namespace bsmd {

namespace {

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& reason) {
  throw Error(ErrorCode::kConfig, path + ": " + reason);
}

// Walks one JSON object, remembering which keys were consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(display(), "must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  double number(const std::string& key, double fallback, double lo, double hi, const char* range) {
    if (!take(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number()) fail(at(key), "must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d) || d < lo || d > hi) fail(at(key), std::string("must be ") + range);
    return d;
  }

  std::uint64_t integer(const std::string& key, std::uint64_t fallback, std::uint64_t lo, const char* range) {
    if (!take(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      fail(at(key), "must be a non-negative integer");
    }
    const auto u = v.get<std::uint64_t>();
    if (u < lo) fail(at(key), std::string("must be ") + range);
    return u;
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!take(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) fail(at(key), "must be a string");
    return v.get<std::string>();
  }

  const json* child(const std::string& key) {
    if (!take(key)) return nullptr;
    return &j_.at(key);
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(at(it.key()), "unknown key");
    }
  }

 private:
  bool take(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  std::string display() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

TimeMixture parse_mixture(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "must be a non-empty array");
  std::vector<MixtureComponent> comps;
  for (std::size_t i = 0; i < j.size(); ++i) {
    Section s(j[i], path + "[" + std::to_string(i) + "]");
    for (const char* k : {"mean_hour", "sd_hours", "weight"}) {
      if (!s.has(k)) fail(s.at(k), "is required");
    }
    MixtureComponent c;
    c.mean_hour = s.number("mean_hour", 0, 0, 24, "in [0, 24]");
    c.sd_hours = s.number("sd_hours", 1, 1e-9, 12, "in (0, 12]");
    c.weight = s.number("weight", 0, 0, 1, "in [0, 1]");
    s.finish();
    comps.push_back(c);
  }
  try {
    return TimeMixture(std::move(comps));
  } catch (const Error& e) {
    fail(path, e.what());
  }
}

}  // namespace

RunConfig parse_run_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig rc;
  ScenarioConfig& sc = rc.scenario;
  Section top(root, "");
  rc.seed = top.integer("seed", rc.seed, 0, ">= 0");
  rc.out_dir = top.string("out_dir", rc.out_dir);
  if (rc.out_dir.empty()) fail("out_dir", "must not be empty");

  if (const json* j = top.child("scenario")) {
    Section s(*j, "scenario");
    sc.population = s.integer("population", sc.population, 1, ">= 1");
    sc.start_hour = s.number("start_hour", sc.start_hour, 0, 24, "in [0, 24)");
    if (sc.start_hour >= 24.0) fail(s.at("start_hour"), "must be in [0, 24)");
    sc.duration_hours = s.number("duration_hours", sc.duration_hours, 0, 24, "in (0, 24]");
    if (sc.duration_hours <= 0.0) fail(s.at("duration_hours"), "must be in (0, 24]");
    if (sc.start_hour + sc.duration_hours > 24.0) fail(s.at("duration_hours"), "window must end by hour 24");
    sc.points_mean = s.number("points_mean", sc.points_mean, 0, kMaxDailyPoints, "in [0, 17280]");
    sc.points_sd = s.number("points_sd", sc.points_sd, 0, kInf, ">= 0");
    sc.time_compression = s.number("time_compression", sc.time_compression, 0, kInf, ">= 0");
    sc.capacity_tps = s.number("capacity_tps", sc.capacity_tps, 0, kInf, ">= 0");
    sc.tx_timeout_s = s.number("tx_timeout_s", sc.tx_timeout_s, 0, kInf, ">= 0");
    sc.pool_capacity = s.integer("pool_capacity", sc.pool_capacity, 0, ">= 0");
    if (const json* m = s.child("mixture")) sc.mixture = parse_mixture(*m, s.at("mixture"));
    s.finish();
  }
  if (const json* j = top.child("network")) {
    Section s(*j, "network");
    sc.link_latency_ms = s.number("latency_ms", sc.link_latency_ms, 0, kInf, ">= 0");
    sc.link_jitter_ms = s.number("jitter_ms", sc.link_jitter_ms, 0, kInf, ">= 0");
    sc.drop_probability = s.number("drop_probability", sc.drop_probability, 0, 1, "in [0, 1)");
    if (sc.drop_probability >= 1.0) fail(s.at("drop_probability"), "must be in [0, 1)");
    s.finish();
  }
  if (const json* j = top.child("consensus")) {
    Section s(*j, "consensus");
    sc.active_nodes = s.integer("active_nodes", sc.active_nodes, 1, ">= 1");
    sc.faulty = s.integer("faulty", sc.faulty, 0, ">= 0");
    sc.consensus_timeout_ms = s.number("timeout_ms", sc.consensus_timeout_ms, 1e-3, kInf, "> 0");
    if (3 * sc.faulty >= sc.active_nodes) fail(s.at("faulty"), "must be below a third of active_nodes");
    s.finish();
  } else if (3 * sc.faulty >= sc.active_nodes) {
    fail("consensus.faulty", "must be below a third of active_nodes");
  }
  if (const json* j = top.child("privacy")) {
    Section s(*j, "privacy");
    const std::string level = s.string("level", sc.privacy.level == privacy::PrivacyLevel::kHigh ? "high" : "low");
    if (level == "high") sc.privacy.level = privacy::PrivacyLevel::kHigh;
    else if (level == "low") sc.privacy.level = privacy::PrivacyLevel::kLow;
    else fail(s.at("level"), "must be \"high\" or \"low\"");
    sc.privacy.geoind_epsilon = s.number("epsilon", sc.privacy.geoind_epsilon, 0, kInf, "> 0");
    if (sc.privacy.geoind_epsilon <= 0.0) fail(s.at("epsilon"), "must be > 0");
    sc.privacy.donut_inner = s.number("donut_inner", sc.privacy.donut_inner, 0, kInf, ">= 0");
    sc.privacy.donut_outer = s.number("donut_outer", sc.privacy.donut_outer, 0, kInf, ">= 0");
    if (sc.privacy.donut_outer <= sc.privacy.donut_inner) fail(s.at("donut_outer"), "must exceed donut_inner");
    s.finish();
  }
  top.finish();
  sc.seed = rc.seed;
  sc.validate();
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot read config file " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_run_config(ss.str());
}

std::string to_json(const RunConfig& rc) {
  const ScenarioConfig& sc = rc.scenario;
  json mixture = json::array();
  for (const auto& c : sc.mixture.components()) {
    mixture.push_back({{"mean_hour", c.mean_hour}, {"sd_hours", c.sd_hours}, {"weight", c.weight}});
  }
  json j = {
      {"seed", rc.seed},
      {"out_dir", rc.out_dir},
      {"scenario",
       {{"population", sc.population},
        {"start_hour", sc.start_hour},
        {"duration_hours", sc.duration_hours},
        {"points_mean", sc.points_mean},
        {"points_sd", sc.points_sd},
        {"time_compression", sc.time_compression},
        {"capacity_tps", sc.capacity_tps},
        {"tx_timeout_s", sc.tx_timeout_s},
        {"pool_capacity", sc.pool_capacity},
        {"mixture", mixture}}},
      {"network",
       {{"latency_ms", sc.link_latency_ms}, {"jitter_ms", sc.link_jitter_ms}, {"drop_probability", sc.drop_probability}}},
      {"consensus",
       {{"active_nodes", sc.active_nodes}, {"faulty", sc.faulty}, {"timeout_ms", sc.consensus_timeout_ms}}},
      {"privacy",
       {{"level", sc.privacy.level == privacy::PrivacyLevel::kHigh ? "high" : "low"},
        {"epsilon", sc.privacy.geoind_epsilon},
        {"donut_inner", sc.privacy.donut_inner},
        {"donut_outer", sc.privacy.donut_outer}}},
  };
  return j.dump(2) + "\n";
}

}  // namespace bsmd
