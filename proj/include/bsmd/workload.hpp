#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "bsmd/ledger.hpp"
#include "bsmd/mixture.hpp"
#include "bsmd/privacy.hpp"

namespace bsmd {

// Devices report at most every 5 s: 24 * 3600 / 5.
constexpr std::uint32_t kMaxDailyPoints = 17'280;

struct ScenarioConfig {
  std::size_t population = 20;
  std::size_t active_nodes = 3;
  std::size_t faulty = 0;
  double start_hour = 0.0;
  double duration_hours = 24.0;
  double points_mean = 9356.0;
  double points_sd = 1902.0;
  TimeMixture mixture = TimeMixture::daily_default();
  double time_compression = 0.0;  // > 0 paces wall clock at sim/compression
  std::uint64_t seed = 1;
  double capacity_tps = 40.0;     // block writes per second; 0 = unpaced
  double tx_timeout_s = 5.0;      // pending longer than this is dropped
  std::size_t pool_capacity = 0;  // 0 = unbounded
  double link_latency_ms = 10.0;
  double link_jitter_ms = 5.0;
  double drop_probability = 0.0;
  double consensus_timeout_ms = 500.0;
  privacy::PrivacyPolicy privacy{privacy::PrivacyLevel::kLow};

  // Throws Config naming the offending field.
  void validate() const;
};

// i.i.d. Normal(mean, sd) draws, rounded and clamped to [0, 17280].
std::vector<std::uint32_t> gen_individual_counts(const ScenarioConfig& config, std::mt19937_64& rng);
// Sorted times of day in hours, [0, 24).
std::vector<double> gen_timestamps(std::size_t count, const TimeMixture& mixture, std::mt19937_64& rng);

struct MinuteRecord {
  std::int64_t minute = 0;  // minute of day
  std::uint64_t sent = 0;
  std::uint64_t served = 0;     // of those sent this minute
  double mean_latency_s = 0.0;  // 0 when nothing was served
  double throughput = 1.0;      // served / sent; 1 when nothing was sent
  std::uint64_t committed = 0;  // commits that landed in this minute
};

struct MetricSummary {
  std::size_t population = 0;
  std::size_t active_nodes = 0;
  std::uint64_t sent = 0;
  std::uint64_t served = 0;
  std::uint64_t dropped = 0;
  std::uint64_t pending = 0;
  std::uint64_t max_sent_per_minute = 0;
  double avg_latency_s = 0.0;
  double sd_latency_s = 0.0;
  double avg_throughput = 0.0;
  double sd_throughput = 0.0;
};

struct ScenarioResult {
  std::vector<MinuteRecord> minutes;
  MetricSummary summary;
  Ledger ledger;
  std::uint64_t generated_points = 0;  // whole-day total across the population
  std::vector<Digest> block_digests;
};

ScenarioResult run_scenario(const ScenarioConfig& config);

// Trailing mean over the last min(window, t + 1) samples.
std::vector<double> moving_average(const std::vector<double>& series, std::size_t window = 15);

// Points per minute of day (1440 bins) for a set of timestamps.
std::vector<std::uint64_t> load_per_minute(const std::vector<std::vector<double>>& timestamps);

double pearson(const std::vector<double>& a, const std::vector<double>& b);

void write_metrics_csv(const ScenarioResult& r, std::ostream& out);
void write_moving_average_csv(const ScenarioResult& r, std::ostream& out, std::size_t window = 15);
void write_summary_csv(const ScenarioResult& r, std::ostream& out);

}  // namespace bsmd
