#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "bsmd/error.hpp"
#include "bsmd/workload.hpp"
#include "doctest.h"

using namespace bsmd;

namespace {

double oracle_pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
    saa += a[i] * a[i];
    sbb += b[i] * b[i];
    sab += a[i] * b[i];
  }
  return (n * sab - sa * sb) / std::sqrt((n * saa - sa * sa) * (n * sbb - sb * sb));
}

ScenarioConfig small_window() {
  ScenarioConfig c;
  c.population = 5;
  c.start_hour = 7.9;
  c.duration_hours = 0.1;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_SUITE("workload") {
  TEST_CASE("individual counts") {
    ScenarioConfig c;
    c.population = 100;
    c.points_sd = 0;
    std::mt19937_64 rng(1);
    for (auto v : gen_individual_counts(c, rng)) CHECK(v == 9356u);
    c.points_mean = 20000;
    for (auto v : gen_individual_counts(c, rng)) CHECK(v == kMaxDailyPoints);
    c.points_mean = -5;
    for (auto v : gen_individual_counts(c, rng)) CHECK(v == 0u);
  }

  TEST_CASE("n=100 totals fall in the three-sigma band") {
    ScenarioConfig c;
    c.population = 100;
    // About 0.27% of draws leave the band; check the distribution instead.
    const int runs = 1000;
    int outside = 0;
    double sum = 0, sq = 0;
    for (int seed = 1; seed <= runs; ++seed) {
      std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
      auto counts = gen_individual_counts(c, rng);
      const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
      outside += std::abs(total - 935600) > 3 * std::sqrt(100.0) * 1902;
      sum += total;
      sq += total * total;
    }
    const double mean = sum / runs, sd = std::sqrt(sq / runs - mean * mean);
    CHECK(std::abs(mean - 935600) < 4 * 19020 / std::sqrt(runs));
    CHECK(sd == doctest::Approx(19020).epsilon(0.1));
    CHECK(outside <= 10);
  }

  TEST_CASE("timestamps are sorted and follow a single component") {
    std::mt19937_64 rng(2);
    TimeMixture m({{8.0, 1.0, 1.0}});
    auto t = gen_timestamps(100000, m, rng);
    CHECK(std::is_sorted(t.begin(), t.end()));
    CHECK(t.front() >= 0.0);
    CHECK(t.back() < 24.0);
    const double mean = std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(t.size());
    CHECK(std::abs(mean - 8.0) < 0.01);
  }

  TEST_CASE("per-minute load tracks the density") {
    std::mt19937_64 rng(3);
    auto m = TimeMixture::daily_default();
    std::vector<std::vector<double>> all;
    for (int i = 0; i < 100; ++i) all.push_back(gen_timestamps(9356, m, rng));
    auto load = load_per_minute(all);
    REQUIRE(load.size() == 1440);
    CHECK(std::accumulate(load.begin(), load.end(), std::uint64_t{0}) == 935600u);
    std::vector<double> l(load.begin(), load.end()), d(1440);
    for (int i = 0; i < 1440; ++i) d[i] = m.density((i + 0.5) / 60.0);
    CHECK(pearson(l, d) == doctest::Approx(oracle_pearson(l, d)));
    CHECK(pearson(l, d) >= 0.95);
  }

  TEST_CASE("moving average by direct summation") {
    std::vector<double> c(40, 3.5);
    for (double v : moving_average(c)) CHECK(v == doctest::Approx(3.5));
    std::vector<double> impulse(40, 0.0);
    impulse[0] = 1;
    auto ma = moving_average(impulse, 15);
    for (std::size_t t = 0; t < ma.size(); ++t) {
      double s = 0;
      const std::size_t w = std::min<std::size_t>(15, t + 1);
      for (std::size_t j = t + 1 - w; j <= t; ++j) s += impulse[j];
      CHECK(ma[t] == doctest::Approx(s / static_cast<double>(w)));
    }
    std::vector<double> r{1, 5, 2, 8};
    CHECK(moving_average(r, 1) == r);
  }

  TEST_CASE("config validation names the field") {
    ScenarioConfig c;
    c.population = 0;
    try {
      c.validate();
      FAIL("expected Config");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kConfig);
      CHECK(std::string(e.what()).find("population") != std::string::npos);
    }
    c = {};
    c.active_nodes = 3;
    c.faulty = 1;
    CHECK_THROWS_AS(c.validate(), Error);
  }

  TEST_CASE("uncongested window serves everything") {
    auto r = run_scenario(small_window());
    CHECK(r.summary.sent > 0);
    CHECK(r.summary.served == r.summary.sent);
    CHECK(r.summary.avg_throughput == 1.0);
    CHECK(verify_chain(r.ledger));
    // Setup blocks (schema, keys, contracts) precede the stream.
    CHECK(r.ledger.size() >= r.summary.served);
    for (const auto& m : r.minutes) {
      CHECK(m.served <= m.sent);
      CHECK(m.throughput >= 0.0);
      CHECK(m.throughput <= 1.0);
    }
  }

  TEST_CASE("identical seed and config replay identically") {
    auto a = run_scenario(small_window());
    auto b = run_scenario(small_window());
    CHECK(a.block_digests == b.block_digests);
    std::ostringstream ma, mb;
    write_metrics_csv(a, ma);
    write_metrics_csv(b, mb);
    CHECK(ma.str() == mb.str());
    auto c = small_window();
    c.seed = 4;
    CHECK(run_scenario(c).block_digests != a.block_digests);
  }

  TEST_CASE("overload degrades throughput under the capacity bound") {
    auto c = small_window();
    c.population = 20;
    c.capacity_tps = 1.0;
    c.tx_timeout_s = 2.0;
    auto r = run_scenario(c);
    CHECK(r.summary.avg_throughput < 1.0);
    CHECK(r.summary.dropped > 0);
    for (const auto& m : r.minutes) CHECK(m.committed <= 61u);
  }

  TEST_CASE("csv headers") {
    auto r = run_scenario(small_window());
    std::ostringstream m, a, s;
    write_metrics_csv(r, m);
    write_moving_average_csv(r, a);
    write_summary_csv(r, s);
    const std::string metrics = m.str();
    CHECK(metrics.rfind("minute,", 0) == 0);
    CHECK(std::count(metrics.begin(), metrics.end(), '\n') == static_cast<long>(r.minutes.size() + 1));
    CHECK_FALSE(a.str().empty());
    CHECK(s.str().rfind("individuals,active_nodes,total_messages", 0) == 0);
  }
}
