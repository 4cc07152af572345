#include "bsmd/workload.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <functional>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <thread>
#include <unordered_map>

#include "bsmd/codec.hpp"
#include "bsmd/error.hpp"
#include "bsmd/stack.hpp"

namespace bsmd {

namespace {

void require(bool ok, const char* field, const char* reason) {
  if (!ok) throw Error(ErrorCode::kConfig, std::string("scenario.") + field + ": " + reason);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void mean_sd(const std::vector<double>& v, double& mean, double& sd) {
  mean = sd = 0.0;
  if (v.empty()) return;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
}

Bytes encode_point(const privacy::GeoPoint& p, std::int64_t t_ms) {
  // 32 bytes of geographic payload: x, y, time, reserved.
  ByteWriter w;
  w.u64(std::bit_cast<std::uint64_t>(p.x));
  w.u64(std::bit_cast<std::uint64_t>(p.y));
  w.i64(t_ms);
  w.u64(0);
  return w.take();
}

}  // namespace

void ScenarioConfig::validate() const {
  require(population > 0, "population", "must be > 0");
  require(active_nodes > 0, "active_nodes", "must be > 0");
  require(faulty < active_nodes, "faulty", "must be smaller than active_nodes");
  require(3 * faulty < active_nodes, "faulty", "must be below a third of active_nodes");
  require(start_hour >= 0.0 && start_hour < 24.0, "start_hour", "must be in [0, 24)");
  require(duration_hours > 0.0 && start_hour + duration_hours <= 24.0, "duration_hours",
          "must be > 0 and end by hour 24");
  require(points_mean >= 0.0 && std::isfinite(points_mean), "points_mean", "must be finite and >= 0");
  require(points_sd >= 0.0 && std::isfinite(points_sd), "points_sd", "must be finite and >= 0");
  require(time_compression >= 0.0, "time_compression", "must be >= 0");
  require(capacity_tps >= 0.0, "capacity_tps", "must be >= 0");
  require(tx_timeout_s >= 0.0, "tx_timeout_s", "must be >= 0");
  require(link_latency_ms >= 0.0, "link_latency_ms", "must be >= 0");
  require(link_jitter_ms >= 0.0, "link_jitter_ms", "must be >= 0");
  require(drop_probability >= 0.0 && drop_probability < 1.0, "drop_probability", "must be in [0, 1)");
  require(consensus_timeout_ms > 0.0, "consensus_timeout_ms", "must be > 0");
  try {
    mixture.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, std::string("scenario.mixture: ") + e.what());
  }
  try {
    privacy.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, std::string("privacy: ") + e.what());
  }
}

std::vector<std::uint32_t> gen_individual_counts(const ScenarioConfig& config, std::mt19937_64& rng) {
  std::vector<std::uint32_t> out;
  out.reserve(config.population);
  std::normal_distribution<double> dist(config.points_mean, std::max(config.points_sd, 1e-300));
  for (std::size_t i = 0; i < config.population; ++i) {
    const double draw = config.points_sd > 0.0 ? dist(rng) : config.points_mean;
    const double clamped = std::clamp(std::round(draw), 0.0, static_cast<double>(kMaxDailyPoints));
    out.push_back(static_cast<std::uint32_t>(clamped));
  }
  return out;
}

std::vector<double> gen_timestamps(std::size_t count, const TimeMixture& mixture, std::mt19937_64& rng) {
  mixture.validate();
  std::vector<double> out(count);
  for (auto& t : out) t = mixture.sample(rng);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> moving_average(const std::vector<double>& series, std::size_t window) {
  if (window == 0) throw Error(ErrorCode::kInvalidArgument, "moving average window must be >= 1");
  std::vector<double> out(series.size());
  double sum = 0.0;
  for (std::size_t t = 0; t < series.size(); ++t) {
    sum += series[t];
    if (t >= window) sum -= series[t - window];
    out[t] = sum / static_cast<double>(std::min(window, t + 1));
  }
  return out;
}

std::vector<std::uint64_t> load_per_minute(const std::vector<std::vector<double>>& timestamps) {
  std::vector<std::uint64_t> bins(1440, 0);
  for (const auto& person : timestamps) {
    for (double t : person) bins[std::min<std::size_t>(1439, static_cast<std::size_t>(t * 60.0))]++;
  }
  return bins;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw Error(ErrorCode::kInvalidArgument, "series length mismatch");
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(a.size());
  mb /= static_cast<double>(b.size());
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

ScenarioResult run_scenario(const ScenarioConfig& config) {
  config.validate();
  std::mt19937_64 gen_rng(config.seed);
  std::mt19937_64 geo_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  StackConfig sc;
  sc.active_nodes = config.active_nodes;
  sc.faulty = config.faulty;
  sc.link = {ms(config.link_latency_ms), ms(config.link_jitter_ms), config.drop_probability};
  sc.consensus.timeout = ms(config.consensus_timeout_ms);
  sc.consensus.min_block_interval =
      config.capacity_tps > 0.0 ? static_cast<SimTime>(std::ceil(1e6 / config.capacity_tps)) : 0;
  sc.pool_capacity = config.pool_capacity;
  sc.tx_timeout = static_cast<SimTime>(config.tx_timeout_s * 1e6);
  sc.seed = config.seed + 17;
  Stack stack(sc);

  // Requester node collecting the stream and one contract per individual.
  const std::string disclosure =
      config.privacy.level == privacy::PrivacyLevel::kLow ? "location:low" : "location:coarse";
  stack.add_participant("lbs-provider", NodeKind::kCompany, {"navigation"});
  RequesterTerms rterms;
  rterms.service_provided = "navigation";
  rterms.monetary_reward = Money{1000};
  rterms.accuracy = DisclosureSet{disclosure};
  rterms.temporality = {kDefaultClockOriginMs - kDayMs, kDefaultClockOriginMs + 366 * kDayMs};

  struct Person {
    std::string contract_id;
    ChannelId channel = 0;
    privacy::GeoPoint home;
    std::vector<double> times;  // hours, window only
    std::size_t cursor = 0;
  };
  std::vector<Person> people(config.population);
  std::uniform_real_distribution<double> city(-15000.0, 15000.0);
  for (std::size_t i = 0; i < config.population; ++i) {
    const std::string id = "ind-" + std::to_string(i);
    stack.add_participant(id, NodeKind::kIndividual, {"mobility"});
    OwnerTerms oterms;
    oterms.service_requested = "navigation";
    oterms.monetary_reward = Money{1000};
    oterms.privacy_level = DisclosureSet{disclosure};
    oterms.temporality = {kDefaultClockOriginMs, kDefaultClockOriginMs + 365 * kDayMs};
    SmartContract& c = stack.propose_contract("share-" + id, id, "lbs-provider", oterms, rterms);
    if (!stack.activate(c, stack.identity_context({}, {})).accepted()) {
      throw Error(ErrorCode::kInternal, "scenario contract did not match");
    }
    people[i].contract_id = c.id();
    people[i].channel = stack.open_channel(c).owner_end;
    people[i].home = {city(geo_rng), city(geo_rng)};
  }

  ScenarioResult result;
  const auto counts = gen_individual_counts(config, gen_rng);
  const double end_hour = config.start_hour + config.duration_hours;
  for (std::size_t i = 0; i < config.population; ++i) {
    result.generated_points += counts[i];
    for (double t : gen_timestamps(counts[i], config.mixture, gen_rng)) {
      if (t >= config.start_hour && t < end_hour) people[i].times.push_back(t);
    }
  }

  // Window starts on the next whole simulated second after setup.
  EventLoop& loop = stack.loop();
  const SimTime setup_end = loop.now();
  const SimTime window_start = (setup_end / 1'000'000 + 1) * 1'000'000;
  auto sim_at = [&](double hour) {
    return window_start + static_cast<SimTime>(std::llround((hour - config.start_hour) * 3600.0 * 1e6));
  };
  const auto first_minute = static_cast<std::int64_t>(std::floor(config.start_hour * 60.0));
  const auto n_minutes = static_cast<std::size_t>(std::ceil(end_hour * 60.0)) - static_cast<std::size_t>(first_minute);
  auto minute_of = [&](SimTime t) -> std::size_t {
    const double hour = config.start_hour + static_cast<double>(t - window_start) / 3.6e9;
    const auto m = static_cast<std::int64_t>(std::floor(hour * 60.0)) - first_minute;
    return static_cast<std::size_t>(std::max<std::int64_t>(0, m));
  };

  std::vector<std::uint64_t> sent(n_minutes, 0), served(n_minutes, 0), committed(n_minutes + 1, 0);
  std::vector<double> latency_sum(n_minutes, 0.0);
  std::uint64_t dropped = 0, in_network = 0;
  std::unordered_map<std::uint64_t, SimTime> submitted;  // pool id -> send time

  Network& net = stack.network();
  Consensus& consensus = stack.consensus();
  net.keep_inbox(false);
  net.on_delivery([&](const Delivery& d) {
    --in_network;
    const SmartContract* c = stack.contracts().find(d.contract_id);
    if (c == nullptr || !c->enforce_transfer(stack.now_ms(), DisclosureSet{disclosure}, stack.rewards()).allowed()) {
      ++dropped;
      return;
    }
    TxRecord tx;
    tx.timestamp_ms = stack.now_ms();
    tx.did_requester = c->requester().did;
    tx.did_sender = c->owner().did;
    auto id = consensus.submit(std::move(tx));
    if (!id) {
      ++dropped;
      return;
    }
    submitted.emplace(*id, d.sent_at);
  });
  stack.on_commit([&](const CommitEvent& ev) {
    for (auto id : ev.pool_ids) {
      auto it = submitted.find(id);
      if (it == submitted.end()) continue;
      const std::size_t m = minute_of(it->second);
      if (m < n_minutes) {
        ++served[m];
        latency_sum[m] += to_seconds(ev.at - it->second);
      }
      committed[std::min(minute_of(ev.at), n_minutes)]++;
      submitted.erase(it);
    }
  });

  std::function<void(std::size_t)> emit = [&](std::size_t i) {
    Person& p = people[i];
    ++p.cursor;
    const auto loc = privacy::obfuscate(p.home, config.privacy, false, geo_rng);
    const Bytes payload = encode_point(loc, stack.now_ms());
    const std::size_t m = minute_of(loop.now());
    if (m < n_minutes) ++sent[m];
    if (net.send_encrypted(p.channel, payload).status == SendStatus::kDropped) {
      ++dropped;
    } else {
      ++in_network;
    }
    if (p.cursor < p.times.size()) loop.at(sim_at(p.times[p.cursor]), [&emit, i] { emit(i); });
  };
  for (std::size_t i = 0; i < config.population; ++i) {
    if (!people[i].times.empty()) loop.at(sim_at(people[i].times.front()), [&emit, i] { emit(i); });
  }

  const SimTime window_end = sim_at(end_hour);
  const SimTime drain_end = window_end + static_cast<SimTime>((config.tx_timeout_s + 60.0) * 1e6);
  if (config.time_compression > 0.0) {
    const auto wall_start = std::chrono::steady_clock::now();
    for (SimTime t = window_start; t < drain_end && !loop.idle(); t += 1'000'000) {
      loop.run_until(t);
      const auto due = wall_start + std::chrono::microseconds(
                                        static_cast<std::int64_t>(static_cast<double>(t - window_start) /
                                                                  config.time_compression));
      std::this_thread::sleep_until(due);
    }
  }
  consensus.run_until_idle(drain_end);

  std::uint64_t in_pool = 0;
  for (const auto& [id, at] : submitted) {
    if (consensus.pool().submitted_at(id)) ++in_pool;
  }
  const std::uint64_t expired = submitted.size() - in_pool;
  std::uint64_t total_sent = 0, total_served = 0, max_sent = 0;
  std::vector<double> lat, thr;
  for (std::size_t m = 0; m < n_minutes; ++m) {
    MinuteRecord r;
    r.minute = first_minute + static_cast<std::int64_t>(m);
    r.sent = sent[m];
    r.served = served[m];
    r.committed = committed[m];
    if (served[m] > 0) {
      r.mean_latency_s = latency_sum[m] / static_cast<double>(served[m]);
      lat.push_back(r.mean_latency_s);
    }
    if (sent[m] > 0) {
      r.throughput = static_cast<double>(served[m]) / static_cast<double>(sent[m]);
      thr.push_back(r.throughput);
    }
    total_sent += sent[m];
    total_served += served[m];
    max_sent = std::max(max_sent, sent[m]);
    result.minutes.push_back(r);
  }
  MetricSummary& s = result.summary;
  s.population = config.population;
  s.active_nodes = config.active_nodes;
  s.sent = total_sent;
  s.served = total_served;
  s.dropped = dropped + expired;
  s.pending = in_network + in_pool;
  s.max_sent_per_minute = max_sent;
  mean_sd(lat, s.avg_latency_s, s.sd_latency_s);
  mean_sd(thr, s.avg_throughput, s.sd_throughput);

  result.ledger = stack.ledger();
  for (const auto& b : result.ledger.blocks()) result.block_digests.push_back(hash_block(*b));
  return result;
}

void write_metrics_csv(const ScenarioResult& r, std::ostream& out) {
  out << "minute,sent,served,mean_latency_s,throughput\n";
  for (const auto& m : r.minutes) {
    out << m.minute << ',' << m.sent << ',' << m.served << ',' << fmt(m.mean_latency_s) << ',' << fmt(m.throughput)
        << '\n';
  }
}

void write_moving_average_csv(const ScenarioResult& r, std::ostream& out, std::size_t window) {
  std::vector<double> lat, thr;
  for (const auto& m : r.minutes) {
    lat.push_back(m.mean_latency_s);
    thr.push_back(m.throughput);
  }
  const auto la = moving_average(lat, window);
  const auto ta = moving_average(thr, window);
  out << "minute,latency_ma,throughput_ma\n";
  for (std::size_t i = 0; i < r.minutes.size(); ++i) {
    out << r.minutes[i].minute << ',' << fmt(la[i]) << ',' << fmt(ta[i]) << '\n';
  }
}

void write_summary_csv(const ScenarioResult& r, std::ostream& out) {
  const auto& s = r.summary;
  out << "individuals,active_nodes,total_messages,max_messages_per_minute,sent,served,dropped,pending,"
         "avg_latency_s,sd_latency_s,avg_throughput,sd_throughput\n";
  out << s.population << ',' << s.active_nodes << ',' << r.generated_points << ',' << s.max_sent_per_minute << ','
      << s.sent << ',' << s.served << ',' << s.dropped << ',' << s.pending << ',' << fmt(s.avg_latency_s) << ','
      << fmt(s.sd_latency_s) << ',' << fmt(s.avg_throughput) << ',' << fmt(s.sd_throughput) << '\n';
}

}  // namespace bsmd
