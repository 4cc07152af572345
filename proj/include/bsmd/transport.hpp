#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "bsmd/crypto.hpp"

namespace bsmd {

using SimTime = std::int64_t;  // microseconds of simulated time

constexpr SimTime ms(double v) { return static_cast<SimTime>(v * 1000.0); }
constexpr double to_seconds(SimTime t) { return static_cast<double>(t) / 1e6; }

// Deterministic discrete-event loop. Events at equal times run in the order
// they were scheduled.
class EventLoop {
 public:
  using Action = std::function<void()>;

  SimTime now() const noexcept { return now_; }
  void at(SimTime when, Action action);
  void after(SimTime delay, Action action) { at(now_ + delay, std::move(action)); }

  // Runs events with time <= until; the clock ends at `until`.
  void run_until(SimTime until);
  // Runs to quiescence or until `max_events` have fired. Returns the count.
  std::size_t run(std::size_t max_events = SIZE_MAX);
  bool idle() const noexcept { return queue_.empty(); }
  std::size_t pending() const noexcept { return queue_.size(); }

 private:
  struct Event {
    SimTime when;
    std::uint64_t seq;
    Action action;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const noexcept {
      return a.when != b.when ? a.when > b.when : a.seq > b.seq;
    }
  };

  SimTime now_ = 0;
  std::uint64_t seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
};

struct LatencyModel {
  SimTime base = ms(10);
  SimTime jitter = 0;  // uniform extra delay in [0, jitter]
  double drop_probability = 0.0;
};

enum class FrameClass : std::uint8_t { kData, kControl };

struct TransportLogEntry {
  SimTime sent_at = 0;
  std::string from;
  std::string to;
  FrameClass cls = FrameClass::kData;
  std::size_t size = 0;
  bool dropped = false;
};

struct TransportStats {
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;

  std::uint64_t in_flight() const noexcept { return sent - delivered - dropped; }
};

// Simulated links between endpoints. Delivery is FIFO per (from, to) link;
// data frames are subject to the drop probability, control frames are not.
class SimTransport {
 public:
  using Handler = std::function<void(const Bytes&)>;

  SimTransport(EventLoop& loop, LatencyModel model, std::uint64_t seed)
      : loop_(loop), model_(model), rng_(seed) {}

  // Returns false if the frame was dropped.
  bool send(const std::string& from, const std::string& to, Bytes frame, FrameClass cls,
            Handler on_deliver);

  void set_model(const LatencyModel& model) { model_ = model; }
  void set_link_model(const std::string& from, const std::string& to, const LatencyModel& model);

  // Eavesdropper: records every frame crossing any link.
  void enable_tap(bool on) { tap_enabled_ = on; }
  const std::vector<Bytes>& tapped() const noexcept { return tapped_; }
  void clear_tap() { tapped_.clear(); }

  void enable_log(bool on) { log_enabled_ = on; }
  const std::vector<TransportLogEntry>& log() const noexcept { return log_; }

  const TransportStats& stats() const noexcept { return stats_; }
  EventLoop& loop() noexcept { return loop_; }

 private:
  const LatencyModel& model_for(const std::string& from, const std::string& to) const;

  EventLoop& loop_;
  LatencyModel model_;
  std::map<std::pair<std::string, std::string>, LatencyModel> link_models_;
  std::map<std::pair<std::string, std::string>, SimTime> link_tail_;
  std::mt19937_64 rng_;
  bool tap_enabled_ = false;
  bool log_enabled_ = false;
  std::vector<Bytes> tapped_;
  std::vector<TransportLogEntry> log_;
  TransportStats stats_;
};

}  // namespace bsmd
