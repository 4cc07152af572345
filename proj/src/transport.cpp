#include "bsmd/transport.hpp"

#include <algorithm>

namespace bsmd {

void EventLoop::at(SimTime when, Action action) {
  queue_.push(Event{std::max(when, now_), seq_++, std::move(action)});
}

void EventLoop::run_until(SimTime until) {
  while (!queue_.empty() && queue_.top().when <= until) {
    Event ev = std::move(const_cast<Event&>(queue_.top()));
    queue_.pop();
    now_ = ev.when;
    ev.action();
  }
  now_ = std::max(now_, until);
}

std::size_t EventLoop::run(std::size_t max_events) {
  std::size_t fired = 0;
  while (!queue_.empty() && fired < max_events) {
    Event ev = std::move(const_cast<Event&>(queue_.top()));
    queue_.pop();
    now_ = ev.when;
    ev.action();
    ++fired;
  }
  return fired;
}

void SimTransport::set_link_model(const std::string& from, const std::string& to, const LatencyModel& model) {
  link_models_[{from, to}] = model;
}

const LatencyModel& SimTransport::model_for(const std::string& from, const std::string& to) const {
  auto it = link_models_.find({from, to});
  return it == link_models_.end() ? model_ : it->second;
}

bool SimTransport::send(const std::string& from, const std::string& to, Bytes frame, FrameClass cls,
                        Handler on_deliver) {
  const LatencyModel& m = model_for(from, to);
  ++stats_.sent;
  if (tap_enabled_) tapped_.push_back(frame);

  bool dropped = false;
  if (cls == FrameClass::kData && m.drop_probability > 0.0) {
    dropped = std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < m.drop_probability;
  }
  if (log_enabled_) log_.push_back({loop_.now(), from, to, cls, frame.size(), dropped});
  if (dropped) {
    ++stats_.dropped;
    return false;
  }

  SimTime delay = m.base;
  if (m.jitter > 0) delay += std::uniform_int_distribution<SimTime>(0, m.jitter)(rng_);
  SimTime& tail = link_tail_[{from, to}];
  const SimTime deliver_at = std::max(loop_.now() + delay, tail);
  tail = deliver_at;
  loop_.at(deliver_at, [this, frame = std::move(frame), handler = std::move(on_deliver)]() {
    ++stats_.delivered;
    if (handler) handler(frame);
  });
  return true;
}

}  // namespace bsmd
