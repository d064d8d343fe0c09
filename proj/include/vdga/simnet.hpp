#pragma once

// Deterministic discrete-event network hosting one coordinator and N
// workers. Time is integer milliseconds; events at equal times run in
// insertion order. Frames travel as encoded wire bytes.

#include <chrono>
#include <cstdint>
#include <deque>
#include <optional>
#include <ostream>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vdga/errors.hpp"
#include "vdga/protocol.hpp"
#include "vdga/rng.hpp"

namespace vdga {

struct LinkModel {
  std::int64_t latency_ms = 10;
  double loss_prob = 0.0;
  std::uint64_t rng_seed = 7;

  void validate() const {
    if (latency_ms < 0) throw InvalidConfig("latency must be >= 0");
    if (!(loss_prob >= 0.0 && loss_prob <= 1.0)) throw InvalidConfig("loss_prob must be in [0,1]");
  }
};

enum class EventType { Deliver, Timer, Reset, Restart };

struct SimEvent {
  std::int64_t time = 0;
  EventType type = EventType::Reset;
  std::uint8_t node = 0;  // receiver for Deliver, owner for Timer/Reset/Restart
  // Deliver
  std::uint8_t from = 0;
  std::vector<std::uint8_t> wire;
  bool lost = false;
  // Timer
  TimerKind timer = TimerKind::Retransmit;
  std::uint64_t token = 0;

  static SimEvent reset(std::int64_t t, std::uint8_t node) {
    return {t, EventType::Reset, node, 0, {}, false, TimerKind::Retransmit, 0};
  }
  static SimEvent restart(std::int64_t t, std::uint8_t node) {
    return {t, EventType::Restart, node, 0, {}, false, TimerKind::Retransmit, 0};
  }
};

// One line of the session transcript.
struct LogRecord {
  std::int64_t time = 0;
  std::string event;  // send, deliver, drop, reset, restart, giveup, violation, timeout, decide, done
  int from = -1;
  int to = -1;
  std::string kind;
  int seq = -1;
  int total = -1;
  std::size_t bytes = 0;
  std::string detail;
};

inline constexpr const char* kEventLogHeader = "time_ms,event,from,to,kind,seq,total,bytes,detail";

inline std::string format_record(const LogRecord& r) {
  std::ostringstream os;
  auto opt = [&](int v) {
    if (v >= 0) os << v;
  };
  os << r.time << ',' << r.event << ',';
  opt(r.from);
  os << ',';
  opt(r.to);
  os << ',' << r.kind << ',';
  opt(r.seq);
  os << ',';
  opt(r.total);
  os << ',' << r.bytes << ',' << r.detail;
  return os.str();
}

inline void write_event_log(std::ostream& os, const std::vector<LogRecord>& log) {
  os << kEventLogHeader << '\n';
  for (const auto& r : log) os << format_record(r) << '\n';
}

inline std::string frame_label(const Frame& f) {
  if (f.kind != FrameKind::ACK) return to_string(f.kind);
  return std::string(f.negative ? "NACK:" : "ACK:") + to_string(f.acked);
}

struct IslandReport {
  std::uint8_t node = 0;
  std::optional<Population> received;
  std::vector<HistoryPoint> history;
  std::size_t generations = 0;
  double best_coverage = 0.0;
  std::int64_t busy_ms = 0;
  bool has_final = false;
};

struct SessionResult {
  Chromosome final_chromosome;
  double decided_coverage = 0.0;  // as reported on the wire, 0.01 % resolution
  double final_coverage = 0.0;    // recomputed for the decoded layout
  std::uint8_t winner = 0;
  std::map<std::uint8_t, ResultPayload> received_results;
  std::int64_t decision_time_ms = 0;
  std::int64_t end_time_ms = 0;
  std::size_t frames_sent = 0;
  std::size_t frames_dropped = 0;
  std::vector<IslandReport> islands;
  std::vector<LogRecord> log;
  double wall_ms = 0.0;  // host time; not part of any deterministic output
};

class Simulation {
public:
  Simulation(SessionConfig cfg, LinkModel link)
      : cfg_(std::move(cfg)), link_(link), loss_rng_(link.rng_seed), vnode_(cfg_) {
    link_.validate();
    cfg_.ga.validate();
    if (cfg_.g_nodes == 0 || cfg_.g_nodes > 255) throw InvalidConfig("g_nodes must be in 1..255");
    chromosomes_per_frame(cfg_.ga.n_objects);
    for (std::size_t i = 1; i <= cfg_.g_nodes; ++i) gnodes_.emplace_back(cfg_, static_cast<std::uint8_t>(i));
  }

  std::int64_t now() const { return now_; }

  void inject(SimEvent ev) {
    if (ev.time < now_) {
      throw EventInPast("event at t=" + std::to_string(ev.time) + " but now is " +
                        std::to_string(now_));
    }
    if (ev.node > cfg_.g_nodes) throw InvalidConfig("event targets unknown node");
    push(std::move(ev));
  }

  // Hard stop for the whole session; beyond it SessionTimeout is raised.
  std::int64_t session_limit_ms() const { return cfg_.timing.collection_timeout_ms * 2; }

  SessionResult run() {
    const auto wall_start = std::chrono::steady_clock::now();
    apply(kCoordinatorId, vnode_.start(now_));
    bool done = vnode_.phase() == VPhase::Done;
    while (!done && !queue_.empty()) {
      Queued q = queue_.top();
      queue_.pop();
      const SimEvent ev = std::move(events_[q.index]);
      now_ = ev.time;
      if (now_ > session_limit_ms()) break;
      dispatch(ev);
      if (vnode_.collection_failed()) {
        throw SessionTimeout("no result collected within " +
                             std::to_string(cfg_.timing.collection_timeout_ms) + " ms");
      }
      done = vnode_.phase() == VPhase::Done;
    }
    if (!done) throw SessionTimeout("session did not finish dissemination by t=" + std::to_string(now_));
    SessionResult result = collect();
    result.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - wall_start).count();
    return result;
  }

  const VNode& coordinator() const { return vnode_; }
  const GNode& worker(std::uint8_t id) const { return gnodes_.at(id - 1u); }

private:
  struct Queued {
    std::int64_t time;
    std::uint64_t order;
    std::size_t index;
    bool operator>(const Queued& o) const {
      return time != o.time ? time > o.time : order > o.order;
    }
  };

  void push(SimEvent ev) {
    events_.push_back(std::move(ev));
    queue_.push({events_.back().time, order_++, events_.size() - 1});
  }

  void log(LogRecord r) { log_.push_back(std::move(r)); }

  void dispatch(const SimEvent& ev) {
    switch (ev.type) {
      case EventType::Deliver: {
        Frame f = decode_frame(ev.wire);
        LogRecord r{now_, "deliver", ev.from, ev.node, frame_label(f), f.seq, f.total, ev.wire.size(), ""};
        if (ev.lost) {
          r.event = "drop";
          r.detail = "loss";
          ++dropped_;
          log(std::move(r));
          return;
        }
        log(std::move(r));
        if (ev.node == kCoordinatorId) {
          apply(ev.node, vnode_.on_frame(now_, ev.from, f));
        } else {
          apply(ev.node, gnodes_[ev.node - 1u].on_frame(now_, ev.from, f));
        }
        return;
      }
      case EventType::Timer:
        if (ev.node == kCoordinatorId) {
          apply(ev.node, vnode_.on_timer(now_, ev.timer, ev.token));
        } else {
          apply(ev.node, gnodes_[ev.node - 1u].on_timer(now_, ev.timer, ev.token));
        }
        return;
      case EventType::Reset:
        log({now_, "reset", -1, ev.node, "", -1, -1, 0, ""});
        if (ev.node == kCoordinatorId) {
          vnode_.reset();
        } else {
          gnodes_[ev.node - 1u].reset();
        }
        return;
      case EventType::Restart:
        log({now_, "restart", -1, ev.node, "", -1, -1, 0, ""});
        if (ev.node == kCoordinatorId) {
          apply(ev.node, vnode_.restart(now_));
        } else {
          apply(ev.node, gnodes_[ev.node - 1u].restart(now_));
        }
        return;
    }
  }

  void apply(std::uint8_t node, Outbox out) {
    for (auto& n : out.notes) log({now_, n.event, node, -1, "", -1, -1, 0, n.detail});
    for (auto& o : out.frames) {
      auto wire = encode_frame(o.frame);
      if (wire.size() > kMaxFrameBytes) throw PayloadTooLarge("wire frame over 250 bytes");
      log({now_, "send", node, o.to, frame_label(o.frame), o.frame.seq, o.frame.total, wire.size(), ""});
      ++sent_;
      SimEvent ev;
      ev.time = now_ + link_.latency_ms;
      ev.type = EventType::Deliver;
      ev.node = o.to;
      ev.from = node;
      ev.wire = std::move(wire);
      ev.lost = link_.loss_prob > 0.0 && loss_rng_.bernoulli(link_.loss_prob);
      push(std::move(ev));
    }
    for (const auto& t : out.timers) {
      SimEvent ev;
      ev.time = now_ + t.delay_ms;
      ev.type = EventType::Timer;
      ev.node = node;
      ev.timer = t.kind;
      ev.token = t.token;
      push(std::move(ev));
    }
  }

  SessionResult collect() const {
    SessionResult r;
    const auto& decision = vnode_.decision();
    r.winner = decision->first;
    r.final_chromosome = decision->second.chromosome;
    r.decided_coverage = decision->second.coverage();
    r.final_coverage = coverage_of(r.final_chromosome, cfg_.ga.radius, cfg_.roi);
    r.received_results = vnode_.results();
    r.decision_time_ms = vnode_.decision_time().value_or(now_);
    r.end_time_ms = now_;
    r.frames_sent = sent_;
    r.frames_dropped = dropped_;
    for (const auto& g : gnodes_) {
      IslandReport ir;
      ir.node = g.id();
      ir.received = g.received();
      if (g.ga_result()) {
        ir.history = g.ga_result()->history;
        ir.generations = g.ga_result()->generations;
        ir.best_coverage = g.ga_result()->best_coverage;
      }
      ir.busy_ms = g.busy_ms();
      ir.has_final = g.final_deployment().has_value();
      r.islands.push_back(std::move(ir));
    }
    r.log = log_;
    return r;
  }

  SessionConfig cfg_;
  LinkModel link_;
  Rng loss_rng_;
  VNode vnode_;
  std::deque<GNode> gnodes_;  // nodes are not movable
  std::vector<SimEvent> events_;
  std::priority_queue<Queued, std::vector<Queued>, std::greater<>> queue_;
  std::uint64_t order_ = 0;
  std::int64_t now_ = 0;
  std::vector<LogRecord> log_;
  std::size_t sent_ = 0;
  std::size_t dropped_ = 0;
};

inline SessionResult run_session(const SessionConfig& cfg, const LinkModel& link,
                                 std::span<const SimEvent> faults = {}) {
  Simulation sim(cfg, link);
  for (const auto& f : faults) sim.inject(f);
  return sim.run();
}

inline SessionResult run_session(std::size_t g_nodes, const GaConfig& ga, const LinkModel& link,
                                 std::span<const SimEvent> faults = {}) {
  SessionConfig cfg;
  cfg.ga = ga;
  cfg.g_nodes = g_nodes;
  return run_session(cfg, link, faults);
}

inline nlohmann::json positions_json(const Chromosome& c) {
  auto arr = nlohmann::json::array();
  for (const auto& p : c.genes) arr.push_back({p.x, p.y});
  return arr;
}

/// Structured session summary (deterministic fields only).
inline nlohmann::json session_summary(const SessionResult& r) {
  nlohmann::json j;
  j["winner"] = r.winner;
  j["decided_coverage"] = r.decided_coverage;
  j["final_coverage"] = r.final_coverage;
  j["final_positions"] = positions_json(r.final_chromosome);
  j["decision_time_ms"] = r.decision_time_ms;
  j["end_time_ms"] = r.end_time_ms;
  j["frames_sent"] = r.frames_sent;
  j["frames_dropped"] = r.frames_dropped;
  auto results = nlohmann::json::object();
  for (const auto& [node, res] : r.received_results) results[std::to_string(node)] = res.coverage();
  j["received_results"] = results;
  auto islands = nlohmann::json::array();
  for (const auto& i : r.islands) {
    islands.push_back({{"node", i.node},
                       {"generations", i.generations},
                       {"best_coverage", i.best_coverage},
                       {"busy_ms", i.busy_ms},
                       {"received_final", i.has_final}});
  }
  j["islands"] = islands;
  return j;
}

}  // namespace vdga
