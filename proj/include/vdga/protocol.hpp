#pragma once

// Coordinator/worker exchange protocol.
//
// Wire image of every frame (little-endian, at most 250 bytes):
//
//   offset size field
//   0      1    kind        1 = SPF, 2 = RF, 3 = FPF, 4 = ACK
//   1      1    sender id   0 is the coordinator, 1..255 the workers
//   2      2    seq         segment index
//   4      2    total       segment count
//   6      1    ack info    ACK only: bits 0-6 acked kind, bit 7 negative
//   7      1    length      payload bytes, 0..242
//   8      n    payload
//
// Payloads:
//   SPF      k chromosomes back to back, each n x (x:u16, y:u16), 0.01 m units
//   RF, FPF  coverage:u16 in 0.01 % units, then one chromosome
//   ACK      empty. A negative ACK for SPF asks for segment `seq` again; with
//            total == 0 it asks for the whole sub-population (reconnect).
//            A negative ACK for RF with total == 0 is the coordinator's
//            request to repeat a result.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vdga/errors.hpp"
#include "vdga/geometry.hpp"
#include "vdga/optimizer.hpp"
#include "vdga/rng.hpp"
#include "vdga/seeding.hpp"

namespace vdga {

inline constexpr std::size_t kMaxFrameBytes = 250;
inline constexpr std::size_t kHeaderBytes = 8;
inline constexpr std::size_t kMaxPayloadBytes = kMaxFrameBytes - kHeaderBytes;
inline constexpr std::uint8_t kCoordinatorId = 0;

enum class FrameKind : std::uint8_t { SPF = 1, RF = 2, FPF = 3, ACK = 4 };

inline const char* to_string(FrameKind k) {
  switch (k) {
    case FrameKind::SPF: return "SPF";
    case FrameKind::RF: return "RF";
    case FrameKind::FPF: return "FPF";
    case FrameKind::ACK: return "ACK";
  }
  return "?";
}

struct Frame {
  FrameKind kind = FrameKind::ACK;
  std::uint8_t sender = 0;
  std::uint16_t seq = 0;
  std::uint16_t total = 1;
  // ACK frames only.
  FrameKind acked = FrameKind::ACK;
  bool negative = false;
  std::vector<std::uint8_t> payload;

  friend bool operator==(const Frame&, const Frame&) = default;
};

inline Frame make_ack(std::uint8_t sender, FrameKind acked, std::uint16_t seq,
                      std::uint16_t total, bool negative = false) {
  Frame f;
  f.kind = FrameKind::ACK;
  f.sender = sender;
  f.seq = seq;
  f.total = total;
  f.acked = acked;
  f.negative = negative;
  return f;
}

inline bool known_kind(std::uint8_t k) { return k >= 1 && k <= 4; }

inline std::vector<std::uint8_t> encode_frame(const Frame& f) {
  if (f.payload.size() > kMaxPayloadBytes) {
    throw PayloadTooLarge(std::to_string(f.payload.size()) + " bytes exceeds " +
                          std::to_string(kMaxPayloadBytes));
  }
  if (f.kind == FrameKind::ACK && !f.payload.empty())
    throw ProtocolViolation("ACK frames carry no payload");
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + f.payload.size());
  out.push_back(static_cast<std::uint8_t>(f.kind));
  out.push_back(f.sender);
  out.push_back(static_cast<std::uint8_t>(f.seq & 0xff));
  out.push_back(static_cast<std::uint8_t>(f.seq >> 8));
  out.push_back(static_cast<std::uint8_t>(f.total & 0xff));
  out.push_back(static_cast<std::uint8_t>(f.total >> 8));
  std::uint8_t ack = 0;
  if (f.kind == FrameKind::ACK) {
    ack = static_cast<std::uint8_t>(f.acked) | (f.negative ? 0x80 : 0x00);
  }
  out.push_back(ack);
  out.push_back(static_cast<std::uint8_t>(f.payload.size()));
  out.insert(out.end(), f.payload.begin(), f.payload.end());
  return out;
}

inline Frame decode_frame(std::span<const std::uint8_t> wire) {
  if (wire.size() < kHeaderBytes) throw TruncatedFrame("frame shorter than the 8-byte header");
  if (!known_kind(wire[0])) throw UnknownKind("kind byte " + std::to_string(wire[0]));
  const std::size_t len = wire[7];
  if (len > kMaxPayloadBytes) throw PayloadTooLarge("declared payload " + std::to_string(len));
  if (wire.size() != kHeaderBytes + len) {
    throw TruncatedFrame("wire length " + std::to_string(wire.size()) + " != header + " +
                         std::to_string(len));
  }
  Frame f;
  f.kind = static_cast<FrameKind>(wire[0]);
  f.sender = wire[1];
  f.seq = static_cast<std::uint16_t>(wire[2] | (wire[3] << 8));
  f.total = static_cast<std::uint16_t>(wire[4] | (wire[5] << 8));
  if (f.kind == FrameKind::ACK) {
    if (len != 0) throw ProtocolViolation("ACK frame with payload");
    const std::uint8_t acked = wire[6] & 0x7f;
    if (!known_kind(acked) || acked == static_cast<std::uint8_t>(FrameKind::ACK))
      throw UnknownKind("acked kind " + std::to_string(acked));
    f.acked = static_cast<FrameKind>(acked);
    f.negative = (wire[6] & 0x80) != 0;
  } else {
    if (wire[6] != 0) throw ProtocolViolation("ack info set on a data frame");
    if (f.seq >= f.total) throw ProtocolViolation("seq must be below total");
  }
  f.payload.assign(wire.begin() + static_cast<std::ptrdiff_t>(kHeaderBytes), wire.end());
  return f;
}

// --- payload codec ---------------------------------------------------------

inline constexpr double kCoordinateUnit = 0.01;  // m
inline constexpr double kMaxCoordinate = 655.35;  // m

inline std::uint16_t encode_coordinate(double v) {
  if (!(v >= 0.0) || v > kMaxCoordinate + 1e-9)
    throw CoordinateOutOfRange("coordinate " + std::to_string(v) + " outside [0, 655.35] m");
  return static_cast<std::uint16_t>(std::lround(v / kCoordinateUnit));
}
inline double decode_coordinate(std::uint16_t v) { return v * kCoordinateUnit; }

inline std::uint16_t encode_coverage(double c) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(c, 0.0, 1.0) * 10000.0));
}
inline double decode_coverage(std::uint16_t v) { return v / 10000.0; }

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
inline std::uint16_t get_u16(std::span<const std::uint8_t> in, std::size_t at) {
  return static_cast<std::uint16_t>(in[at] | (in[at + 1] << 8));
}

inline std::size_t chromosome_bytes(std::size_t n_objects) { return 4 * n_objects; }

/// Chromosomes per SPF payload; one result (coverage + chromosome) must also
/// fit a single frame, which caps n at 60.
inline std::size_t chromosomes_per_frame(std::size_t n_objects) {
  if (n_objects == 0 || chromosome_bytes(n_objects) + 2 > kMaxPayloadBytes) {
    throw ChromosomeTooLarge(std::to_string(n_objects) + " objects need " +
                             std::to_string(chromosome_bytes(n_objects)) +
                             " bytes; a frame payload holds " + std::to_string(kMaxPayloadBytes));
  }
  return kMaxPayloadBytes / chromosome_bytes(n_objects);
}

inline void encode_chromosome(std::vector<std::uint8_t>& out, const Chromosome& c) {
  for (const Point& p : c.genes) {
    put_u16(out, encode_coordinate(p.x));
    put_u16(out, encode_coordinate(p.y));
  }
}

inline Chromosome decode_chromosome(std::span<const std::uint8_t> in, std::size_t n_objects) {
  if (in.size() < chromosome_bytes(n_objects)) throw TruncatedFrame("chromosome cut short");
  Chromosome c;
  c.genes.reserve(n_objects);
  for (std::size_t i = 0; i < n_objects; ++i) {
    c.genes.push_back({decode_coordinate(get_u16(in, 4 * i)),
                       decode_coordinate(get_u16(in, 4 * i + 2))});
  }
  return c;
}

/// Snaps positions to the 0.01 m wire grid.
inline Chromosome quantize(const Chromosome& c) {
  Chromosome q;
  q.genes.reserve(c.size());
  for (const Point& p : c.genes)
    q.genes.push_back({decode_coordinate(encode_coordinate(p.x)),
                       decode_coordinate(encode_coordinate(p.y))});
  return q;
}

struct ResultPayload {
  Chromosome chromosome;
  std::uint16_t coverage_units = 0;  // 0.01 %

  double coverage() const { return decode_coverage(coverage_units); }
  friend bool operator==(const ResultPayload&, const ResultPayload&) = default;
};

inline std::vector<std::uint8_t> encode_result(const ResultPayload& r) {
  chromosomes_per_frame(r.chromosome.size());
  std::vector<std::uint8_t> out;
  put_u16(out, r.coverage_units);
  encode_chromosome(out, r.chromosome);
  return out;
}

inline ResultPayload decode_result(std::span<const std::uint8_t> in, std::size_t n_objects) {
  if (in.size() != 2 + chromosome_bytes(n_objects)) throw TruncatedFrame("result payload size");
  return {decode_chromosome(in.subspan(2), n_objects), get_u16(in, 0)};
}

/// Splits a sub-population into SPF frames of floor(242 / 4n) chromosomes.
inline std::vector<Frame> segment_subpopulation(std::span<const Chromosome> sub,
                                                std::size_t n_objects,
                                                std::uint8_t sender = kCoordinatorId) {
  const std::size_t per_frame = chromosomes_per_frame(n_objects);
  const std::size_t count = std::max<std::size_t>(1, (sub.size() + per_frame - 1) / per_frame);
  if (count > 0xffff) throw PayloadTooLarge("sub-population needs more than 65535 segments");
  std::vector<Frame> frames;
  frames.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    Frame f;
    f.kind = FrameKind::SPF;
    f.sender = sender;
    f.seq = static_cast<std::uint16_t>(s);
    f.total = static_cast<std::uint16_t>(count);
    const std::size_t end = std::min(sub.size(), (s + 1) * per_frame);
    for (std::size_t i = s * per_frame; i < end; ++i) {
      if (sub[i].size() != n_objects) throw LengthMismatch("chromosome length differs from n");
      encode_chromosome(f.payload, sub[i]);
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

/// Inverse of segment_subpopulation over the payloads in seq order.
inline std::vector<Chromosome> reassemble(std::span<const std::vector<std::uint8_t>> payloads,
                                          std::size_t n_objects) {
  const std::size_t bytes = chromosome_bytes(n_objects);
  std::vector<Chromosome> out;
  for (const auto& p : payloads) {
    if (p.size() % bytes != 0) throw TruncatedFrame("SPF payload is not a whole number of chromosomes");
    for (std::size_t at = 0; at < p.size(); at += bytes) {
      out.push_back(decode_chromosome(std::span(p).subspan(at, bytes), n_objects));
    }
  }
  return out;
}

// --- state machines --------------------------------------------------------

struct ProtocolTiming {
  std::int64_t ack_timeout_ms = 50;
  int max_retries = 5;
  std::int64_t backoff_ms = 200;  // pause after a frame exhausts its retries
  std::int64_t reassembly_timeout_ms = 200;
  std::int64_t collection_timeout_ms = 60000;
  std::int64_t requery_ms = 500;
};

enum class TimerKind : std::uint8_t { Retransmit, Backoff, Reassembly, GaDone, Collection, Requery, Reconnect };

struct Outgoing {
  std::uint8_t to = 0;
  Frame frame;
};

struct TimerRequest {
  TimerKind kind;
  std::uint64_t token = 0;
  std::int64_t delay_ms = 0;
};

struct Note {
  std::string event;  // "giveup", "violation", "decide", "done"
  std::string detail;
};

// What a state machine wants done after handling one event.
struct Outbox {
  std::vector<Outgoing> frames;
  std::vector<TimerRequest> timers;
  std::vector<Note> notes;

  void send(std::uint8_t to, Frame f) { frames.push_back({to, std::move(f)}); }
};

// Timer bookkeeping shared by both node roles: a timer event is honoured only
// if its token is the latest one armed for that kind.
class TimerSet {
public:
  void arm(Outbox& out, TimerKind kind, std::int64_t delay_ms) {
    const std::uint64_t token = ++next_;
    live_[kind] = token;
    out.timers.push_back({kind, token, delay_ms});
  }
  void cancel(TimerKind kind) { live_.erase(kind); }
  bool fire(TimerKind kind, std::uint64_t token) {
    auto it = live_.find(kind);
    if (it == live_.end() || it->second != token) return false;
    live_.erase(it);
    return true;
  }
  void clear() { live_.clear(); }

private:
  std::uint64_t next_ = 0;
  std::map<TimerKind, std::uint64_t> live_;
};

// Stop-and-wait sender: one frame in flight, retransmitted after the ACK
// timeout. A frame that exhausts max_retries moves to the back of the queue
// and the sender resumes after a backoff pause.
class ReliableSender {
public:
  ReliableSender(const ProtocolTiming& timing, TimerSet& timers)
      : timing_(&timing), timers_(&timers) {}

  void push(std::uint8_t to, Frame f) { queue_.push_back({to, std::move(f), 0}); }

  bool pending(std::uint8_t to, FrameKind kind, std::uint16_t seq) const {
    return std::any_of(queue_.begin(), queue_.end(), [&](const Item& it) {
      return it.to == to && it.frame.kind == kind && it.frame.seq == seq;
    });
  }
  bool pending_kind(FrameKind kind) const {
    return std::any_of(queue_.begin(), queue_.end(),
                       [&](const Item& it) { return it.frame.kind == kind; });
  }
  bool idle() const { return queue_.empty(); }

  void pump(Outbox& out) {
    if (in_flight_ || paused_ || queue_.empty()) return;
    transmit(out);
  }

  // Returns true if the ACK matched the frame in flight.
  bool on_ack(Outbox& out, std::uint8_t from, const Frame& ack) {
    if (!in_flight_ || queue_.empty()) return false;
    const Item& head = queue_.front();
    if (head.to != from || head.frame.kind != ack.acked || head.frame.seq != ack.seq) return false;
    queue_.pop_front();
    in_flight_ = false;
    timers_->cancel(TimerKind::Retransmit);
    pump(out);
    return true;
  }

  void on_retransmit_timer(Outbox& out) {
    if (!in_flight_ || queue_.empty()) return;
    Item& head = queue_.front();
    if (head.attempts <= timing_->max_retries) {
      transmit(out);
      return;
    }
    out.notes.push_back({"giveup", std::string(to_string(head.frame.kind)) + " to " +
                                       std::to_string(head.to) + " seq " +
                                       std::to_string(head.frame.seq)});
    Item again = std::move(head);
    again.attempts = 0;
    queue_.pop_front();
    queue_.push_back(std::move(again));
    in_flight_ = false;
    paused_ = true;
    timers_->arm(out, TimerKind::Backoff, timing_->backoff_ms);
  }

  void on_backoff_timer(Outbox& out) {
    paused_ = false;
    pump(out);
  }

  template <class Pred>
  void drop_if(Pred pred) {
    if (in_flight_ && !queue_.empty() && pred(queue_.front())) {
      in_flight_ = false;
      timers_->cancel(TimerKind::Retransmit);
    }
    std::erase_if(queue_, pred);
  }

  void clear() {
    queue_.clear();
    in_flight_ = false;
    paused_ = false;
  }

  struct Item {
    std::uint8_t to;
    Frame frame;
    int attempts;
  };

private:
  void transmit(Outbox& out) {
    Item& head = queue_.front();
    ++head.attempts;
    in_flight_ = true;
    out.send(head.to, head.frame);
    timers_->arm(out, TimerKind::Retransmit, timing_->ack_timeout_ms);
  }

  const ProtocolTiming* timing_;
  TimerSet* timers_;
  std::deque<Item> queue_;
  bool in_flight_ = false;
  bool paused_ = false;
};

/// Threshold count of results the coordinator waits for.
inline std::size_t required_results(double threshold, std::size_t g_nodes) {
  const double need = std::ceil(threshold * static_cast<double>(g_nodes) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(need, 1.0)), 1, g_nodes);
}

/// Streams used by a session; the centralized baseline reuses island 0.
inline Rng seeding_rng(std::uint64_t seed) { return Rng::stream(seed, 0x5eed); }
inline Rng island_rng(std::uint64_t seed, std::size_t island) {
  return Rng::stream(seed, 0x15a0000 + island);
}

/// The coordinator's generated population, already on the wire grid.
inline Population wire_population(const GaConfig& cfg, const RegionOfInterest& roi) {
  Rng rng = seeding_rng(cfg.rng_seed);
  Population pop = initial_population(cfg, roi, rng);
  std::vector<Chromosome> snapped;
  snapped.reserve(pop.size());
  for (const auto& c : pop.individuals) snapped.push_back(quantize(c));
  return make_population(std::move(snapped), cfg.radius, roi);
}

struct SessionConfig {
  GaConfig ga;
  RegionOfInterest roi{80.0, 80.0};
  std::size_t g_nodes = 1;
  double result_threshold = 0.8;
  std::int64_t ms_per_generation = 1;
  ProtocolTiming timing;
};

enum class VPhase { Seeding, Distributing, Collecting, Deciding, Disseminating, Done };
enum class GPhase { AwaitingSPF, Reassembling, Optimizing, Reporting, AwaitingFPF, Done };

inline const char* to_string(VPhase p) {
  constexpr const char* names[] = {"Seeding", "Distributing", "Collecting",
                                   "Deciding", "Disseminating", "Done"};
  return names[static_cast<int>(p)];
}
inline const char* to_string(GPhase p) {
  constexpr const char* names[] = {"AwaitingSPF", "Reassembling", "Optimizing",
                                   "Reporting",   "AwaitingFPF",  "Done"};
  return names[static_cast<int>(p)];
}

// Coordinator (V.Node): seeds, distributes sub-populations, collects results
// and disseminates the best one.
class VNode {
public:
  explicit VNode(const SessionConfig& cfg) : cfg_(cfg), sender_(cfg_.timing, timers_) {}
  VNode(const VNode&) = delete;
  VNode& operator=(const VNode&) = delete;

  VPhase phase() const { return phase_; }
  const std::map<std::uint8_t, ResultPayload>& results() const { return results_; }
  const std::optional<std::pair<std::uint8_t, ResultPayload>>& decision() const {
    return decision_;
  }
  std::optional<std::int64_t> decision_time() const { return decision_time_; }
  const Population& population() const { return population_; }
  const std::vector<Population>& islands() const { return islands_; }

  Outbox start(std::int64_t now) {
    Outbox out;
    start_time_ = now;
    seed();
    phase_ = VPhase::Distributing;
    for (std::uint8_t node = 1; node <= cfg_.g_nodes; ++node) {
      for (const Frame& f : segments_[node - 1]) sender_.push(node, f);
    }
    timers_.arm(out, TimerKind::Collection, cfg_.timing.collection_timeout_ms);
    sender_.pump(out);
    return out;
  }

  Outbox on_frame(std::int64_t now, std::uint8_t from, const Frame& f) {
    Outbox out;
    if (f.kind == FrameKind::ACK) {
      handle_ack(out, from, f);
    } else if (f.kind == FrameKind::RF) {
      handle_result(out, now, from, f);
    } else {
      out.notes.push_back({"violation", std::string(to_string(f.kind)) + " sent to coordinator"});
    }
    advance(out, now);
    return out;
  }

  Outbox on_timer(std::int64_t now, TimerKind kind, std::uint64_t token) {
    Outbox out;
    if (!timers_.fire(kind, token)) return out;
    switch (kind) {
      case TimerKind::Retransmit: sender_.on_retransmit_timer(out); break;
      case TimerKind::Backoff: sender_.on_backoff_timer(out); break;
      case TimerKind::Collection:
        if (phase_ == VPhase::Distributing || phase_ == VPhase::Collecting) {
          collection_expired_ = true;
          out.notes.push_back({"timeout", "collection deadline with " +
                                              std::to_string(results_.size()) + " results"});
        }
        break;
      case TimerKind::Requery:
        if (phase_ == VPhase::Collecting || phase_ == VPhase::Distributing) {
          query_missing(out);
          timers_.arm(out, TimerKind::Requery, cfg_.timing.requery_ms);
        }
        break;
      default: break;
    }
    advance(out, now);
    return out;
  }

  // Power loss and reboot: everything but the session configuration is gone.
  // The node stays reachable but passive until restart().
  void reset() {
    timers_.clear();
    sender_.clear();
    results_.clear();
    decision_.reset();
    decision_time_.reset();
    segments_.clear();
    islands_.clear();
    population_ = {};
    collection_expired_ = false;
    phase_ = VPhase::Seeding;
  }

  // Regenerates the (deterministic) population and asks every worker to
  // repeat its result or its missing segments.
  Outbox restart(std::int64_t now) {
    Outbox out;
    if (phase_ != VPhase::Seeding) return out;  // only meaningful after a reset
    seed();
    phase_ = VPhase::Collecting;
    query_missing(out);
    const std::int64_t remaining =
        std::max<std::int64_t>(0, start_time_ + cfg_.timing.collection_timeout_ms - now);
    timers_.arm(out, TimerKind::Collection, remaining);
    timers_.arm(out, TimerKind::Requery, cfg_.timing.requery_ms);
    return out;
  }

  bool collection_failed() const { return collection_expired_ && results_.empty(); }

private:
  void seed() {
    phase_ = VPhase::Seeding;
    population_ = wire_population(cfg_.ga, cfg_.roi);
    islands_ = partition(population_, cfg_.g_nodes);
    segments_.clear();
    for (const auto& island : islands_) {
      segments_.push_back(segment_subpopulation(island.individuals, cfg_.ga.n_objects));
    }
  }

  void query_missing(Outbox& out) {
    for (std::uint8_t node = 1; node <= cfg_.g_nodes; ++node) {
      if (!results_.contains(node)) out.send(node, make_ack(kCoordinatorId, FrameKind::RF, 0, 0, true));
    }
  }

  void handle_ack(Outbox& out, std::uint8_t from, const Frame& f) {
    if (!f.negative) {
      sender_.on_ack(out, from, f);
      return;
    }
    if (f.acked != FrameKind::SPF || from == 0 || from > cfg_.g_nodes) {
      out.notes.push_back({"violation", "unexpected negative ACK"});
      return;
    }
    if (phase_ != VPhase::Distributing && phase_ != VPhase::Collecting) return;
    if (results_.contains(from)) return;
    const auto& segs = segments_[from - 1];
    auto resend = [&](std::uint16_t seq) {
      if (seq < segs.size() && !sender_.pending(from, FrameKind::SPF, seq)) sender_.push(from, segs[seq]);
    };
    if (f.total == 0) {
      for (std::uint16_t s = 0; s < segs.size(); ++s) resend(s);
    } else {
      resend(f.seq);
    }
    sender_.pump(out);
  }

  void handle_result(Outbox& out, std::int64_t now, std::uint8_t from, const Frame& f) {
    (void)now;
    if (from == 0 || from > cfg_.g_nodes) {
      out.notes.push_back({"violation", "RF from unknown node"});
      return;
    }
    ResultPayload result;
    try {
      result = decode_result(f.payload, cfg_.ga.n_objects);
    } catch (const Error& e) {
      out.notes.push_back({"violation", e.what()});
      return;
    }
    out.send(from, make_ack(kCoordinatorId, FrameKind::RF, f.seq, f.total));
    if (phase_ == VPhase::Distributing || phase_ == VPhase::Collecting) {
      results_.try_emplace(from, std::move(result));  // first copy wins
    }
  }

  void advance(Outbox& out, std::int64_t now) {
    if (phase_ == VPhase::Distributing && !sender_.pending_kind(FrameKind::SPF)) {
      phase_ = VPhase::Collecting;
    }
    if ((phase_ == VPhase::Distributing || phase_ == VPhase::Collecting) && !results_.empty() &&
        (results_.size() >= required_results(cfg_.result_threshold, cfg_.g_nodes) ||
         collection_expired_)) {
      decide(out, now);
    }
    if (phase_ == VPhase::Disseminating && !sender_.pending_kind(FrameKind::FPF)) {
      phase_ = VPhase::Done;
      out.notes.push_back({"done", ""});
    }
  }

  void decide(Outbox& out, std::int64_t now) {
    phase_ = VPhase::Deciding;
    decision_time_ = now;
    auto best = results_.begin();
    for (auto it = results_.begin(); it != results_.end(); ++it) {
      if (it->second.coverage_units > best->second.coverage_units) best = it;
    }
    decision_ = *best;
    out.notes.push_back({"decide", "node " + std::to_string(best->first) + " coverage " +
                                       std::to_string(best->second.coverage_units)});
    sender_.drop_if([](const ReliableSender::Item& it) { return it.frame.kind == FrameKind::SPF; });
    timers_.cancel(TimerKind::Requery);
    timers_.cancel(TimerKind::Collection);
    Frame fpf;
    fpf.kind = FrameKind::FPF;
    fpf.sender = kCoordinatorId;
    fpf.seq = 0;
    fpf.total = 1;
    fpf.payload = encode_result(best->second);
    for (std::uint8_t node = 1; node <= cfg_.g_nodes; ++node) sender_.push(node, fpf);
    phase_ = VPhase::Disseminating;
    sender_.pump(out);
  }

  SessionConfig cfg_;
  TimerSet timers_;
  ReliableSender sender_;
  VPhase phase_ = VPhase::Seeding;
  Population population_;
  std::vector<Population> islands_;
  std::vector<std::vector<Frame>> segments_;
  std::map<std::uint8_t, ResultPayload> results_;
  std::optional<std::pair<std::uint8_t, ResultPayload>> decision_;
  std::optional<std::int64_t> decision_time_;
  std::int64_t start_time_ = 0;
  bool collection_expired_ = false;
};

// Worker (G.Node): reassembles its sub-population, evolves it, reports the
// best layout and stores the final deployment.
class GNode {
public:
  GNode(const SessionConfig& cfg, std::uint8_t id)
      : cfg_(cfg), id_(id), sender_(cfg_.timing, timers_) {}
  GNode(const GNode&) = delete;
  GNode& operator=(const GNode&) = delete;

  std::uint8_t id() const { return id_; }
  GPhase phase() const { return phase_; }
  const std::optional<Population>& received() const { return received_; }
  const std::optional<RunResult>& ga_result() const { return ga_result_; }
  const std::optional<ResultPayload>& final_deployment() const { return final_; }
  std::int64_t busy_ms() const { return busy_ms_; }

  Outbox on_frame(std::int64_t now, std::uint8_t from, const Frame& f) {
    Outbox out;
    if (from != kCoordinatorId) {
      out.notes.push_back({"violation", "frame from a peer worker"});
      return out;
    }
    switch (f.kind) {
      case FrameKind::SPF: handle_segment(out, now, f); break;
      case FrameKind::FPF: handle_final(out, f); break;
      case FrameKind::ACK:
        if (f.negative) {
          handle_query(out, f);
        } else if (sender_.on_ack(out, from, f) && f.acked == FrameKind::RF &&
                   phase_ == GPhase::Reporting) {
          phase_ = GPhase::AwaitingFPF;
        }
        break;
      case FrameKind::RF:
        out.notes.push_back({"violation", "RF sent to a worker"});
        break;
    }
    return out;
  }

  Outbox on_timer(std::int64_t now, TimerKind kind, std::uint64_t token) {
    Outbox out;
    if (!timers_.fire(kind, token)) return out;
    switch (kind) {
      case TimerKind::Retransmit: sender_.on_retransmit_timer(out); break;
      case TimerKind::Backoff: sender_.on_backoff_timer(out); break;
      case TimerKind::Reassembly:
        if (phase_ == GPhase::Reassembling) {
          request_missing(out);
          timers_.arm(out, TimerKind::Reassembly, cfg_.timing.reassembly_timeout_ms);
        }
        break;
      case TimerKind::Reconnect:
        if (phase_ == GPhase::AwaitingSPF) {
          out.send(kCoordinatorId, make_ack(id_, FrameKind::SPF, 0, 0, true));
          timers_.arm(out, TimerKind::Reconnect, cfg_.timing.reassembly_timeout_ms);
        }
        break;
      case TimerKind::GaDone:
        if (phase_ == GPhase::Optimizing) report(out);
        break;
      default: break;
    }
    (void)now;
    return out;
  }

  // Power loss. The final deployment, once received, is kept.
  void reset() {
    timers_.clear();
    sender_.clear();
    segments_.clear();
    total_ = 0;
    received_.reset();
    ga_result_.reset();
    phase_ = final_ ? GPhase::Done : GPhase::AwaitingSPF;
  }

  // Reconnect: ask the coordinator for the whole sub-population again.
  Outbox restart(std::int64_t now) {
    (void)now;
    Outbox out;
    if (phase_ == GPhase::AwaitingSPF) {
      out.send(kCoordinatorId, make_ack(id_, FrameKind::SPF, 0, 0, true));
      timers_.arm(out, TimerKind::Reconnect, cfg_.timing.reassembly_timeout_ms);
    }
    return out;
  }

private:
  void handle_segment(Outbox& out, std::int64_t now, const Frame& f) {
    out.send(kCoordinatorId, make_ack(id_, FrameKind::SPF, f.seq, f.total));
    if (phase_ != GPhase::AwaitingSPF && phase_ != GPhase::Reassembling) return;  // duplicate
    if (phase_ == GPhase::AwaitingSPF) {
      total_ = f.total;
      segments_.assign(total_, std::nullopt);
      phase_ = GPhase::Reassembling;
      timers_.cancel(TimerKind::Reconnect);
    } else if (f.total != total_) {
      out.notes.push_back({"violation", "SPF total changed mid-reassembly"});
      return;
    }
    if (!segments_[f.seq]) segments_[f.seq] = f.payload;
    if (std::all_of(segments_.begin(), segments_.end(), [](const auto& s) { return s.has_value(); })) {
      timers_.cancel(TimerKind::Reassembly);
      optimize(out, now);
    } else {
      timers_.arm(out, TimerKind::Reassembly, cfg_.timing.reassembly_timeout_ms);
    }
  }

  void request_missing(Outbox& out) {
    for (std::uint16_t s = 0; s < total_; ++s) {
      if (!segments_[s]) out.send(kCoordinatorId, make_ack(id_, FrameKind::SPF, s, total_, true));
    }
  }

  void optimize(Outbox& out, std::int64_t now) {
    (void)now;
    std::vector<std::vector<std::uint8_t>> payloads;
    payloads.reserve(segments_.size());
    for (auto& s : segments_) payloads.push_back(std::move(*s));
    segments_.clear();
    received_ = make_population(reassemble(payloads, cfg_.ga.n_objects), cfg_.ga.radius, cfg_.roi);
    phase_ = GPhase::Optimizing;
    Rng rng = island_rng(cfg_.ga.rng_seed, id_ - 1u);
    ga_result_ = run(*received_, cfg_.ga, cfg_.roi, rng);
    const std::int64_t cost =
        static_cast<std::int64_t>(ga_result_->generations) * cfg_.ms_per_generation;
    busy_ms_ += cost;
    timers_.arm(out, TimerKind::GaDone, cost);
  }

  void report(Outbox& out) {
    phase_ = GPhase::Reporting;
    queue_result(out);
  }

  void queue_result(Outbox& out) {
    if (!ga_result_ || sender_.pending(kCoordinatorId, FrameKind::RF, 0)) return;
    Frame rf;
    rf.kind = FrameKind::RF;
    rf.sender = id_;
    rf.seq = 0;
    rf.total = 1;
    rf.payload = encode_result({quantize(ga_result_->best), encode_coverage(ga_result_->best_coverage)});
    sender_.push(kCoordinatorId, std::move(rf));
    sender_.pump(out);
  }

  void handle_query(Outbox& out, const Frame& f) {
    if (f.acked != FrameKind::RF) {
      out.notes.push_back({"violation", "unexpected negative ACK at worker"});
      return;
    }
    switch (phase_) {
      case GPhase::AwaitingSPF:
        out.send(kCoordinatorId, make_ack(id_, FrameKind::SPF, 0, 0, true));
        break;
      case GPhase::Reassembling: request_missing(out); break;
      case GPhase::Optimizing: break;  // the result follows when the GA ends
      case GPhase::Reporting:
      case GPhase::AwaitingFPF:
      case GPhase::Done: queue_result(out); break;
    }
  }

  void handle_final(Outbox& out, const Frame& f) {
    ResultPayload r;
    try {
      r = decode_result(f.payload, cfg_.ga.n_objects);
    } catch (const Error& e) {
      out.notes.push_back({"violation", e.what()});
      return;
    }
    out.send(kCoordinatorId, make_ack(id_, FrameKind::FPF, f.seq, f.total));
    final_ = std::move(r);
    // A decision ends local work; drop any result still being reported.
    sender_.drop_if([](const ReliableSender::Item& it) { return it.frame.kind == FrameKind::RF; });
    timers_.cancel(TimerKind::GaDone);
    timers_.cancel(TimerKind::Reassembly);
    timers_.cancel(TimerKind::Reconnect);
    phase_ = GPhase::Done;
  }

  SessionConfig cfg_;
  std::uint8_t id_;
  TimerSet timers_;
  ReliableSender sender_;
  GPhase phase_ = GPhase::AwaitingSPF;
  std::vector<std::optional<std::vector<std::uint8_t>>> segments_;
  std::uint16_t total_ = 0;
  std::optional<Population> received_;
  std::optional<RunResult> ga_result_;
  std::optional<ResultPayload> final_;
  std::int64_t busy_ms_ = 0;
};

}  // namespace vdga
