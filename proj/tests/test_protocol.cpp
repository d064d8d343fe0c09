#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "vdga/protocol.hpp"

using namespace vdga;

namespace {

Frame data_frame(FrameKind kind, std::uint16_t seq, std::uint16_t total, std::size_t bytes) {
  Frame f;
  f.kind = kind;
  f.sender = 3;
  f.seq = seq;
  f.total = total;
  f.payload.assign(bytes, 0xab);
  return f;
}

const TimerRequest* find_timer(const Outbox& out, TimerKind kind) {
  for (const auto& t : out.timers)
    if (t.kind == kind) return &t;
  return nullptr;
}

SessionConfig small_session(std::size_t g_nodes) {
  SessionConfig cfg;
  cfg.ga.pop_size = 18;
  cfg.ga.max_generations = 30;
  cfg.g_nodes = g_nodes;
  return cfg;
}

Frame result_frame(std::uint8_t from, std::uint16_t units, std::size_t n) {
  Chromosome c;
  for (std::size_t i = 0; i < n; ++i) c.genes.push_back({1.0 + i, 2.0});
  Frame f;
  f.kind = FrameKind::RF;
  f.sender = from;
  f.payload = encode_result({c, units});
  return f;
}

}  // namespace

TEST(Codec, AckIsHeaderOnly) {
  EXPECT_EQ(encode_frame(make_ack(2, FrameKind::SPF, 5, 7)).size(), 8u);
}

TEST(Codec, SpfCapacityForTwentyNodes) {
  EXPECT_EQ(chromosomes_per_frame(20), 3u);
  Chromosome c;
  for (int i = 0; i < 20; ++i) c.genes.push_back({i * 1.5, 80.0 - i});
  const std::vector<Chromosome> sub(3, c);
  const auto frames = segment_subpopulation(sub, 20);
  ASSERT_EQ(frames.size(), 1u);
  EXPECT_EQ(frames[0].payload.size(), 240u);
  EXPECT_EQ(encode_frame(frames[0]).size(), 248u);
}

TEST(Codec, ChromosomeSizeLimit) {
  EXPECT_EQ(chromosomes_per_frame(60), 1u);
  EXPECT_THROW(chromosomes_per_frame(61), ChromosomeTooLarge);
  EXPECT_THROW(chromosomes_per_frame(0), ChromosomeTooLarge);
  Chromosome big;
  big.genes.assign(61, {1, 1});
  EXPECT_THROW(encode_result({big, 0}), ChromosomeTooLarge);
}

TEST(Codec, RandomRoundTrips) {
  Rng rng(1);
  for (int k = 0; k < 10000; ++k) {
    Frame f;
    f.kind = static_cast<FrameKind>(1 + rng.index(4));
    f.sender = static_cast<std::uint8_t>(rng.index(256));
    if (f.kind == FrameKind::ACK) {
      f.seq = static_cast<std::uint16_t>(rng.index(65536));
      f.total = static_cast<std::uint16_t>(rng.index(65536));
      f.acked = static_cast<FrameKind>(1 + rng.index(3));
      f.negative = rng.bernoulli(0.5);
    } else {
      f.total = static_cast<std::uint16_t>(1 + rng.index(65535));
      f.seq = static_cast<std::uint16_t>(rng.index(f.total));
      f.payload.resize(rng.index(kMaxPayloadBytes + 1));
      for (auto& b : f.payload) b = static_cast<std::uint8_t>(rng.index(256));
    }
    const auto wire = encode_frame(f);
    ASSERT_LE(wire.size(), kMaxFrameBytes);
    ASSERT_EQ(decode_frame(wire), f);
  }
}

TEST(Codec, MalformedFramesAreRejected) {
  EXPECT_THROW(encode_frame(data_frame(FrameKind::SPF, 0, 1, 243)), PayloadTooLarge);
  auto wire = encode_frame(data_frame(FrameKind::SPF, 0, 1, 10));
  EXPECT_THROW(decode_frame(std::span(wire).first(7)), TruncatedFrame);
  EXPECT_THROW(decode_frame(std::span(wire).first(12)), TruncatedFrame);
  auto bad_kind = wire;
  bad_kind[0] = 9;
  EXPECT_THROW(decode_frame(bad_kind), UnknownKind);
  auto bad_seq = encode_frame(data_frame(FrameKind::RF, 0, 1, 4));
  bad_seq[2] = 1;  // seq 1 of total 1
  EXPECT_THROW(decode_frame(bad_seq), ProtocolViolation);
  auto ack = encode_frame(make_ack(1, FrameKind::RF, 0, 1));
  ack[6] = static_cast<std::uint8_t>(FrameKind::ACK);
  EXPECT_THROW(decode_frame(ack), UnknownKind);
  Frame ack_with_payload = make_ack(1, FrameKind::RF, 0, 1);
  ack_with_payload.payload = {1};
  EXPECT_THROW(encode_frame(ack_with_payload), ProtocolViolation);
  auto oversize = wire;
  oversize[7] = 243;
  EXPECT_THROW(decode_frame(oversize), PayloadTooLarge);
}

TEST(Codec, Coordinates) {
  EXPECT_EQ(encode_coordinate(0.0), 0u);
  EXPECT_EQ(encode_coordinate(80.0), 8000u);
  EXPECT_EQ(encode_coordinate(655.35), 65535u);
  EXPECT_THROW(encode_coordinate(-0.01), CoordinateOutOfRange);
  EXPECT_THROW(encode_coordinate(700), CoordinateOutOfRange);
  Rng rng(2);
  for (int k = 0; k < 1000; ++k) {
    const double v = rng.uniform(0, 80);
    EXPECT_NEAR(decode_coordinate(encode_coordinate(v)), v, 0.005 + 1e-12);
  }
  EXPECT_EQ(encode_coverage(0.9123), 9123u);
  EXPECT_EQ(encode_coverage(1.5), 10000u);
}

TEST(Codec, SegmentationRoundTrip) {
  Rng rng(3);
  for (std::size_t n : {1u, 7u, 20u, 60u}) {
    std::vector<Chromosome> sub;
    const std::size_t count = rng.index(40);
    for (std::size_t i = 0; i < count; ++i) {
      Chromosome c;
      for (std::size_t k = 0; k < n; ++k) c.genes.push_back({rng.uniform(0, 80), rng.uniform(0, 80)});
      sub.push_back(quantize(c));
    }
    const auto frames = segment_subpopulation(sub, n);
    std::vector<std::vector<std::uint8_t>> payloads;
    for (const auto& f : frames) {
      EXPECT_LE(encode_frame(f).size(), kMaxFrameBytes);
      EXPECT_EQ(f.total, frames.size());
      payloads.push_back(f.payload);
    }
    const auto back = reassemble(payloads, n);
    ASSERT_EQ(back.size(), sub.size());
    for (std::size_t i = 0; i < sub.size(); ++i) EXPECT_EQ(back[i], sub[i]);
  }
}

TEST(Codec, ResultRoundTrip) {
  Chromosome c{{{12.34, 56.78}, {0, 80}}};
  const ResultPayload r{c, 9050};
  EXPECT_EQ(decode_result(encode_result(r), 2), r);
  EXPECT_THROW(decode_result(encode_result(r), 3), TruncatedFrame);
}

TEST(Threshold, RequiredResults) {
  EXPECT_EQ(required_results(0.8, 10), 8u);
  EXPECT_EQ(required_results(0.8, 6), 5u);
  EXPECT_EQ(required_results(1.0, 6), 6u);
  EXPECT_EQ(required_results(0.01, 6), 1u);
  EXPECT_EQ(required_results(0.5, 1), 1u);
}

TEST(Timers, StaleTokensAreIgnored) {
  TimerSet t;
  Outbox out;
  t.arm(out, TimerKind::Retransmit, 50);
  t.arm(out, TimerKind::Retransmit, 50);
  ASSERT_EQ(out.timers.size(), 2u);
  EXPECT_FALSE(t.fire(TimerKind::Retransmit, out.timers[0].token));
  EXPECT_TRUE(t.fire(TimerKind::Retransmit, out.timers[1].token));
  EXPECT_FALSE(t.fire(TimerKind::Retransmit, out.timers[1].token));
}

TEST(Sender, StopAndWait) {
  ProtocolTiming timing;
  TimerSet timers;
  ReliableSender s(timing, timers);
  s.push(1, data_frame(FrameKind::SPF, 0, 2, 4));
  s.push(1, data_frame(FrameKind::SPF, 1, 2, 4));
  Outbox out;
  s.pump(out);
  ASSERT_EQ(out.frames.size(), 1u);
  EXPECT_EQ(out.frames[0].frame.seq, 0);
  Outbox again;
  s.pump(again);
  EXPECT_TRUE(again.frames.empty());  // one frame in flight
  Outbox wrong;
  EXPECT_FALSE(s.on_ack(wrong, 1, make_ack(1, FrameKind::SPF, 1, 2)));
  EXPECT_FALSE(s.on_ack(wrong, 2, make_ack(2, FrameKind::SPF, 0, 2)));
  Outbox next;
  EXPECT_TRUE(s.on_ack(next, 1, make_ack(1, FrameKind::SPF, 0, 2)));
  ASSERT_EQ(next.frames.size(), 1u);
  EXPECT_EQ(next.frames[0].frame.seq, 1);
}

TEST(Sender, RetriesThenDefersToBackOfQueue) {
  ProtocolTiming timing;
  TimerSet timers;
  ReliableSender s(timing, timers);
  s.push(1, data_frame(FrameKind::SPF, 0, 2, 4));
  s.push(2, data_frame(FrameKind::SPF, 0, 2, 4));
  Outbox out;
  s.pump(out);
  std::size_t sends = out.frames.size();
  for (int attempt = 0; attempt < timing.max_retries; ++attempt) {
    const auto* t = find_timer(out, TimerKind::Retransmit);
    ASSERT_NE(t, nullptr);
    EXPECT_EQ(t->delay_ms, timing.ack_timeout_ms);
    ASSERT_TRUE(timers.fire(TimerKind::Retransmit, t->token));
    out = {};
    s.on_retransmit_timer(out);
    ASSERT_EQ(out.frames.size(), 1u);
    EXPECT_EQ(out.frames[0].to, 1);
    sends += 1;
  }
  EXPECT_EQ(sends, 1u + timing.max_retries);
  const auto* t = find_timer(out, TimerKind::Retransmit);
  ASSERT_TRUE(timers.fire(TimerKind::Retransmit, t->token));
  out = {};
  s.on_retransmit_timer(out);
  EXPECT_TRUE(out.frames.empty());
  ASSERT_EQ(out.notes.size(), 1u);
  EXPECT_EQ(out.notes[0].event, "giveup");
  const auto* backoff = find_timer(out, TimerKind::Backoff);
  ASSERT_NE(backoff, nullptr);
  EXPECT_EQ(backoff->delay_ms, timing.backoff_ms);
  out = {};
  s.on_backoff_timer(out);
  ASSERT_EQ(out.frames.size(), 1u);
  EXPECT_EQ(out.frames[0].to, 2);  // the stuck frame went to the back
  EXPECT_TRUE(s.pending(1, FrameKind::SPF, 0));
}

TEST(VNodeMachine, DistributesSequentially) {
  const SessionConfig cfg = small_session(2);
  VNode v(cfg);
  Outbox out = v.start(0);
  ASSERT_EQ(out.frames.size(), 1u);
  EXPECT_EQ(out.frames[0].to, 1);
  EXPECT_EQ(v.phase(), VPhase::Distributing);
  // 9 individuals per island, 3 per frame
  std::vector<std::pair<int, int>> order;
  order.emplace_back(out.frames[0].to, out.frames[0].frame.seq);
  for (int k = 0; k < 5; ++k) {
    const auto& sent = out.frames.back();
    out = v.on_frame(10, sent.to, make_ack(sent.to, FrameKind::SPF, sent.frame.seq, sent.frame.total));
    ASSERT_EQ(out.frames.size(), 1u);
    order.emplace_back(out.frames[0].to, out.frames[0].frame.seq);
  }
  const std::vector<std::pair<int, int>> expected{{1, 0}, {1, 1}, {1, 2}, {2, 0}, {2, 1}, {2, 2}};
  EXPECT_EQ(order, expected);
  const auto& last = out.frames.back();
  out = v.on_frame(20, 2, make_ack(2, FrameKind::SPF, last.frame.seq, last.frame.total));
  EXPECT_EQ(v.phase(), VPhase::Collecting);
}

TEST(VNodeMachine, ThresholdFiresAtEighthOfTen) {
  const SessionConfig cfg = [] {
    auto c = small_session(10);
    c.ga.pop_size = 20;
    return c;
  }();
  VNode v(cfg);
  v.start(0);
  for (std::uint8_t node = 1; node <= 10; ++node) {
    v.on_frame(100 + node, node, result_frame(node, static_cast<std::uint16_t>(5000 + node), 20));
    if (node < 8) {
      EXPECT_FALSE(v.decision().has_value()) << "after " << int(node);
    } else {
      ASSERT_TRUE(v.decision().has_value());
      EXPECT_EQ(v.decision()->first, 8);  // best of the first eight
      EXPECT_EQ(*v.decision_time(), 108);
    }
  }
  EXPECT_EQ(v.results().size(), 8u);  // late results are acknowledged but not recorded
}

TEST(VNodeMachine, DuplicateResultsKeepFirstCopy) {
  const SessionConfig cfg = small_session(3);
  VNode v(cfg);
  v.start(0);
  Outbox out = v.on_frame(5, 2, result_frame(2, 4000, 20));
  ASSERT_FALSE(out.frames.empty());
  EXPECT_EQ(out.frames[0].frame.kind, FrameKind::ACK);
  out = v.on_frame(6, 2, result_frame(2, 9000, 20));
  EXPECT_EQ(out.frames[0].frame.kind, FrameKind::ACK);  // re-acknowledged
  EXPECT_EQ(v.results().size(), 1u);
  EXPECT_EQ(v.results().at(2).coverage_units, 4000);
}

TEST(VNodeMachine, TiesGoToLowestNode) {
  SessionConfig cfg = small_session(3);
  cfg.result_threshold = 1.0;
  VNode v(cfg);
  v.start(0);
  v.on_frame(1, 3, result_frame(3, 7000, 20));
  v.on_frame(2, 2, result_frame(2, 7000, 20));
  v.on_frame(3, 1, result_frame(1, 6000, 20));
  ASSERT_TRUE(v.decision().has_value());
  EXPECT_EQ(v.decision()->first, 2);
  EXPECT_EQ(v.phase(), VPhase::Disseminating);
}

TEST(GNodeMachine, ReassemblesOutOfOrderAndRunsGa) {
  SessionConfig cfg = small_session(1);
  cfg.ga.pop_size = 12;
  const Population pop = wire_population(cfg.ga, cfg.roi);
  const auto frames = segment_subpopulation(pop.individuals, cfg.ga.n_objects);
  ASSERT_EQ(frames.size(), 4u);
  GNode g(cfg, 1);
  const std::vector<int> order{2, 0, 2, 3, 1};
  Outbox out;
  for (int i : order) {
    out = g.on_frame(10, kCoordinatorId, frames[i]);
    ASSERT_EQ(out.frames.size(), 1u);
    EXPECT_EQ(out.frames[0].frame.kind, FrameKind::ACK);
    EXPECT_EQ(out.frames[0].frame.seq, frames[i].seq);
  }
  ASSERT_TRUE(g.received().has_value());
  EXPECT_EQ(g.received()->individuals, pop.individuals);
  EXPECT_EQ(g.phase(), GPhase::Optimizing);
  const auto* done = find_timer(out, TimerKind::GaDone);
  ASSERT_NE(done, nullptr);
  EXPECT_EQ(done->delay_ms, static_cast<std::int64_t>(g.ga_result()->generations) * cfg.ms_per_generation);

  out = g.on_timer(10 + done->delay_ms, TimerKind::GaDone, done->token);
  ASSERT_EQ(out.frames.size(), 1u);
  const Frame rf = out.frames[0].frame;
  EXPECT_EQ(rf.kind, FrameKind::RF);
  const auto result = decode_result(rf.payload, cfg.ga.n_objects);
  EXPECT_EQ(result.coverage_units, encode_coverage(g.ga_result()->best_coverage));
  EXPECT_EQ(result.chromosome, quantize(g.ga_result()->best));

  // A query while the result is outstanding does not duplicate it.
  out = g.on_frame(20, kCoordinatorId, make_ack(0, FrameKind::RF, 0, 0, true));
  EXPECT_TRUE(out.frames.empty());
  g.on_frame(30, kCoordinatorId, make_ack(0, FrameKind::RF, 0, 1));
  EXPECT_EQ(g.phase(), GPhase::AwaitingFPF);

  Frame fpf;
  fpf.kind = FrameKind::FPF;
  fpf.payload = rf.payload;
  out = g.on_frame(40, kCoordinatorId, fpf);
  EXPECT_EQ(g.phase(), GPhase::Done);
  ASSERT_TRUE(g.final_deployment().has_value());
  EXPECT_EQ(g.final_deployment()->chromosome, result.chromosome);
  g.reset();
  EXPECT_EQ(g.phase(), GPhase::Done);  // the final deployment survives a reset
}

TEST(GNodeMachine, ReassemblyTimeoutRequestsMissingSegments) {
  SessionConfig cfg = small_session(1);
  cfg.ga.pop_size = 9;
  const Population pop = wire_population(cfg.ga, cfg.roi);
  const auto frames = segment_subpopulation(pop.individuals, cfg.ga.n_objects);
  GNode g(cfg, 1);
  Outbox out = g.on_frame(0, kCoordinatorId, frames[1]);
  const auto* t = find_timer(out, TimerKind::Reassembly);
  ASSERT_NE(t, nullptr);
  EXPECT_EQ(t->delay_ms, cfg.timing.reassembly_timeout_ms);
  out = g.on_timer(200, TimerKind::Reassembly, t->token);
  std::vector<int> nacked;
  for (const auto& o : out.frames) {
    EXPECT_TRUE(o.frame.negative);
    nacked.push_back(o.frame.seq);
  }
  EXPECT_EQ(nacked, (std::vector<int>{0, 2}));
}

TEST(GNodeMachine, RestartAfterResetAsksForEverything) {
  SessionConfig cfg = small_session(1);
  GNode g(cfg, 1);
  g.reset();
  const Outbox out = g.restart(0);
  ASSERT_EQ(out.frames.size(), 1u);
  EXPECT_TRUE(out.frames[0].frame.negative);
  EXPECT_EQ(out.frames[0].frame.acked, FrameKind::SPF);
  EXPECT_EQ(out.frames[0].frame.total, 0);
}

TEST(GNodeMachine, IgnoresPeerFrames) {
  GNode g(small_session(2), 1);
  const Outbox out = g.on_frame(0, 2, data_frame(FrameKind::SPF, 0, 1, 80));
  EXPECT_TRUE(out.frames.empty());
  ASSERT_EQ(out.notes.size(), 1u);
  EXPECT_EQ(out.notes[0].event, "violation");
}
