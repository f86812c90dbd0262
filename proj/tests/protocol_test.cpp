#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "monolithic_oracle.hpp"
#include "vsplit/protocol.hpp"

namespace vsplit {
namespace {

using testing::MonolithicModel;
using testing::random_batch;
using testing::small_config;

TEST(BuildSimulationTest, TwoClientBankShapeBuilds) {
  SimulationConfig cfg;
  cfg.merge = MergeKind::max;
  cfg.clients = {{{8, 16, 8}, {Activation::relu, Activation::relu}}, {{8, 16, 8}, {Activation::relu, Activation::relu}}};
  cfg.server = {{8, 8}, {Activation::relu}};
  cfg.head = {{8, 2}, {Activation::identity}};
  const auto sim = build_simulation(cfg);
  EXPECT_EQ(sim.parties(), 3u);
  EXPECT_EQ(sim.role_of(0), Role::role0);
  EXPECT_EQ(sim.role_of(1), Role::role3);
  EXPECT_EQ(sim.role_of(2), Role::role1);
  EXPECT_TRUE(sim.client(0).head.has_value());
  EXPECT_FALSE(sim.client(1).head.has_value());
}

TEST(BuildSimulationTest, RejectsBadShapes) {
  auto cfg = small_config(MergeKind::sum, 2);
  cfg.clients[1].dims.back() = 5;
  EXPECT_THROW((void)build_simulation(cfg), ConfigError);

  auto concat = small_config(MergeKind::concat, 2);
  concat.server.dims.front() = 3;
  EXPECT_THROW((void)build_simulation(concat), ConfigError);

  auto head = small_config(MergeKind::max, 2);
  head.head.dims.front() = 9;
  EXPECT_THROW((void)build_simulation(head), ConfigError);

  auto label = small_config(MergeKind::max, 2);
  label.label_client = 2;
  EXPECT_THROW((void)build_simulation(label), ConfigError);
}

TEST(BuildSimulationTest, SameSeedSameParameters) {
  const auto a = build_simulation(small_config(MergeKind::avg, 3));
  const auto b = build_simulation(small_config(MergeKind::avg, 3));
  const auto c = build_simulation(small_config(MergeKind::avg, 3, 4, 3, 4, 3, 43));
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(a.client(k).model, b.client(k).model);
  EXPECT_EQ(a.server().model, b.server().model);
  EXPECT_EQ(a.head(), b.head());
  EXPECT_FALSE(a.server().model == c.server().model);
}

TEST(TrainIterationTest, MessageFlowAndCount) {
  auto sim = build_simulation(small_config(MergeKind::max, 4));
  Rng rng(3);
  const auto batch = random_batch(4, 8, 4, 3, rng);
  TrafficLog log(sim.parties());
  const auto res = sim.train_iteration(batch, PresenceMask::all(4), &log);
  ASSERT_EQ(res.messages.size(), 2u * 4 + 2);
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_EQ(res.messages[c].sender, c + 1);
    EXPECT_EQ(res.messages[c].receiver, kServerId);
    EXPECT_EQ(res.messages[c].kind, MessageKind::activation);
  }
  EXPECT_EQ(res.messages[4].sender, kServerId);
  EXPECT_EQ(res.messages[4].receiver, sim.label_party());
  EXPECT_EQ(res.messages[4].kind, MessageKind::activation);
  EXPECT_EQ(res.messages[5].sender, sim.label_party());
  EXPECT_EQ(res.messages[5].receiver, kServerId);
  EXPECT_EQ(res.messages[5].kind, MessageKind::gradient);
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_EQ(res.messages[6 + c].receiver, c + 1);
    EXPECT_EQ(res.messages[6 + c].kind, MessageKind::gradient);
  }
  for (const auto& m : res.messages) {
    EXPECT_EQ(m.byte_size, m.payload.rows() * m.payload.cols() * 4);
  }
  EXPECT_EQ(log.messages(), 10u);
  EXPECT_EQ(log.total_sent(), log.total_received());
  EXPECT_EQ(res.updated_parties, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
}

TEST(TrainIterationTest, AbsentClientIsUntouched) {
  auto sim = build_simulation(small_config(MergeKind::max, 4));
  Rng rng(5);
  const auto batch = random_batch(4, 8, 4, 3, rng);
  const auto before = sim.client(2).model;
  const auto before_other = sim.client(3).model;
  const auto res = sim.train_iteration(batch, PresenceMask({true, true, false, true}));
  EXPECT_EQ(res.messages.size(), 2u * 3 + 2);
  EXPECT_EQ(sim.client(2).model, before);
  EXPECT_FALSE(sim.client(3).model == before_other);
  for (const auto& m : res.messages) {
    EXPECT_NE(m.sender, 3u);
    EXPECT_NE(m.receiver, 3u);
  }
}

TEST(TrainIterationTest, ProtocolErrors) {
  auto sim = build_simulation(small_config(MergeKind::concat, 3));
  Rng rng(1);
  auto batch = random_batch(3, 4, 4, 3, rng);
  EXPECT_THROW((void)sim.train_iteration(batch, PresenceMask({true, false, true})), StragglerError);
  batch.labels.clear();
  EXPECT_THROW((void)sim.train_iteration(batch, PresenceMask::all(3)), ProtocolError);
  auto max_sim = build_simulation(small_config(MergeKind::max, 3));
  auto b2 = random_batch(3, 4, 4, 3, rng);
  EXPECT_THROW((void)max_sim.train_iteration(b2, PresenceMask({false, false, false})), ProtocolError);
}

TEST(TrainIterationTest, MatchesMonolithicComposition) {
  for (const auto kind : kAllMergeKinds) {
    auto sim = build_simulation(small_config(kind, 3));
    MonolithicModel mono(sim);
    Rng rng(9);
    for (int step = 0; step < 5; ++step) {
      const auto batch = random_batch(3, 8, 4, 3, rng);
      const auto mask = kind == MergeKind::concat ? PresenceMask::all(3)
                                                   : PresenceMask({step % 3 != 0, true, step % 2 == 0});
      const double simulated = sim.train_iteration(batch, mask).loss;
      const double reference = mono.step(batch.inputs, batch.labels, mask);
      EXPECT_LE(std::abs(simulated - reference), 1e-12 * std::abs(reference)) << to_string(kind);
    }
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(sim.client(c).model, mono.client(c)) << to_string(kind);
    EXPECT_EQ(sim.server().model, mono.server());
    EXPECT_EQ(sim.head(), mono.head());
  }
}

TEST(ApplyDropTest, ModesAndErrors) {
  DropSchedule none;
  EXPECT_EQ(apply_drop(none, 3, 4), PresenceMask::all(4));

  DropSchedule one{Phase::train, DropMode::fixed_count, 1, 0.0, 11, true};
  for (std::uint64_t it = 0; it < 200; ++it) {
    const auto m = apply_drop(one, it, 4, 0);
    EXPECT_EQ(m.count_present(), 3u);
    EXPECT_TRUE(m[0]);
    EXPECT_EQ(m, apply_drop(one, it, 4, 0));
  }

  DropSchedule too_many{Phase::train, DropMode::fixed_count, 4, 0.0, 1, false};
  EXPECT_THROW((void)apply_drop(too_many, 0, 4), ConfigError);

  DropSchedule prob{Phase::train, DropMode::probability, 0, 0.9, 5, false};
  for (std::uint64_t it = 0; it < 500; ++it) EXPECT_GE(apply_drop(prob, it, 3).count_present(), 1u);
  prob.probability = 1.0;
  EXPECT_THROW((void)apply_drop(prob, 0, 3), ConfigError);
}

TEST(ApplyDropTest, FixedCountFrequencies) {
  const std::size_t k = 4;
  for (std::size_t count = 1; count < k; ++count) {
    DropSchedule d{Phase::train, DropMode::fixed_count, count, 0.0, 2024, false};
    std::vector<int> absent(k, 0);
    const int iterations = 10000;
    for (int it = 0; it < iterations; ++it) {
      const auto m = apply_drop(d, static_cast<std::uint64_t>(it), k);
      ASSERT_EQ(m.count_present(), k - count);
      for (std::size_t c = 0; c < k; ++c) absent[c] += m[c] ? 0 : 1;
    }
    for (std::size_t c = 0; c < k; ++c) {
      EXPECT_NEAR(absent[c] / static_cast<double>(iterations), static_cast<double>(count) / k, 0.02);
    }
  }
}

SplitDataset blob_split(std::size_t n, std::size_t k, std::uint64_t seed, double separation = 6.0) {
  BlobSpec spec;
  spec.n_samples = n;
  spec.n_features = 4 * k;
  spec.n_classes = 2;
  spec.informative_per_client.assign(k, 2);
  spec.separation = separation;
  Rng rng(seed);
  const auto ds = synth_blobs(spec, rng);
  return vertical_split(ds, make_contiguous_plan(ds.n_features(), k));
}

TEST(RunTrainingTest, ConcatLearnsSeparableBlobs) {
  const auto data = blob_split(300, 2, 1);
  auto sim = build_simulation(small_config(MergeKind::concat, 2, 4, 3, 4, 2));
  TrainOptions opt;
  opt.epochs = 50;
  opt.batch_size = 32;
  const auto res = run_training(sim, data, data, opt);
  ASSERT_EQ(res.epochs.size(), 50u);
  EXPECT_GE(res.epochs.back().train.accuracy, 0.95);
}

TEST(RunTrainingTest, TrafficMatchesByteFormula) {
  const std::size_t n = 103;  // short final batch
  const auto data = blob_split(n, 3, 2);
  auto cfg = small_config(MergeKind::concat, 3, 4, 3, 5, 2);
  cfg.clients[1].dims = {4, 6, 2};
  cfg.clients[1].activations = {Activation::relu, Activation::tanh};
  cfg.clients[2].dims = {4, 5};
  cfg.server.dims.front() = 3 + 2 + 5;
  cfg.label_client = 1;
  cfg.wire_element_size = 4;
  auto sim = build_simulation(cfg);
  TrainOptions opt;
  opt.epochs = 2;
  opt.batch_size = 16;
  const auto res = run_training(sim, data, data, opt);

  const std::vector<std::uint64_t> cut{3, 2, 5};
  const std::uint64_t server_out = 5;
  const std::uint64_t e = 4;
  for (const auto& rec : res.epochs) {
    const auto& log = rec.train_traffic;
    std::uint64_t client_sent_total = 0;
    std::uint64_t client_received_total = 0;
    for (std::size_t c = 0; c < 3; ++c) {
      std::uint64_t sent = n * cut[c] * e;
      std::uint64_t received = n * cut[c] * e;
      if (c == cfg.label_client) {
        sent += n * server_out * e;
        received += n * server_out * e;
      }
      EXPECT_EQ(log.sent(c + 1), sent);
      EXPECT_EQ(log.received(c + 1), received);
      client_sent_total += log.sent(c + 1);
      client_received_total += log.received(c + 1);
    }
    EXPECT_EQ(log.received(kServerId), client_sent_total);
    EXPECT_EQ(log.sent(kServerId), client_received_total);
    EXPECT_EQ(log.total_sent(), log.total_received());
    // ceil(103 / 16) = 7 iterations of 2K + 2 messages
    EXPECT_EQ(log.messages(), 7u * 8);
    EXPECT_EQ(rec.eval_traffic.gradient_messages(), 0u);
  }
}

TEST(RunTrainingTest, DeterministicUnderSeed) {
  const auto data = blob_split(120, 3, 4);
  auto run = [&] {
    auto sim = build_simulation(small_config(MergeKind::avg, 3, 4, 3, 4, 2));
    TrainOptions opt;
    opt.epochs = 3;
    opt.batch_size = 10;
    opt.shuffle_seed = 99;
    opt.train_drop = {Phase::train, DropMode::probability, 0, 0.3, 7, true};
    return run_training(sim, data, data, opt);
  };
  const auto a = run();
  const auto b = run();
  for (std::size_t e = 0; e < 3; ++e) {
    EXPECT_EQ(a.epochs[e].train.loss, b.epochs[e].train.loss);
    EXPECT_EQ(a.epochs[e].test.accuracy, b.epochs[e].test.accuracy);
    EXPECT_EQ(a.epochs[e].train_traffic, b.epochs[e].train_traffic);
  }
}

TEST(RunTrainingTest, RejectsBadOptions) {
  const auto data = blob_split(40, 2, 4);
  auto sim = build_simulation(small_config(MergeKind::max, 2, 4, 3, 4, 2));
  TrainOptions opt;
  opt.epochs = 0;
  EXPECT_THROW((void)run_training(sim, data, data, opt), ConfigError);
  opt.epochs = 1;
  opt.batch_size = 0;
  EXPECT_THROW((void)run_training(sim, data, data, opt), ConfigError);
}

TEST(EvaluateWithDropTest, NoDropMatchesFinalTestMetricsAndSendsNoGradients) {
  const auto train = blob_split(160, 4, 6);
  const auto test = blob_split(80, 4, 7);
  auto sim = build_simulation(small_config(MergeKind::max, 4, 4, 3, 4, 2));
  TrainOptions opt;
  opt.epochs = 3;
  opt.batch_size = 16;
  const auto res = run_training(sim, train, test, opt);
  const auto snapshot = sim.server().model;
  TrafficLog log(sim.parties());
  const auto report = evaluate_with_drop(sim, test, DropSchedule{Phase::test}, 256, &log);
  EXPECT_EQ(report.accuracy, res.epochs.back().test.accuracy);
  EXPECT_EQ(report.f1, res.epochs.back().test.f1);
  EXPECT_EQ(log.gradient_messages(), 0u);
  EXPECT_GT(log.activation_messages(), 0u);
  EXPECT_EQ(sim.server().model, snapshot);

  const DropSchedule drop{Phase::test, DropMode::fixed_count, 2, 0.0, 3, true};
  TrafficLog dropped(sim.parties());
  (void)evaluate_with_drop(sim, test, drop, 16, &dropped);
  // 5 batches, each with 2 present feature holders plus the server hop
  EXPECT_EQ(dropped.activation_messages(), 5u * 3);
}

}  // namespace
}  // namespace vsplit
