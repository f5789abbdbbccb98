/*
 * Copyright 2026 The FedLedger Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "fedledger/model.h"

#include <algorithm>
#include <cmath>

#include "fedledger/error.h"
#include "fedledger/random.h"
#include "gtest/gtest.h"

namespace fedledger::model {
namespace {

ModelConfig TinyConfig() {
  ModelConfig c;
  c.in_channels = 2;
  c.window_len = 12;
  c.conv_layers = 1;
  c.conv_filters = 5;
  c.filter_size = 3;
  c.hidden_units = 4;
  c.num_classes = 3;
  return c;
}

std::vector<double> RandomBatch(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.Normal();
  return v;
}

ParameterSet Perturbed(const ParameterSet& p, Rng& rng, double scale) {
  ParameterSet out = p;
  for (std::size_t e = 0; e < out.size(); ++e) {
    for (auto& v : out.mutable_entry(e).values) v += scale * rng.Normal();
  }
  return out;
}

// Central differences of the total loss at `flat_index`.
double NumericPartial(const ParameterSet& params, std::size_t flat_index,
                      std::span<const double> batch, std::span<const int> labels,
                      const ModelConfig& config, const TrainConfig& train,
                      std::span<const double> weights, const ParameterSet* ref,
                      double h) {
  std::vector<double> flat = params.Flatten();
  ParameterSet probe = params;
  flat[flat_index] += h;
  probe.Unflatten(flat);
  const double up = LossAndGrad(probe, batch, labels, config, train, weights, ref).loss;
  flat[flat_index] -= 2 * h;
  probe.Unflatten(flat);
  const double down = LossAndGrad(probe, batch, labels, config, train, weights, ref).loss;
  return (up - down) / (2 * h);
}

data::WindowedDataset ToyShard(std::size_t per_class, std::uint64_t seed) {
  // Class 0 windows are negative, class 1 positive: linearly separable.
  ModelConfig c = TinyConfig();
  Rng rng(seed);
  data::WindowedDataset ds;
  ds.num_channels = c.in_channels;
  ds.window_len = c.window_len;
  ds.stride = c.window_len;
  ds.num_classes = 3;
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const int label = static_cast<int>(i % 2);
    const double level = label == 0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < ds.window_size(); ++j) {
      ds.values.push_back(level + 0.3 * rng.Normal());
    }
    ds.labels.push_back(label);
  }
  return ds;
}

TEST(ModelConfigTest, SequenceLengthAfterValidConvolutions) {
  ModelConfig c;
  c.window_len = 50;
  c.conv_layers = 4;
  c.filter_size = 11;
  EXPECT_EQ(c.SequenceLength(), 10u);
  c.window_len = 40;
  EXPECT_THROW(c.Validate(), Error);
}

TEST(ModelConfigTest, FilterSizeRule) {
  EXPECT_EQ(FilterSizeForSampleRate(50), 11u);
  EXPECT_EQ(FilterSizeForSampleRate(100), 21u);
}

TEST(InitTest, GlorotBoundsAndBiases) {
  ModelConfig c = TinyConfig();
  c.hidden_units = 6;
  c.num_classes = 4;
  auto p = InitGlorot(c, 42);
  const auto& dense = p.Get("dense.weight");
  ASSERT_EQ(dense.shape, (std::vector<std::size_t>{4, 6}));
  const double bound = std::sqrt(6.0 / 10.0);
  EXPECT_NEAR(bound, 0.7746, 1e-4);
  double max_abs = 0.0;
  for (double v : dense.values) max_abs = std::max(max_abs, std::abs(v));
  EXPECT_LE(max_abs, bound);
  EXPECT_GT(max_abs, 0.3 * bound);

  const auto& conv = p.Get("conv0.weight");
  const double conv_bound = std::sqrt(6.0 / (2 * 3 + 5 * 3));
  for (double v : conv.values) EXPECT_LE(std::abs(v), conv_bound);
  const double ih_bound = std::sqrt(6.0 / (5 + 24));
  for (double v : p.Get("lstm.weight_ih").values) EXPECT_LE(std::abs(v), ih_bound);

  for (const char* name : {"conv0.bias", "dense.bias"}) {
    for (double v : p.Get(name).values) EXPECT_EQ(v, 0.0);
  }
  const auto& lstm_bias = p.Get("lstm.bias").values;
  for (std::size_t i = 0; i < lstm_bias.size(); ++i) {
    EXPECT_EQ(lstm_bias[i], (i >= 6 && i < 12) ? 1.0 : 0.0) << i;
  }
}

TEST(InitTest, DeterministicForSeed) {
  auto c = TinyConfig();
  EXPECT_TRUE(BitwiseEqual(InitGlorot(c, 3), InitGlorot(c, 3)));
  EXPECT_FALSE(BitwiseEqual(InitGlorot(c, 3), InitGlorot(c, 4)));
}

TEST(ForwardTest, ZeroParametersGiveZeroScores) {
  auto c = TinyConfig();
  c.forget_gate_bias = 0.0;
  auto params = InitGlorot(c, 1);
  params = params.ZerosLike();
  Rng rng(2);
  auto batch = RandomBatch(rng, 4 * 2 * 12);
  auto out = Forward(params, batch, 4, c);
  for (double s : out.scores) EXPECT_EQ(s, 0.0);
  EXPECT_TRUE(out.cache.hidden.isZero(0.0));
}

TEST(ForwardTest, IdenticalWindowsGiveIdenticalRows) {
  auto c = TinyConfig();
  auto params = InitGlorot(c, 5);
  Rng rng(6);
  auto one = RandomBatch(rng, 2 * 12);
  std::vector<double> batch;
  for (int i = 0; i < 3; ++i) batch.insert(batch.end(), one.begin(), one.end());
  auto out = Forward(params, batch, 3, c);
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(out.scores[k], out.scores[3 + k]);
    EXPECT_EQ(out.scores[k], out.scores[6 + k]);
  }
}

TEST(ForwardTest, PureAndBatchIndependent) {
  auto c = TinyConfig();
  c.conv_layers = 2;
  auto params = InitGlorot(c, 7);
  Rng rng(8);
  auto batch = RandomBatch(rng, 5 * 2 * 12);
  auto a = Forward(params, batch, 5, c).scores;
  auto b = Forward(params, batch, 5, c).scores;
  EXPECT_EQ(a, b);
  // Each row only depends on its own window.
  std::span<const double> second(batch.data() + 24, 24);
  auto single = Forward(params, second, 1, c).scores;
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(single[k], a[3 + k], 1e-12);
}

TEST(ForwardTest, ShapeMismatchIsAnError) {
  auto c = TinyConfig();
  auto params = InitGlorot(c, 1);
  std::vector<double> batch(23);
  EXPECT_THROW(Forward(params, batch, 1, c), Error);
  auto other = c;
  other.hidden_units = 5;
  std::vector<double> ok(24);
  EXPECT_THROW(Forward(InitGlorot(other, 1), ok, 1, c), Error);
}

TEST(LossTest, UniformCaseIsLogK) {
  auto c = TinyConfig();
  c.num_classes = 7;
  c.forget_gate_bias = 0.0;
  auto params = InitGlorot(c, 1).ZerosLike();
  Rng rng(3);
  auto batch = RandomBatch(rng, 3 * 24);
  std::vector<int> labels = {0, 4, 6};
  auto lg = LossAndGrad(params, batch, labels, c, TrainConfig{});
  EXPECT_NEAR(lg.loss, std::log(7.0), 1e-12);
  EXPECT_NEAR(lg.loss, 1.9459, 1e-4);
}

TEST(LossTest, LabelOutOfRange) {
  auto c = TinyConfig();
  auto params = InitGlorot(c, 1);
  std::vector<double> batch(24);
  std::vector<int> labels = {3};
  EXPECT_THROW(LossAndGrad(params, batch, labels, c, TrainConfig{}), Error);
}

TEST(LossTest, ZeroMuIgnoresGlobalReference) {
  auto c = TinyConfig();
  auto params = InitGlorot(c, 9);
  Rng rng(10);
  auto batch = RandomBatch(rng, 4 * 24);
  std::vector<int> labels = {0, 1, 2, 1};
  auto ref = Perturbed(params, rng, 1.0);
  TrainConfig train;
  train.prox_mu = 0.0;
  auto with_ref = LossAndGrad(params, batch, labels, c, train, {}, &ref);
  auto without = LossAndGrad(params, batch, labels, c, train, {}, nullptr);
  EXPECT_EQ(with_ref.loss, without.loss);
  EXPECT_TRUE(BitwiseEqual(with_ref.grads, without.grads));
}

TEST(LossTest, NonNegative) {
  auto c = TinyConfig();
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    auto params = InitGlorot(c, trial);
    auto batch = RandomBatch(rng, 2 * 24);
    std::vector<int> labels = {static_cast<int>(rng.Below(3)),
                               static_cast<int>(rng.Below(3))};
    EXPECT_GE(LossAndGrad(params, batch, labels, c, TrainConfig{}).loss, 0.0);
  }
}

TEST(GradientTest, EveryCoordinateMatchesCentralDifferences) {
  auto c = TinyConfig();
  Rng rng(2024);
  auto params = Perturbed(InitGlorot(c, 77), rng, 0.3);
  auto ref = Perturbed(params, rng, 0.2);
  const std::size_t batch_size = 5;
  auto batch = RandomBatch(rng, batch_size * 24);
  std::vector<int> labels = {0, 2, 1, 2, 2};
  const std::vector<double> weights = {1.5, 0.75, 0.6};
  TrainConfig train;
  train.prox_mu = 0.1;
  auto lg = LossAndGrad(params, batch, labels, c, train, weights, &ref);
  const auto analytic = lg.grads.Flatten();
  ASSERT_GE(analytic.size(), 200u);
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double numeric = NumericPartial(params, i, batch, labels, c, train,
                                          weights, &ref, 1e-5);
    const double rel =
        std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    EXPECT_LT(rel, 1e-4) << "coordinate " << i;
  }
}

TEST(GradientTest, DeeperStackSampledCoordinates) {
  ModelConfig c = TinyConfig();
  c.conv_layers = 3;
  c.window_len = 16;
  c.hidden_units = 6;
  Rng rng(31);
  auto params = Perturbed(InitGlorot(c, 5), rng, 0.2);
  auto batch = RandomBatch(rng, 3 * 2 * 16);
  std::vector<int> labels = {1, 0, 2};
  TrainConfig train;
  auto analytic = LossAndGrad(params, batch, labels, c, train).grads.Flatten();
  for (int s = 0; s < 150; ++s) {
    const std::size_t i = rng.Below(analytic.size());
    const double numeric =
        NumericPartial(params, i, batch, labels, c, train, {}, nullptr, 1e-5);
    EXPECT_LT(std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i])),
              1e-4)
        << "coordinate " << i;
  }
}

TEST(ClassWeightsTest, InverseFrequency) {
  std::vector<int> labels = {0, 0, 0, 1};
  auto w = ClassWeights(labels, 3);
  EXPECT_DOUBLE_EQ(w[0], 4.0 / 9.0);
  EXPECT_DOUBLE_EQ(w[1], 4.0 / 3.0);
  EXPECT_EQ(w[2], 0.0);
}

TEST(AdamTest, ZeroGradientIsFixedPoint) {
  auto c = TinyConfig();
  auto params = InitGlorot(c, 1);
  auto original = params;
  auto state = AdamState::ZerosFor(params);
  TrainConfig train;
  train.weight_decay = 0.0;
  for (int i = 0; i < 3; ++i) AdamStep(params, params.ZerosLike(), state, train);
  EXPECT_TRUE(BitwiseEqual(params, original));
  EXPECT_EQ(state.step_count, 3u);
  for (double v : state.first_moment.Flatten()) EXPECT_EQ(v, 0.0);
  for (double v : state.second_moment.Flatten()) EXPECT_EQ(v, 0.0);
}

TEST(AdamTest, FirstStepMovesByLearningRate) {
  ParameterSet p;
  p.Add("w", {1}, {0.0});
  ParameterSet g;
  g.Add("w", {1}, {0.5});
  auto state = AdamState::ZerosFor(p);
  TrainConfig train;
  train.weight_decay = 0.0;
  AdamStep(p, g, state, train);
  const double update = p.entries()[0].values[0];
  EXPECT_LT(std::abs(update - (-1e-4)) / 1e-4, 1e-7);
}

TEST(AdamTest, DecoupledWeightDecay) {
  ParameterSet p;
  p.Add("w", {1}, {2.0});
  auto state = AdamState::ZerosFor(p);
  TrainConfig train;
  train.learning_rate = 0.1;
  train.weight_decay = 0.5;
  AdamStep(p, p.ZerosLike(), state, train);
  EXPECT_DOUBLE_EQ(p.entries()[0].values[0], 2.0 - 0.1 * 0.5 * 2.0);
}

TEST(AdamTest, DeterministicFromIdenticalState) {
  auto c = TinyConfig();
  Rng rng(4);
  auto params = InitGlorot(c, 2);
  auto grads = Perturbed(params.ZerosLike(), rng, 1.0);
  auto p1 = params;
  auto p2 = params;
  auto s1 = AdamState::ZerosFor(params);
  auto s2 = AdamState::ZerosFor(params);
  TrainConfig train;
  for (int i = 0; i < 4; ++i) {
    AdamStep(p1, grads, s1, train);
    AdamStep(p2, grads, s2, train);
  }
  EXPECT_TRUE(BitwiseEqual(p1, p2));
  EXPECT_TRUE(BitwiseEqual(s1.second_moment, s2.second_moment));
}

TEST(LocalTrainTest, ZeroEpochsReturnsStart) {
  auto c = TinyConfig();
  auto start = InitGlorot(c, 3);
  TrainConfig train;
  train.local_epochs = 0;
  auto update = LocalTrain(start, ToyShard(4, 1), c, train, 2, 5);
  EXPECT_TRUE(BitwiseEqual(update.params, start));
  EXPECT_EQ(update.num_examples, 8u);
  EXPECT_EQ(update.client_id, 2u);
  EXPECT_EQ(update.round, 5u);
}

TEST(LocalTrainTest, SeparableToyLossDecreases) {
  auto c = TinyConfig();
  auto shard = ToyShard(20, 2);
  auto start = InitGlorot(c, 11);
  TrainConfig train;
  train.learning_rate = 1e-2;
  train.batch_size = 8;
  train.local_epochs = 1;
  const double first = LocalTrain(start, shard, c, train).train_loss;
  train.local_epochs = 5;
  auto update = LocalTrain(start, shard, c, train);
  EXPECT_LT(update.train_loss, first);
  EXPECT_TRUE(update.params.SameSchema(start));
}

TEST(LocalTrainTest, DeterministicAndSeedSensitive) {
  auto c = TinyConfig();
  auto shard = ToyShard(10, 3);
  auto start = InitGlorot(c, 12);
  TrainConfig train;
  train.batch_size = 3;
  train.seed = 99;
  auto a = LocalTrain(start, shard, c, train);
  auto b = LocalTrain(start, shard, c, train);
  EXPECT_TRUE(BitwiseEqual(a.params, b.params));
  EXPECT_EQ(a.train_loss, b.train_loss);
  train.seed = 100;
  EXPECT_FALSE(BitwiseEqual(LocalTrain(start, shard, c, train).params, a.params));
}

TEST(LocalTrainTest, ProximalTermPullsTowardsStart) {
  auto c = TinyConfig();
  auto shard = ToyShard(10, 4);
  auto start = InitGlorot(c, 13);
  TrainConfig train;
  train.learning_rate = 1e-2;
  train.batch_size = 4;
  train.local_epochs = 3;
  const double free_dist = L2DistanceSq(LocalTrain(start, shard, c, train).params, start);
  train.prox_mu = 1e6;
  const double prox_dist = L2DistanceSq(LocalTrain(start, shard, c, train).params, start);
  EXPECT_LT(prox_dist, free_dist);
}

TEST(LocalTrainTest, EmptyShardIsAnError) {
  auto c = TinyConfig();
  data::WindowedDataset empty;
  empty.num_channels = 2;
  empty.window_len = 12;
  empty.num_classes = 3;
  EXPECT_THROW(LocalTrain(InitGlorot(c, 1), empty, c, TrainConfig{}), Error);
}

TEST(PredictTest, ArgmaxAndTieBreak) {
  std::vector<double> scores = {0.1, 0.9, 0.3};
  EXPECT_EQ(ArgmaxRows(scores, 3), (std::vector<int>{1}));
  std::vector<double> tie = {0.5, 0.5};
  EXPECT_EQ(ArgmaxRows(tie, 2), (std::vector<int>{0}));
}

TEST(PredictTest, PerfectLabelsScoreOne) {
  auto c = TinyConfig();
  auto params = InitGlorot(c, 14);
  auto ds = ToyShard(30, 5);
  auto predicted = Predict(params, ds, c);
  ds.labels = predicted;
  EXPECT_EQ(Evaluate(params, ds, c).macro_f1, 1.0);
}

}  // namespace
}  // namespace fedledger::model
