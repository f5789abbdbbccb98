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

#include "fedledger/metrics.h"

#include <algorithm>
#include <numeric>

#include "fedledger/error.h"
#include "fedledger/random.h"
#include "gtest/gtest.h"

namespace fedledger::metrics {
namespace {

TEST(ConfusionTest, DiagonalWhenPerfect) {
  std::vector<int> truth = {0, 1, 2, 2, 1};
  auto m = ComputeConfusion(truth, truth, 3);
  EXPECT_EQ(m, (ConfusionMatrix{{1, 0, 0}, {0, 2, 0}, {0, 0, 2}}));
}

TEST(ConfusionTest, HandCount) {
  std::vector<int> truth = {0, 0, 1, 1};
  std::vector<int> pred = {0, 1, 1, 1};
  EXPECT_EQ(ComputeConfusion(truth, pred, 2), (ConfusionMatrix{{1, 1}, {0, 2}}));
}

TEST(ConfusionTest, EmptyInputAndRangeErrors) {
  EXPECT_EQ(ComputeConfusion({}, {}, 2), (ConfusionMatrix{{0, 0}, {0, 0}}));
  std::vector<int> a = {0, 2};
  std::vector<int> b = {0, 1};
  EXPECT_THROW(ComputeConfusion(a, b, 2), Error);
  std::vector<int> c = {0};
  EXPECT_THROW(ComputeConfusion(a, c, 3), Error);
}

TEST(PrfTest, HandComputedTwoClass) {
  auto m = PrecisionRecallF1({{2, 0}, {1, 1}});
  EXPECT_NEAR(m.per_class[0].precision, 2.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(m.per_class[0].recall, 1.0);
  EXPECT_NEAR(m.per_class[0].f1, 0.8, 1e-15);
  EXPECT_DOUBLE_EQ(m.per_class[1].precision, 1.0);
  EXPECT_DOUBLE_EQ(m.per_class[1].recall, 0.5);
  EXPECT_NEAR(m.per_class[1].f1, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.macro_f1, 11.0 / 15.0, 1e-15);
  EXPECT_EQ(m.total, 4u);
}

TEST(PrfTest, PerfectDiagonalScoresOne) {
  auto m = PrecisionRecallF1({{3, 0, 0}, {0, 4, 0}, {0, 0, 1}});
  EXPECT_EQ(m.macro_precision, 1.0);
  EXPECT_EQ(m.macro_recall, 1.0);
  EXPECT_EQ(m.macro_f1, 1.0);
  EXPECT_EQ(m.weighted_f1, 1.0);
}

TEST(PrfTest, AbsentClassExcludedFromMacro) {
  // Class 2 is neither present nor predicted.
  auto m = PrecisionRecallF1({{2, 0, 0}, {1, 1, 0}, {0, 0, 0}});
  EXPECT_EQ(m.per_class[2].precision, 0.0);
  EXPECT_EQ(m.per_class[2].f1, 0.0);
  EXPECT_NEAR(m.macro_f1, 11.0 / 15.0, 1e-15);
}

TEST(PrfTest, RandomizedProperties) {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + static_cast<int>(rng.Below(5));
    std::vector<int> truth(1 + rng.Below(40));
    std::vector<int> pred(truth.size());
    for (auto& t : truth) t = static_cast<int>(rng.Below(k));
    for (auto& p : pred) p = static_cast<int>(rng.Below(k));
    auto m = Evaluate(truth, pred, k);
    std::uint64_t total = 0;
    for (const auto& row : m.confusion) total += std::accumulate(row.begin(), row.end(), std::uint64_t{0});
    EXPECT_EQ(total, truth.size());
    double lo = 1.0;
    double hi = 0.0;
    for (const auto& s : m.per_class) {
      if (s.precision + s.recall == 0.0) {
        EXPECT_EQ(s.f1, 0.0);
      } else {
        EXPECT_NEAR(s.f1, 2 * s.precision * s.recall / (s.precision + s.recall), 1e-12);
      }
      if (s.support > 0) {
        lo = std::min(lo, s.f1);
        hi = std::max(hi, s.f1);
      }
    }
    EXPECT_GE(m.macro_f1, lo - 1e-12);
    EXPECT_LE(m.macro_f1, hi + 1e-12);

    // Consistent relabeling leaves macro metrics unchanged.
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    rng.Shuffle(perm);
    std::vector<int> truth2(truth.size());
    std::vector<int> pred2(pred.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
      truth2[i] = perm[truth[i]];
      pred2[i] = perm[pred[i]];
    }
    auto m2 = Evaluate(truth2, pred2, k);
    EXPECT_NEAR(m2.macro_precision, m.macro_precision, 1e-12);
    EXPECT_NEAR(m2.macro_recall, m.macro_recall, 1e-12);
    EXPECT_NEAR(m2.macro_f1, m.macro_f1, 1e-12);
  }
}

TEST(ImprovementTest, PercentagePointDelta) {
  // HHAR, 128 hidden units, precision: centralized 76.24%, FedAvg 80.61%.
  auto d = ComputeImprovement({0.7624, 0.0, 0.0}, {0.8061, 0.0, 0.0});
  EXPECT_EQ(FormatDelta(d.precision), "+4.37");
  EXPECT_NEAR(d.precision, 4.37, 1e-9);
}

TEST(ImprovementTest, IdenticalInputsGiveZero) {
  Summary s{0.5, 0.6, 0.7};
  auto table = ComputeImprovementTable(s, {{"FedAvg", s}, {"Krum", s}});
  for (const auto& [name, d] : table) {
    EXPECT_EQ(FormatDelta(d.precision), "+0.00");
    EXPECT_EQ(FormatDelta(d.recall), "+0.00");
    EXPECT_EQ(FormatDelta(d.f1), "+0.00");
  }
}

TEST(ImprovementTest, Antisymmetric) {
  Summary a{0.81, 0.79, 0.8};
  Summary b{0.75, 0.8, 0.77};
  auto ab = ComputeImprovement(a, b);
  auto ba = ComputeImprovement(b, a);
  EXPECT_EQ(ab.precision, -ba.precision);
  EXPECT_EQ(ab.recall, -ba.recall);
  EXPECT_EQ(ab.f1, -ba.f1);
}

TEST(FormatTest, Percent) {
  EXPECT_EQ(FormatPercent(0.8061), "80.61%");
  EXPECT_EQ(FormatDelta(-0.02), "-0.02");
}

}  // namespace
}  // namespace fedledger::metrics
