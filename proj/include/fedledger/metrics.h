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

#ifndef FEDLEDGER_METRICS_H_
#define FEDLEDGER_METRICS_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace fedledger::metrics {

using ConfusionMatrix = std::vector<std::vector<std::uint64_t>>;

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;  // true windows of this class
};

struct Metrics {
  ConfusionMatrix confusion;  // rows = truth, columns = prediction
  std::vector<ClassScores> per_class;
  // Unweighted means over classes that occur in the truth labels.
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  // Support-weighted means, reported alongside.
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;
  std::uint64_t total = 0;
};

ConfusionMatrix ComputeConfusion(std::span<const int> truth,
                                 std::span<const int> predicted,
                                 int num_classes);

// 0/0 ratios are defined as 0.
Metrics PrecisionRecallF1(const ConfusionMatrix& confusion);

inline Metrics Evaluate(std::span<const int> truth,
                        std::span<const int> predicted, int num_classes) {
  return PrecisionRecallF1(ComputeConfusion(truth, predicted, num_classes));
}

// Headline numbers as fractions in [0, 1].
struct Summary {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline Summary Macro(const Metrics& m) {
  return {m.macro_precision, m.macro_recall, m.macro_f1};
}

// Federated minus centralized, in percentage points.
struct Improvement {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

Improvement ComputeImprovement(const Summary& centralized,
                               const Summary& federated);

// strategy name -> improvement, in map (alphabetical) order unless rendered
// with an explicit column order.
using ImprovementTable = std::map<std::string, Improvement>;

ImprovementTable ComputeImprovementTable(
    const Summary& centralized,
    const std::map<std::string, Summary>& federated);

// Fixed two-decimal rendering used in tables, e.g. "+4.37" or "-0.02".
std::string FormatDelta(double points);
// Two-decimal percentage of a fraction, e.g. 0.8061 -> "80.61%".
std::string FormatPercent(double fraction);

}  // namespace fedledger::metrics

#endif  // FEDLEDGER_METRICS_H_
