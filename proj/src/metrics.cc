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

#include <cstdio>

#include "fedledger/error.h"

namespace fedledger::metrics {

namespace {

double Ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

ConfusionMatrix ComputeConfusion(std::span<const int> truth,
                                 std::span<const int> predicted,
                                 int num_classes) {
  Require(num_classes > 0, ErrorCode::kInvalidArgument,
          "confusion matrix needs at least one class");
  Require(truth.size() == predicted.size(), ErrorCode::kInvalidArgument,
          "truth and prediction lengths differ");
  ConfusionMatrix m(num_classes, std::vector<std::uint64_t>(num_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    int t = truth[i];
    int p = predicted[i];
    Require(t >= 0 && t < num_classes && p >= 0 && p < num_classes,
            ErrorCode::kInvalidArgument,
            "label out of range at position " + std::to_string(i));
    ++m[t][p];
  }
  return m;
}

Metrics PrecisionRecallF1(const ConfusionMatrix& confusion) {
  const std::size_t k = confusion.size();
  for (const auto& row : confusion) {
    Require(row.size() == k, ErrorCode::kInvalidArgument,
            "confusion matrix must be square");
  }
  Metrics m;
  m.confusion = confusion;
  m.per_class.resize(k);
  std::vector<std::uint64_t> col_sum(k, 0);
  for (std::size_t t = 0; t < k; ++t) {
    for (std::size_t p = 0; p < k; ++p) {
      col_sum[p] += confusion[t][p];
      m.total += confusion[t][p];
    }
  }
  std::size_t present = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::uint64_t row_sum = 0;
    for (auto v : confusion[c]) row_sum += v;
    auto& s = m.per_class[c];
    const double tp = static_cast<double>(confusion[c][c]);
    s.precision = Ratio(tp, static_cast<double>(col_sum[c]));
    s.recall = Ratio(tp, static_cast<double>(row_sum));
    s.f1 = Ratio(2.0 * s.precision * s.recall, s.precision + s.recall);
    s.support = row_sum;
    if (row_sum == 0) continue;
    ++present;
    m.macro_precision += s.precision;
    m.macro_recall += s.recall;
    m.macro_f1 += s.f1;
    const double w = static_cast<double>(row_sum);
    m.weighted_precision += w * s.precision;
    m.weighted_recall += w * s.recall;
    m.weighted_f1 += w * s.f1;
  }
  if (present > 0) {
    m.macro_precision /= present;
    m.macro_recall /= present;
    m.macro_f1 /= present;
  }
  if (m.total > 0) {
    const double n = static_cast<double>(m.total);
    m.weighted_precision /= n;
    m.weighted_recall /= n;
    m.weighted_f1 /= n;
  }
  return m;
}

Improvement ComputeImprovement(const Summary& centralized,
                               const Summary& federated) {
  return {100.0 * (federated.precision - centralized.precision),
          100.0 * (federated.recall - centralized.recall),
          100.0 * (federated.f1 - centralized.f1)};
}

ImprovementTable ComputeImprovementTable(
    const Summary& centralized,
    const std::map<std::string, Summary>& federated) {
  ImprovementTable table;
  for (const auto& [name, summary] : federated) {
    table[name] = ComputeImprovement(centralized, summary);
  }
  return table;
}

std::string FormatDelta(double points) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+.2f", points);
  std::string s = buf;
  if (s == "-0.00") s = "+0.00";
  return s;
}

std::string FormatPercent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * fraction);
  return buf;
}

}  // namespace fedledger::metrics
