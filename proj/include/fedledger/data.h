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

#ifndef FEDLEDGER_DATA_H_
#define FEDLEDGER_DATA_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fedledger::data {

// Multichannel series with one integer label per sample.
struct TimeSeriesRecord {
  std::vector<std::vector<double>> channels;
  std::vector<int> labels;
  int sample_rate_hz = 50;
  int num_classes = 0;

  std::size_t length() const { return labels.size(); }
  std::size_t num_channels() const { return channels.size(); }
  // Throws kData when channels differ in length or labels are out of range.
  void Validate() const;
};

// Windows stored contiguously as N x C x T, row-major.
struct WindowedDataset {
  std::size_t num_channels = 0;
  std::size_t window_len = 0;
  std::size_t stride = 0;
  int num_classes = 0;
  std::vector<double> values;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t window_size() const { return num_channels * window_len; }
  std::span<const double> Window(std::size_t i) const {
    return {values.data() + i * window_size(), window_size()};
  }
  WindowedDataset Subset(std::span<const std::size_t> indices) const;
};

struct SyntheticSpec {
  int num_classes = 6;
  std::size_t samples_per_class = 2000;
  int sample_rate_hz = 50;
  double noise_std = 0.2;
  std::uint64_t seed = 0;
};

// Class k is a three-phase sinusoid at (1 + k) Hz with amplitude 1 + 0.25k
// plus Gaussian noise; classes are concatenated in label order.
TimeSeriesRecord GenerateSynthetic(const SyntheticSpec& spec);

// Sliding windows starting at 0, `stride` apart. The window label is the
// majority sample label, ties going to the lowest class index.
WindowedDataset MakeWindows(const TimeSeriesRecord& record,
                            std::size_t window_len, std::size_t stride);

struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

constexpr double kStdFloor = 1e-8;

NormalizationStats ComputeNormalization(const WindowedDataset& dataset);
WindowedDataset ApplyNormalization(const WindowedDataset& dataset,
                                   const NormalizationStats& stats);

struct Normalized {
  WindowedDataset dataset;
  NormalizationStats stats;
};
Normalized Normalize(const WindowedDataset& dataset);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Stratified k-fold split. Classes with fewer than k windows only reach some
// folds; a message is appended to `warnings` for each such class.
std::vector<Fold> KFoldSplit(const WindowedDataset& dataset, std::size_t k,
                             std::uint64_t seed,
                             std::vector<std::string>* warnings = nullptr);

enum class PartitionMode { kIid, kLabelSkew };

std::string ToString(PartitionMode mode);
PartitionMode ParsePartitionMode(const std::string& s);

struct PartitionPlan {
  PartitionMode mode = PartitionMode::kIid;
  std::size_t num_clients = 0;
  std::vector<std::size_t> assignment;  // window index -> client id
  // Label-skew only: the classes each client owns outright.
  std::vector<std::vector<int>> dominant_classes;

  // Window indices per client, ascending.
  std::vector<std::vector<std::size_t>> Shards() const;
};

// Fraction of windows redistributed iid under label skew.
constexpr double kLabelSkewSpillover = 0.10;

PartitionPlan PartitionClients(const WindowedDataset& dataset,
                               std::size_t num_clients, PartitionMode mode,
                               std::uint64_t seed);

// Reads a `t,x,y,z,label` CSV. Labels must be integers in [0, num_classes);
// num_classes == 0 infers max label + 1.
TimeSeriesRecord LoadCsv(const std::string& path, int sample_rate_hz,
                         int num_classes = 0);
// Writes the same format with 17 significant digits.
void WriteCsv(const TimeSeriesRecord& record, const std::string& path);

}  // namespace fedledger::data

#endif  // FEDLEDGER_DATA_H_
