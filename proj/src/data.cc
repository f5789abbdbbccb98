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

#include "fedledger/data.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "fedledger/error.h"
#include "fedledger/random.h"

namespace fedledger::data {

namespace {

std::string Trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return std::string(s);
}

std::vector<std::string> SplitComma(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(Trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool ParseDouble(const std::string& s, double& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool ParseLabel(const std::string& s, int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && out >= 0;
}

}  // namespace

void TimeSeriesRecord::Validate() const {
  Require(num_classes > 0, ErrorCode::kData, "record has no classes");
  Require(sample_rate_hz > 0, ErrorCode::kData, "sample rate must be positive");
  for (const auto& ch : channels) {
    Require(ch.size() == labels.size(), ErrorCode::kData,
            "channel length differs from label count");
  }
  for (int l : labels) {
    Require(l >= 0 && l < num_classes, ErrorCode::kData,
            "label " + std::to_string(l) + " outside [0, " +
                std::to_string(num_classes) + ")");
  }
}

WindowedDataset WindowedDataset::Subset(
    std::span<const std::size_t> indices) const {
  WindowedDataset out;
  out.num_channels = num_channels;
  out.window_len = window_len;
  out.stride = stride;
  out.num_classes = num_classes;
  out.values.reserve(indices.size() * window_size());
  out.labels.reserve(indices.size());
  for (auto i : indices) {
    Require(i < size(), ErrorCode::kInvalidArgument, "window index out of range");
    auto w = Window(i);
    out.values.insert(out.values.end(), w.begin(), w.end());
    out.labels.push_back(labels[i]);
  }
  return out;
}

TimeSeriesRecord GenerateSynthetic(const SyntheticSpec& spec) {
  Require(spec.num_classes >= 2, ErrorCode::kInvalidArgument,
          "synthetic data needs at least 2 classes");
  Require(spec.sample_rate_hz > 0, ErrorCode::kInvalidArgument,
          "sample rate must be positive");
  constexpr double kPi = std::numbers::pi;
  const double phases[3] = {0.0, 2.0 * kPi / 3.0, 4.0 * kPi / 3.0};
  const double rate = spec.sample_rate_hz;

  TimeSeriesRecord rec;
  rec.sample_rate_hz = spec.sample_rate_hz;
  rec.num_classes = spec.num_classes;
  rec.channels.assign(3, {});
  Rng rng(spec.seed);
  for (int k = 0; k < spec.num_classes; ++k) {
    const double freq = 1.0 + k;
    const double amplitude = 1.0 + 0.25 * k;
    for (std::size_t t = 0; t < spec.samples_per_class; ++t) {
      for (int c = 0; c < 3; ++c) {
        double clean =
            amplitude * std::sin(2.0 * kPi * freq * static_cast<double>(t) / rate +
                                 phases[c]);
        rec.channels[c].push_back(clean + spec.noise_std * rng.Normal());
      }
      rec.labels.push_back(k);
    }
  }
  return rec;
}

WindowedDataset MakeWindows(const TimeSeriesRecord& record,
                            std::size_t window_len, std::size_t stride) {
  record.Validate();
  Require(window_len > 0 && stride > 0, ErrorCode::kInvalidArgument,
          "window length and stride must be positive");
  const std::size_t length = record.length();
  Require(window_len <= length, ErrorCode::kInvalidArgument,
          "window length " + std::to_string(window_len) +
              " exceeds record length " + std::to_string(length));
  WindowedDataset ds;
  ds.num_channels = record.num_channels();
  ds.window_len = window_len;
  ds.stride = stride;
  ds.num_classes = record.num_classes;
  const std::size_t count = (length - window_len) / stride + 1;
  ds.values.reserve(count * ds.window_size());
  std::vector<std::size_t> histogram(record.num_classes);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t start = w * stride;
    for (const auto& ch : record.channels) {
      ds.values.insert(ds.values.end(), ch.begin() + start,
                       ch.begin() + start + window_len);
    }
    std::fill(histogram.begin(), histogram.end(), 0);
    for (std::size_t t = start; t < start + window_len; ++t) {
      ++histogram[record.labels[t]];
    }
    // max_element returns the first maximum, i.e. the lowest class index.
    ds.labels.push_back(static_cast<int>(
        std::max_element(histogram.begin(), histogram.end()) - histogram.begin()));
  }
  return ds;
}

NormalizationStats ComputeNormalization(const WindowedDataset& dataset) {
  Require(dataset.size() > 0, ErrorCode::kInvalidArgument,
          "cannot normalize an empty dataset");
  const std::size_t C = dataset.num_channels;
  const std::size_t T = dataset.window_len;
  NormalizationStats stats;
  stats.mean.assign(C, 0.0);
  stats.stddev.assign(C, 0.0);
  const double count = static_cast<double>(dataset.size() * T);
  for (std::size_t c = 0; c < C; ++c) {
    double sum = 0.0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const double* row = dataset.Window(i).data() + c * T;
      for (std::size_t t = 0; t < T; ++t) sum += row[t];
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const double* row = dataset.Window(i).data() + c * T;
      for (std::size_t t = 0; t < T; ++t) sq += (row[t] - mean) * (row[t] - mean);
    }
    stats.mean[c] = mean;
    stats.stddev[c] = std::max(std::sqrt(sq / count), kStdFloor);
  }
  return stats;
}

WindowedDataset ApplyNormalization(const WindowedDataset& dataset,
                                   const NormalizationStats& stats) {
  Require(stats.mean.size() == dataset.num_channels &&
              stats.stddev.size() == dataset.num_channels,
          ErrorCode::kInvalidArgument, "normalization stats channel mismatch");
  WindowedDataset out = dataset;
  const std::size_t T = dataset.window_len;
  for (std::size_t i = 0; i < out.size(); ++i) {
    double* w = out.values.data() + i * out.window_size();
    for (std::size_t c = 0; c < out.num_channels; ++c) {
      for (std::size_t t = 0; t < T; ++t) {
        w[c * T + t] = (w[c * T + t] - stats.mean[c]) / stats.stddev[c];
      }
    }
  }
  return out;
}

Normalized Normalize(const WindowedDataset& dataset) {
  auto stats = ComputeNormalization(dataset);
  return {ApplyNormalization(dataset, stats), std::move(stats)};
}

std::vector<Fold> KFoldSplit(const WindowedDataset& dataset, std::size_t k,
                             std::uint64_t seed,
                             std::vector<std::string>* warnings) {
  Require(k >= 2, ErrorCode::kInvalidArgument, "k-fold needs k >= 2");
  Require(dataset.size() >= k, ErrorCode::kInvalidArgument,
          "dataset has fewer windows than folds");
  std::vector<std::vector<std::size_t>> by_class(dataset.num_classes);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    by_class[dataset.labels[i]].push_back(i);
  }
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> test(k);
  // Remainders rotate across classes so fold sizes stay within one window.
  std::size_t offset = 0;
  for (std::size_t cls = 0; cls < by_class.size(); ++cls) {
    auto& members = by_class[cls];
    if (members.empty()) continue;
    if (members.size() < k && warnings != nullptr) {
      warnings->push_back("class " + std::to_string(cls) + " has " +
                          std::to_string(members.size()) +
                          " windows, fewer than " + std::to_string(k) +
                          " folds");
    }
    rng.Shuffle(members);
    const std::size_t base = members.size() / k;
    const std::size_t extra = members.size() % k;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
      std::size_t fold = (offset + f) % k;
      std::size_t take = base + (f < extra ? 1 : 0);
      test[fold].insert(test[fold].end(), members.begin() + pos,
                        members.begin() + pos + take);
      pos += take;
    }
    offset = (offset + extra) % k;
  }
  std::vector<Fold> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    std::sort(test[f].begin(), test[f].end());
    std::vector<bool> in_test(dataset.size(), false);
    for (auto i : test[f]) in_test[i] = true;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (!in_test[i]) folds[f].train.push_back(i);
    }
    folds[f].test = std::move(test[f]);
  }
  return folds;
}

std::string ToString(PartitionMode mode) {
  return mode == PartitionMode::kIid ? "iid" : "label-skew";
}

PartitionMode ParsePartitionMode(const std::string& s) {
  if (s == "iid") return PartitionMode::kIid;
  if (s == "label-skew") return PartitionMode::kLabelSkew;
  Fail(ErrorCode::kConfig, "unknown partition mode '" + s + "'");
}

std::vector<std::vector<std::size_t>> PartitionPlan::Shards() const {
  std::vector<std::vector<std::size_t>> shards(num_clients);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    shards[assignment[i]].push_back(i);
  }
  return shards;
}

PartitionPlan PartitionClients(const WindowedDataset& dataset,
                               std::size_t num_clients, PartitionMode mode,
                               std::uint64_t seed) {
  Require(num_clients >= 1, ErrorCode::kInvalidArgument,
          "need at least one client");
  const std::size_t n = dataset.size();
  Require(num_clients <= n, ErrorCode::kData,
          std::to_string(num_clients) + " clients but only " +
              std::to_string(n) + " windows");
  PartitionPlan plan;
  plan.mode = mode;
  plan.num_clients = num_clients;
  plan.assignment.assign(n, 0);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.Shuffle(order);

  if (mode == PartitionMode::kIid) {
    for (std::size_t j = 0; j < n; ++j) plan.assignment[order[j]] = j % num_clients;
  } else {
    plan.dominant_classes.resize(num_clients);
    for (int cls = 0; cls < dataset.num_classes; ++cls) {
      plan.dominant_classes[cls % num_clients].push_back(cls);
    }
    for (std::size_t i = 0; i < n; ++i) {
      plan.assignment[i] = static_cast<std::size_t>(dataset.labels[i]) % num_clients;
    }
    // The first 10% of the shuffled order is dealt round-robin.
    const auto spill =
        static_cast<std::size_t>(std::floor(kLabelSkewSpillover * n));
    for (std::size_t j = 0; j < spill; ++j) {
      plan.assignment[order[j]] = j % num_clients;
    }
  }
  std::vector<std::size_t> sizes(num_clients, 0);
  for (auto c : plan.assignment) ++sizes[c];
  for (std::size_t c = 0; c < num_clients; ++c) {
    Require(sizes[c] > 0, ErrorCode::kData,
            "client " + std::to_string(c) + " received no windows");
  }
  return plan;
}

TimeSeriesRecord LoadCsv(const std::string& path, int sample_rate_hz,
                         int num_classes) {
  std::ifstream in(path, std::ios::binary);
  Require(in.good(), ErrorCode::kIo, "cannot open '" + path + "'");
  std::string line;
  Require(static_cast<bool>(std::getline(in, line)), ErrorCode::kData,
          path + ":1: missing header");
  Require(Trim(line) == "t,x,y,z,label", ErrorCode::kData,
          path + ":1: expected header 't,x,y,z,label'");
  TimeSeriesRecord rec;
  rec.sample_rate_hz = sample_rate_hz;
  rec.channels.assign(3, {});
  std::size_t line_no = 1;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    auto fields = SplitComma(line);
    const std::string where = path + ":" + std::to_string(line_no) + ": ";
    Require(fields.size() == 5, ErrorCode::kData,
            where + "expected 5 fields, got " + std::to_string(fields.size()));
    double values[4];
    const char* names[4] = {"t", "x", "y", "z"};
    for (int i = 0; i < 4; ++i) {
      Require(ParseDouble(fields[i], values[i]), ErrorCode::kData,
              where + "non-numeric " + names[i] + " value '" + fields[i] + "'");
    }
    int label = 0;
    Require(ParseLabel(fields[4], label), ErrorCode::kData,
            where + "unknown label '" + fields[4] + "'");
    Require(num_classes == 0 || label < num_classes, ErrorCode::kData,
            where + "unknown label '" + fields[4] + "'");
    for (int c = 0; c < 3; ++c) rec.channels[c].push_back(values[c + 1]);
    rec.labels.push_back(label);
    max_label = std::max(max_label, label);
  }
  rec.num_classes = num_classes > 0 ? num_classes : max_label + 1;
  return rec;
}

void WriteCsv(const TimeSeriesRecord& record, const std::string& path) {
  Require(record.num_channels() == 3, ErrorCode::kInvalidArgument,
          "CSV export needs exactly 3 channels");
  std::ofstream out(path, std::ios::binary);
  Require(out.good(), ErrorCode::kIo, "cannot write '" + path + "'");
  out << "t,x,y,z,label\n";
  char buf[64];
  auto put = [&](double v) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v,
                                   std::chars_format::general, 17);
    out.write(buf, ptr - buf);
  };
  for (std::size_t i = 0; i < record.length(); ++i) {
    put(static_cast<double>(i) / record.sample_rate_hz);
    for (int c = 0; c < 3; ++c) {
      out << ',';
      put(record.channels[c][i]);
    }
    out << ',' << record.labels[i] << '\n';
  }
  Require(out.good(), ErrorCode::kIo, "failed writing '" + path + "'");
}

}  // namespace fedledger::data
