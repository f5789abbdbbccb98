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

#ifndef FEDLEDGER_MODEL_H_
#define FEDLEDGER_MODEL_H_

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fedledger/client_update.h"
#include "fedledger/data.h"
#include "fedledger/metrics.h"
#include "fedledger/params.h"

namespace fedledger::model {

// Convolutional front end (valid 1-D convolutions with ReLU) feeding a single
// LSTM layer whose final hidden state drives a dense classifier.
struct ModelConfig {
  std::size_t in_channels = 3;
  std::size_t window_len = 50;
  std::size_t conv_layers = 4;
  std::size_t conv_filters = 64;
  std::size_t filter_size = 11;
  std::size_t hidden_units = 128;
  std::size_t num_classes = 6;
  // Initial value of the LSTM forget-gate bias. Tests set 0 to make an
  // all-zero network exactly zero.
  double forget_gate_bias = 1.0;

  void Validate() const;
  // Time steps seen by the LSTM: window_len - conv_layers * (filter_size - 1).
  std::size_t SequenceLength() const;
};

// Filter length that spans the same 0.2 s at any sampling rate (11 at 50 Hz,
// 21 at 100 Hz).
std::size_t FilterSizeForSampleRate(int sample_rate_hz);

struct TrainConfig {
  double learning_rate = 1e-4;
  double weight_decay = 1e-6;
  std::size_t local_epochs = 1;
  std::size_t batch_size = 64;
  double prox_mu = 0.0;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  ParameterSet first_moment;
  ParameterSet second_moment;
  std::uint64_t step_count = 0;

  static AdamState ZerosFor(const ParameterSet& params);
};

// Entry names and shapes in construction order:
//   conv{l}.weight [filters, in, filter_size], conv{l}.bias [filters]
//   lstm.weight_ih [4H, filters], lstm.weight_hh [4H, H], lstm.bias [4H]
//   dense.weight [classes, H], dense.bias [classes]
// LSTM gate blocks are ordered input, forget, cell, output.
ParameterSet ZeroParameters(const ModelConfig& config);

// Glorot-uniform weights, zero biases, forget-gate bias from the config.
ParameterSet InitGlorot(const ModelConfig& config, std::uint64_t seed);

struct ForwardCache {
  std::size_t batch_size = 0;
  std::vector<Eigen::MatrixXd> conv_columns;  // im2col input per layer
  std::vector<Eigen::MatrixXd> conv_pre;      // pre-ReLU output per layer
  Eigen::MatrixXd lstm_input;   // filters x (S*B), time-major columns
  Eigen::MatrixXd gates;        // 4H x (S*B), activated
  Eigen::MatrixXd cells;        // H x ((S+1)*B), block 0 is the zero state
  Eigen::MatrixXd hidden;       // H x ((S+1)*B)
};

struct ForwardResult {
  std::vector<double> scores;  // B x K, row-major
  ForwardCache cache;
};

// `batch` holds batch_size windows of in_channels x window_len, row-major.
ForwardResult Forward(const ParameterSet& params, std::span<const double> batch,
                      std::size_t batch_size, const ModelConfig& config);

struct LossAndGradient {
  double loss = 0.0;
  ParameterSet grads;
};

// Mean class-weighted softmax cross-entropy over the batch, plus
// (prox_mu / 2) * |params - global_ref|^2 when prox_mu > 0. An empty
// `class_weights` means uniform weights of 1.
LossAndGradient LossAndGrad(const ParameterSet& params,
                            std::span<const double> batch,
                            std::span<const int> labels,
                            const ModelConfig& config,
                            const TrainConfig& train,
                            std::span<const double> class_weights = {},
                            const ParameterSet* global_ref = nullptr);

// Inverse-frequency weights N / (K * count_k); classes absent from `labels`
// get weight 0.
std::vector<double> ClassWeights(std::span<const int> labels,
                                 std::size_t num_classes);

// Adam with bias correction and decoupled weight decay, in place.
void AdamStep(ParameterSet& params, const ParameterSet& grads,
              AdamState& state, const TrainConfig& train);

// Mini-batch Adam over `shard` for train.local_epochs epochs. The shard is
// reshuffled every epoch from train.seed; the last partial batch is kept.
// With prox_mu > 0 the proximal anchor is `start_params`.
ClientUpdate LocalTrain(const ParameterSet& start_params,
                        const data::WindowedDataset& shard,
                        const ModelConfig& config, const TrainConfig& train,
                        std::uint64_t client_id = 0, std::uint64_t round = 0);

// Argmax per row, ties to the lowest class index.
std::vector<int> ArgmaxRows(std::span<const double> scores,
                            std::size_t num_classes);

std::vector<int> Predict(const ParameterSet& params,
                         const data::WindowedDataset& windows,
                         const ModelConfig& config);

metrics::Metrics Evaluate(const ParameterSet& params,
                          const data::WindowedDataset& dataset,
                          const ModelConfig& config);

}  // namespace fedledger::model

#endif  // FEDLEDGER_MODEL_H_
