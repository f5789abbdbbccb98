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
#include <string>

#include "fedledger/error.h"
#include "fedledger/random.h"

namespace fedledger::model {

namespace {

using Mat = Eigen::MatrixXd;
using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMat>;
using RowMap = Eigen::Map<RowMat>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

constexpr std::size_t kEvalChunk = 256;

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Entry positions fixed by ZeroParameters.
struct Layout {
  std::size_t conv_layers;
  std::size_t ConvWeight(std::size_t l) const { return 2 * l; }
  std::size_t ConvBias(std::size_t l) const { return 2 * l + 1; }
  std::size_t LstmWeightIh() const { return 2 * conv_layers; }
  std::size_t LstmWeightHh() const { return 2 * conv_layers + 1; }
  std::size_t LstmBias() const { return 2 * conv_layers + 2; }
  std::size_t DenseWeight() const { return 2 * conv_layers + 3; }
  std::size_t DenseBias() const { return 2 * conv_layers + 4; }
};

struct SchemaEntry {
  std::string name;
  std::vector<std::size_t> shape;
};

std::vector<SchemaEntry> ExpectedSchema(const ModelConfig& config) {
  const std::size_t H = config.hidden_units;
  std::vector<SchemaEntry> schema;
  std::size_t in = config.in_channels;
  for (std::size_t l = 0; l < config.conv_layers; ++l) {
    const std::string prefix = "conv" + std::to_string(l);
    schema.push_back({prefix + ".weight",
                      {config.conv_filters, in, config.filter_size}});
    schema.push_back({prefix + ".bias", {config.conv_filters}});
    in = config.conv_filters;
  }
  schema.push_back({"lstm.weight_ih", {4 * H, in}});
  schema.push_back({"lstm.weight_hh", {4 * H, H}});
  schema.push_back({"lstm.bias", {4 * H}});
  schema.push_back({"dense.weight", {config.num_classes, H}});
  schema.push_back({"dense.bias", {config.num_classes}});
  return schema;
}

void CheckParams(const ParameterSet& params, const ModelConfig& config) {
  const auto schema = ExpectedSchema(config);
  bool ok = schema.size() == params.size();
  for (std::size_t i = 0; ok && i < schema.size(); ++i) {
    ok = schema[i].name == params.entries()[i].name &&
         schema[i].shape == params.entries()[i].shape;
  }
  if (!ok) CheckSameSchema(ZeroParameters(config), params);
}

ConstRowMap MatrixOf(const ParameterSet& p, std::size_t entry) {
  const auto& e = p.entries()[entry];
  const std::size_t rows = e.shape[0];
  return ConstRowMap(e.values.data(), rows, e.values.size() / rows);
}

RowMap MutableMatrixOf(ParameterSet& p, std::size_t entry) {
  auto& e = p.mutable_entry(entry);
  const std::size_t rows = e.shape[0];
  return RowMap(e.values.data(), rows, e.values.size() / rows);
}

ConstVecMap VectorOf(const ParameterSet& p, std::size_t entry) {
  const auto& e = p.entries()[entry];
  return ConstVecMap(e.values.data(), e.values.size());
}

VecMap MutableVectorOf(ParameterSet& p, std::size_t entry) {
  auto& e = p.mutable_entry(entry);
  return VecMap(e.values.data(), e.values.size());
}

void FillUniform(std::vector<double>& values, double limit, Rng& rng) {
  for (auto& v : values) v = rng.Uniform(-limit, limit);
}

}  // namespace

void ModelConfig::Validate() const {
  Require(in_channels > 0 && window_len > 0 && conv_layers > 0 &&
              conv_filters > 0 && filter_size > 0 && hidden_units > 0 &&
              num_classes > 0,
          ErrorCode::kConfig, "model dimensions must all be positive");
  Require(window_len > conv_layers * (filter_size - 1), ErrorCode::kConfig,
          "window_len " + std::to_string(window_len) +
              " too short for " + std::to_string(conv_layers) +
              " convolutions of size " + std::to_string(filter_size));
}

std::size_t ModelConfig::SequenceLength() const {
  return window_len - conv_layers * (filter_size - 1);
}

std::size_t FilterSizeForSampleRate(int sample_rate_hz) {
  Require(sample_rate_hz > 0, ErrorCode::kConfig, "sample rate must be positive");
  return static_cast<std::size_t>(std::lround(0.2 * sample_rate_hz)) + 1;
}

AdamState AdamState::ZerosFor(const ParameterSet& params) {
  return {params.ZerosLike(), params.ZerosLike(), 0};
}

ParameterSet ZeroParameters(const ModelConfig& config) {
  config.Validate();
  ParameterSet p;
  for (auto& e : ExpectedSchema(config)) {
    p.AddZeros(std::move(e.name), std::move(e.shape));
  }
  return p;
}

ParameterSet InitGlorot(const ModelConfig& config, std::uint64_t seed) {
  ParameterSet p = ZeroParameters(config);
  const Layout layout{config.conv_layers};
  Rng rng(seed);
  for (std::size_t l = 0; l < config.conv_layers; ++l) {
    auto& w = p.mutable_entry(layout.ConvWeight(l));
    const double fan_in = static_cast<double>(w.shape[1] * w.shape[2]);
    const double fan_out = static_cast<double>(w.shape[0] * w.shape[2]);
    FillUniform(w.values, std::sqrt(6.0 / (fan_in + fan_out)), rng);
  }
  for (std::size_t idx : {layout.LstmWeightIh(), layout.LstmWeightHh(),
                          layout.DenseWeight()}) {
    auto& w = p.mutable_entry(idx);
    const double fan_out = static_cast<double>(w.shape[0]);
    const double fan_in = static_cast<double>(w.shape[1]);
    FillUniform(w.values, std::sqrt(6.0 / (fan_in + fan_out)), rng);
  }
  const std::size_t H = config.hidden_units;
  auto& bias = p.mutable_entry(layout.LstmBias()).values;
  std::fill(bias.begin() + H, bias.begin() + 2 * H, config.forget_gate_bias);
  return p;
}

ForwardResult Forward(const ParameterSet& params, std::span<const double> batch,
                      std::size_t batch_size, const ModelConfig& config) {
  config.Validate();
  CheckParams(params, config);
  const std::size_t B = batch_size;
  const std::size_t C = config.in_channels;
  const std::size_t T = config.window_len;
  const std::size_t H = config.hidden_units;
  const std::size_t K = config.filter_size;
  Require(B > 0, ErrorCode::kInvalidArgument, "empty batch");
  Require(batch.size() == B * C * T, ErrorCode::kInvalidArgument,
          "batch holds " + std::to_string(batch.size()) + " values, expected " +
              std::to_string(B * C * T));
  const Layout layout{config.conv_layers};

  ForwardResult out;
  ForwardCache& cache = out.cache;
  cache.batch_size = B;

  // Activations are channel rows by (window, time) columns: column b*T + t.
  Mat act(C, B * T);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const double* row = batch.data() + b * C * T + c * T;
      for (std::size_t t = 0; t < T; ++t) act(c, b * T + t) = row[t];
    }
  }

  std::size_t t_in = T;
  std::size_t c_in = C;
  for (std::size_t l = 0; l < config.conv_layers; ++l) {
    const std::size_t t_out = t_in - K + 1;
    Mat columns(c_in * K, B * t_out);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t t = 0; t < t_out; ++t) {
        double* dst = columns.col(b * t_out + t).data();
        for (std::size_t c = 0; c < c_in; ++c) {
          for (std::size_t k = 0; k < K; ++k) {
            dst[c * K + k] = act(c, b * t_in + t + k);
          }
        }
      }
    }
    Mat pre = MatrixOf(params, layout.ConvWeight(l)) * columns;
    pre.colwise() += VectorOf(params, layout.ConvBias(l));
    act = pre.cwiseMax(0.0);
    cache.conv_columns.push_back(std::move(columns));
    cache.conv_pre.push_back(std::move(pre));
    t_in = t_out;
    c_in = config.conv_filters;
  }

  const std::size_t S = t_in;
  Mat& x = cache.lstm_input;
  x.resize(c_in, S * B);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < S; ++t) x.col(t * B + b) = act.col(b * S + t);
  }

  const auto w_hh = MatrixOf(params, layout.LstmWeightHh());
  Mat input_part = MatrixOf(params, layout.LstmWeightIh()) * x;
  input_part.colwise() += VectorOf(params, layout.LstmBias());

  cache.gates.resize(4 * H, S * B);
  cache.cells = Mat::Zero(H, (S + 1) * B);
  cache.hidden = Mat::Zero(H, (S + 1) * B);
  for (std::size_t t = 0; t < S; ++t) {
    Mat a = input_part.middleCols(t * B, B);
    a.noalias() += w_hh * cache.hidden.middleCols(t * B, B);
    auto gates = cache.gates.middleCols(t * B, B);
    gates.topRows(H) = a.topRows(H).unaryExpr(&Sigmoid);
    gates.middleRows(H, H) = a.middleRows(H, H).unaryExpr(&Sigmoid);
    gates.middleRows(2 * H, H) = a.middleRows(2 * H, H).array().tanh().matrix();
    gates.bottomRows(H) = a.bottomRows(H).unaryExpr(&Sigmoid);
    auto c_next = cache.cells.middleCols((t + 1) * B, B);
    c_next = gates.middleRows(H, H).cwiseProduct(cache.cells.middleCols(t * B, B)) +
             gates.topRows(H).cwiseProduct(gates.middleRows(2 * H, H));
    cache.hidden.middleCols((t + 1) * B, B) =
        gates.bottomRows(H).cwiseProduct(c_next.array().tanh().matrix());
  }

  Mat scores = MatrixOf(params, layout.DenseWeight()) *
               cache.hidden.middleCols(S * B, B);
  scores.colwise() += VectorOf(params, layout.DenseBias());
  const std::size_t classes = config.num_classes;
  out.scores.resize(B * classes);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t k = 0; k < classes; ++k) {
      out.scores[b * classes + k] = scores(k, b);
    }
  }
  return out;
}

std::vector<double> ClassWeights(std::span<const int> labels,
                                 std::size_t num_classes) {
  std::vector<std::size_t> counts(num_classes, 0);
  for (int l : labels) {
    Require(l >= 0 && static_cast<std::size_t>(l) < num_classes,
            ErrorCode::kInvalidArgument, "label out of range");
    ++counts[l];
  }
  std::vector<double> weights(num_classes, 0.0);
  const double n = static_cast<double>(labels.size());
  for (std::size_t k = 0; k < num_classes; ++k) {
    if (counts[k] > 0) {
      weights[k] = n / (static_cast<double>(num_classes) * counts[k]);
    }
  }
  return weights;
}

LossAndGradient LossAndGrad(const ParameterSet& params,
                            std::span<const double> batch,
                            std::span<const int> labels,
                            const ModelConfig& config,
                            const TrainConfig& train,
                            std::span<const double> class_weights,
                            const ParameterSet* global_ref) {
  const std::size_t B = labels.size();
  const std::size_t classes = config.num_classes;
  for (int l : labels) {
    Require(l >= 0 && static_cast<std::size_t>(l) < classes,
            ErrorCode::kInvalidArgument,
            "label " + std::to_string(l) + " outside [0, " +
                std::to_string(classes) + ")");
  }
  Require(class_weights.empty() || class_weights.size() == classes,
          ErrorCode::kInvalidArgument, "class weight count mismatch");
  ForwardResult fwd = Forward(params, batch, B, config);
  const ForwardCache& cache = fwd.cache;
  const Layout layout{config.conv_layers};
  const std::size_t H = config.hidden_units;
  const std::size_t S = config.SequenceLength();
  const std::size_t K = config.filter_size;

  LossAndGradient result;
  result.grads = params.ZerosLike();
  ParameterSet& grads = result.grads;

  // Softmax cross-entropy on the scores.
  Mat d_scores(classes, B);
  double loss = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const double* s = fwd.scores.data() + b * classes;
    const double max = *std::max_element(s, s + classes);
    double sum = 0.0;
    for (std::size_t k = 0; k < classes; ++k) sum += std::exp(s[k] - max);
    const double lse = max + std::log(sum);
    const int y = labels[b];
    const double w = class_weights.empty() ? 1.0 : class_weights[y];
    loss += -w * (s[y] - lse);
    for (std::size_t k = 0; k < classes; ++k) {
      const double p = std::exp(s[k] - lse);
      d_scores(k, b) = w * (p - (static_cast<int>(k) == y ? 1.0 : 0.0)) / B;
    }
  }
  loss /= static_cast<double>(B);

  // Dense layer.
  const auto h_last = cache.hidden.middleCols(S * B, B);
  MutableMatrixOf(grads, layout.DenseWeight()) = d_scores * h_last.transpose();
  MutableVectorOf(grads, layout.DenseBias()) = d_scores.rowwise().sum();
  Mat d_h = MatrixOf(params, layout.DenseWeight()).transpose() * d_scores;
  Mat d_c = Mat::Zero(H, B);

  // Backpropagation through time.
  const auto w_hh = MatrixOf(params, layout.LstmWeightHh());
  Mat d_pre(4 * H, S * B);
  for (std::size_t t = S; t-- > 0;) {
    const auto gates = cache.gates.middleCols(t * B, B);
    const auto i = gates.topRows(H).array();
    const auto f = gates.middleRows(H, H).array();
    const auto g = gates.middleRows(2 * H, H).array();
    const auto o = gates.bottomRows(H).array();
    const Eigen::ArrayXXd tanh_c =
        cache.cells.middleCols((t + 1) * B, B).array().tanh();
    const auto c_prev = cache.cells.middleCols(t * B, B).array();

    d_c.array() += d_h.array() * o * (1.0 - tanh_c.square());
    auto d = d_pre.middleCols(t * B, B);
    d.topRows(H) = (d_c.array() * g * i * (1.0 - i)).matrix();
    d.middleRows(H, H) = (d_c.array() * c_prev * f * (1.0 - f)).matrix();
    d.middleRows(2 * H, H) = (d_c.array() * i * (1.0 - g.square())).matrix();
    d.bottomRows(H) = (d_h.array() * tanh_c * o * (1.0 - o)).matrix();
    d_c.array() *= f;
    d_h.noalias() = w_hh.transpose() * d;
  }
  MutableMatrixOf(grads, layout.LstmWeightIh()) =
      d_pre * cache.lstm_input.transpose();
  MutableMatrixOf(grads, layout.LstmWeightHh()) =
      d_pre * cache.hidden.leftCols(S * B).transpose();
  MutableVectorOf(grads, layout.LstmBias()) = d_pre.rowwise().sum();
  const Mat d_x = MatrixOf(params, layout.LstmWeightIh()).transpose() * d_pre;

  // Back to (window, time) column order for the convolutions.
  Mat d_act(d_x.rows(), B * S);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < S; ++t) d_act.col(b * S + t) = d_x.col(t * B + b);
  }

  for (std::size_t l = config.conv_layers; l-- > 0;) {
    const Mat& pre = cache.conv_pre[l];
    const Mat d_z = (pre.array() > 0.0).select(d_act.array(), 0.0).matrix();
    MutableMatrixOf(grads, layout.ConvWeight(l)) =
        d_z * cache.conv_columns[l].transpose();
    MutableVectorOf(grads, layout.ConvBias(l)) = d_z.rowwise().sum();
    if (l == 0) break;
    const Mat d_columns = MatrixOf(params, layout.ConvWeight(l)).transpose() * d_z;
    const std::size_t c_in = config.conv_filters;
    const std::size_t t_out = pre.cols() / B;
    const std::size_t t_in = t_out + K - 1;
    Mat d_in = Mat::Zero(c_in, B * t_in);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t t = 0; t < t_out; ++t) {
        const double* src = d_columns.col(b * t_out + t).data();
        for (std::size_t c = 0; c < c_in; ++c) {
          for (std::size_t k = 0; k < K; ++k) {
            d_in(c, b * t_in + t + k) += src[c * K + k];
          }
        }
      }
    }
    d_act = std::move(d_in);
  }

  if (train.prox_mu > 0.0) {
    Require(global_ref != nullptr, ErrorCode::kInvalidArgument,
            "prox_mu > 0 requires a global reference");
    CheckSameSchema(params, *global_ref);
    double dist = 0.0;
    for (std::size_t e = 0; e < params.size(); ++e) {
      const auto& w = params.entries()[e].values;
      const auto& w0 = global_ref->entries()[e].values;
      auto& g = grads.mutable_entry(e).values;
      for (std::size_t j = 0; j < w.size(); ++j) {
        const double diff = w[j] - w0[j];
        dist += diff * diff;
        g[j] += train.prox_mu * diff;
      }
    }
    loss += 0.5 * train.prox_mu * dist;
  }
  result.loss = loss;
  return result;
}

void AdamStep(ParameterSet& params, const ParameterSet& grads,
              AdamState& state, const TrainConfig& train) {
  CheckSameSchema(params, grads);
  CheckSameSchema(params, state.first_moment);
  CheckSameSchema(params, state.second_moment);
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double b1 = train.beta1;
  const double b2 = train.beta2;
  const double correction1 = 1.0 - std::pow(b1, t);
  const double correction2 = 1.0 - std::pow(b2, t);
  const double lr = train.learning_rate;
  const double wd = train.weight_decay;
  for (std::size_t e = 0; e < params.size(); ++e) {
    auto& p = params.mutable_entry(e).values;
    const auto& g = grads.entries()[e].values;
    auto& m = state.first_moment.mutable_entry(e).values;
    auto& v = state.second_moment.mutable_entry(e).values;
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] = p[j] - lr * (m_hat / (std::sqrt(v_hat) + train.epsilon)) -
             lr * wd * p[j];
    }
  }
}

ClientUpdate LocalTrain(const ParameterSet& start_params,
                        const data::WindowedDataset& shard,
                        const ModelConfig& config, const TrainConfig& train,
                        std::uint64_t client_id, std::uint64_t round) {
  Require(shard.size() > 0, ErrorCode::kData,
          "client " + std::to_string(client_id) + " has an empty shard");
  Require(train.batch_size > 0, ErrorCode::kConfig, "batch_size must be positive");
  const std::size_t n = shard.size();
  const std::vector<double> weights = ClassWeights(shard.labels, config.num_classes);
  ParameterSet params = start_params;
  AdamState adam = AdamState::ZerosFor(params);
  Rng rng(train.seed);
  std::vector<std::size_t> order(n);
  std::vector<double> batch;
  std::vector<int> labels;
  double epoch_loss = 0.0;
  for (std::size_t epoch = 0; epoch < train.local_epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.Shuffle(order);
    epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += train.batch_size) {
      const std::size_t end = std::min(n, start + train.batch_size);
      batch.clear();
      labels.clear();
      for (std::size_t j = start; j < end; ++j) {
        auto w = shard.Window(order[j]);
        batch.insert(batch.end(), w.begin(), w.end());
        labels.push_back(shard.labels[order[j]]);
      }
      auto lg = LossAndGrad(params, batch, labels, config, train, weights,
                            train.prox_mu > 0.0 ? &start_params : nullptr);
      epoch_loss += lg.loss * static_cast<double>(end - start);
      AdamStep(params, lg.grads, adam, train);
    }
    epoch_loss /= static_cast<double>(n);
  }
  return {client_id, round, std::move(params), n, epoch_loss};
}

std::vector<int> ArgmaxRows(std::span<const double> scores,
                            std::size_t num_classes) {
  Require(num_classes > 0 && scores.size() % num_classes == 0,
          ErrorCode::kInvalidArgument, "score count is not a multiple of K");
  std::vector<int> out(scores.size() / num_classes);
  for (std::size_t b = 0; b < out.size(); ++b) {
    const double* row = scores.data() + b * num_classes;
    std::size_t best = 0;
    for (std::size_t k = 1; k < num_classes; ++k) {
      if (row[k] > row[best]) best = k;
    }
    out[b] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> Predict(const ParameterSet& params,
                         const data::WindowedDataset& windows,
                         const ModelConfig& config) {
  Require(windows.num_channels == config.in_channels &&
              windows.window_len == config.window_len,
          ErrorCode::kInvalidArgument, "dataset shape does not match model");
  std::vector<int> labels;
  labels.reserve(windows.size());
  const std::size_t stride = windows.window_size();
  for (std::size_t start = 0; start < windows.size(); start += kEvalChunk) {
    const std::size_t count = std::min(kEvalChunk, windows.size() - start);
    std::span<const double> chunk(windows.values.data() + start * stride,
                                  count * stride);
    auto fwd = Forward(params, chunk, count, config);
    auto chunk_labels = ArgmaxRows(fwd.scores, config.num_classes);
    labels.insert(labels.end(), chunk_labels.begin(), chunk_labels.end());
  }
  return labels;
}

metrics::Metrics Evaluate(const ParameterSet& params,
                          const data::WindowedDataset& dataset,
                          const ModelConfig& config) {
  auto predicted = Predict(params, dataset, config);
  return metrics::Evaluate(dataset.labels, predicted,
                           static_cast<int>(config.num_classes));
}

}  // namespace fedledger::model
