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

#include "fedledger/aggregation.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fedledger/error.h"

namespace fedledger::aggregation {

namespace {

void CheckUpdates(std::span<const ClientUpdate> updates) {
  Require(!updates.empty(), ErrorCode::kInvalidArgument,
          "aggregation needs at least one update");
  for (const auto& u : updates) {
    Require(u.num_examples >= 1, ErrorCode::kInvalidArgument,
            "client " + std::to_string(u.client_id) + " reported no examples");
    CheckSameSchema(updates.front().params, u.params);
  }
}

std::vector<std::size_t> ByClientId(std::span<const ClientUpdate> updates) {
  std::vector<std::size_t> order(updates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return updates[a].client_id < updates[b].client_id;
  });
  return order;
}

}  // namespace

std::string ToString(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kFedAvg: return "FedAvg";
    case StrategyKind::kFedProx: return "FedProx";
    case StrategyKind::kFedTrimmedAvg: return "FedTrimmedAvg";
    case StrategyKind::kKrum: return "Krum";
    case StrategyKind::kFedAvgM: return "FedAvgM";
  }
  return "unknown";
}

StrategyKind ParseStrategyKind(const std::string& name) {
  for (auto kind : kAllStrategies) {
    if (ToString(kind) == name) return kind;
  }
  Fail(ErrorCode::kConfig, "unknown strategy '" + name + "'");
}

void StrategyConfig::Validate() const {
  Require(trim_fraction >= 0.0 && trim_fraction < 0.5, ErrorCode::kConfig,
          "trim_fraction must be in [0, 0.5)");
  Require(server_momentum >= 0.0 && server_momentum < 1.0, ErrorCode::kConfig,
          "server_momentum must be in [0, 1)");
  Require(server_lr > 0.0, ErrorCode::kConfig, "server_lr must be positive");
  Require(prox_mu >= 0.0, ErrorCode::kConfig, "prox_mu must be nonnegative");
}

ServerState ServerState::Initial(ParameterSet params, StrategyKind kind) {
  ServerState s;
  if (kind == StrategyKind::kFedAvgM) s.momentum_buffer = params.ZerosLike();
  s.global_params = std::move(params);
  return s;
}

ParameterSet FedAvg(std::span<const ClientUpdate> updates) {
  CheckUpdates(updates);
  const auto order = ByClientId(updates);
  double total = 0.0;
  for (auto i : order) total += static_cast<double>(updates[i].num_examples);
  const auto& first = updates[order[0]];
  ParameterSet out =
      Scale(static_cast<double>(first.num_examples) / total, first.params);
  for (std::size_t j = 1; j < order.size(); ++j) {
    const auto& u = updates[order[j]];
    out = Axpy(static_cast<double>(u.num_examples) / total, u.params, out);
  }
  return out;
}

ParameterSet FedTrimmedAvg(std::span<const ClientUpdate> updates,
                           double trim_fraction) {
  CheckUpdates(updates);
  Require(trim_fraction >= 0.0 && trim_fraction < 0.5,
          ErrorCode::kInvalidArgument, "trim_fraction must be in [0, 0.5)");
  const std::size_t n = updates.size();
  const auto k = static_cast<std::size_t>(std::floor(trim_fraction * n));
  Require(n >= 2 * k + 1, ErrorCode::kInvalidArgument,
          "trimming " + std::to_string(k) + " per side leaves no values");
  const std::size_t kept = n - 2 * k;
  ParameterSet out = updates.front().params.ZerosLike();
  std::vector<double> column(n);
  for (std::size_t e = 0; e < out.size(); ++e) {
    auto& values = out.mutable_entry(e).values;
    for (std::size_t j = 0; j < values.size(); ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        column[i] = updates[i].params.entries()[e].values[j];
      }
      std::sort(column.begin(), column.end());
      double sum = 0.0;
      for (std::size_t i = k; i < n - k; ++i) sum += column[i];
      values[j] = sum / static_cast<double>(kept);
    }
  }
  return out;
}

KrumSelection KrumSelect(std::span<const ClientUpdate> updates,
                         std::uint64_t krum_f) {
  CheckUpdates(updates);
  const std::size_t n = updates.size();
  Require(n >= krum_f + 3, ErrorCode::kInvalidArgument,
          "Krum needs n >= f + 3 (n=" + std::to_string(n) +
              ", f=" + std::to_string(krum_f) + ")");
  const std::size_t neighbours = n - krum_f - 2;
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      dist[i][j] = dist[j][i] = L2DistanceSq(updates[i].params, updates[j].params);
    }
  }
  KrumSelection result;
  result.scores.resize(n);
  std::vector<double> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) row.push_back(dist[i][j]);
    }
    std::sort(row.begin(), row.end());
    double score = 0.0;
    for (std::size_t m = 0; m < neighbours; ++m) score += row[m];
    result.scores[i] = score;
  }
  for (std::size_t i = 1; i < n; ++i) {
    const double best = result.scores[result.selected];
    if (result.scores[i] < best ||
        (result.scores[i] == best &&
         updates[i].client_id < updates[result.selected].client_id)) {
      result.selected = i;
    }
  }
  return result;
}

ServerState FedAvgMStep(const ServerState& state,
                        std::span<const ClientUpdate> updates,
                        double server_momentum, double server_lr) {
  CheckUpdates(updates);
  CheckSameSchema(state.global_params, updates.front().params);
  const ParameterSet average = FedAvg(updates);
  const ParameterSet buffer =
      state.momentum_buffer ? *state.momentum_buffer
                            : state.global_params.ZerosLike();
  CheckSameSchema(state.global_params, buffer);

  ServerState next;
  next.round = state.round + 1;
  next.momentum_buffer = buffer.ZerosLike();
  next.global_params = average;
  // global - lr * (m * buf + (global - avg)) is evaluated as
  // avg + [(1 - lr)(global - avg) - lr * m * buf] so that m = 0, lr = 1
  // reproduces the plain average bit for bit.
  for (std::size_t e = 0; e < average.size(); ++e) {
    const auto& g = state.global_params.entries()[e].values;
    const auto& avg = average.entries()[e].values;
    const auto& buf = buffer.entries()[e].values;
    auto& buf_next = next.momentum_buffer->mutable_entry(e).values;
    auto& out = next.global_params.mutable_entry(e).values;
    for (std::size_t j = 0; j < g.size(); ++j) {
      const double delta = g[j] - avg[j];
      buf_next[j] = server_momentum * buf[j] + delta;
      const double correction =
          (1.0 - server_lr) * delta - server_lr * server_momentum * buf[j];
      if (correction != 0.0) out[j] = avg[j] + correction;
    }
  }
  return next;
}

ServerState Aggregate(const ServerState& state,
                      std::span<const ClientUpdate> updates,
                      const StrategyConfig& config) {
  config.Validate();
  CheckUpdates(updates);
  CheckSameSchema(state.global_params, updates.front().params);
  ServerState next;
  switch (config.kind) {
    case StrategyKind::kFedAvg:
      next.global_params = FedAvg(updates);
      break;
    case StrategyKind::kFedProx:
      next.global_params = FedProxAggregate(updates);
      break;
    case StrategyKind::kFedTrimmedAvg:
      next.global_params = FedTrimmedAvg(updates, config.trim_fraction);
      break;
    case StrategyKind::kKrum:
      next.global_params =
          updates[KrumSelect(updates, config.krum_f).selected].params;
      break;
    case StrategyKind::kFedAvgM:
      return FedAvgMStep(state, updates, config.server_momentum,
                         config.server_lr);
  }
  next.round = state.round + 1;
  return next;
}

}  // namespace fedledger::aggregation
