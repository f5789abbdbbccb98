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

#ifndef FEDLEDGER_AGGREGATION_H_
#define FEDLEDGER_AGGREGATION_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedledger/client_update.h"
#include "fedledger/params.h"

namespace fedledger::aggregation {

enum class StrategyKind { kFedAvg, kFedProx, kFedTrimmedAvg, kKrum, kFedAvgM };

inline constexpr StrategyKind kAllStrategies[] = {
    StrategyKind::kFedAvg, StrategyKind::kFedProx, StrategyKind::kFedTrimmedAvg,
    StrategyKind::kKrum, StrategyKind::kFedAvgM};

std::string ToString(StrategyKind kind);
// Throws kConfig for unknown names.
StrategyKind ParseStrategyKind(const std::string& name);

struct StrategyConfig {
  StrategyKind kind = StrategyKind::kFedAvg;
  double trim_fraction = 0.2;
  std::uint64_t krum_f = 0;
  double server_momentum = 0.9;
  double server_lr = 1.0;
  double prox_mu = 0.01;

  void Validate() const;
};

struct ServerState {
  ParameterSet global_params;
  std::optional<ParameterSet> momentum_buffer;  // FedAvgM only
  std::uint64_t round = 0;

  // Zero momentum buffer for FedAvgM, none otherwise.
  static ServerState Initial(ParameterSet params, StrategyKind kind);
};

// Example-count weighted mean, accumulated in ascending client_id order.
ParameterSet FedAvg(std::span<const ClientUpdate> updates);

// Same server rule as FedAvg; the proximal term lives in local training.
inline ParameterSet FedProxAggregate(std::span<const ClientUpdate> updates) {
  return FedAvg(updates);
}

// Coordinatewise mean after dropping floor(trim_fraction * n) values from
// each end. Example counts are ignored.
ParameterSet FedTrimmedAvg(std::span<const ClientUpdate> updates,
                           double trim_fraction);

struct KrumSelection {
  std::size_t selected = 0;     // position in the input span
  std::vector<double> scores;   // per input position
};

// Score = sum of the n - f - 2 smallest squared distances to other updates.
// Minimum wins; ties go to the lowest client_id.
KrumSelection KrumSelect(std::span<const ClientUpdate> updates,
                         std::uint64_t krum_f);

// Server momentum on the pseudo-gradient (global - average).
ServerState FedAvgMStep(const ServerState& state,
                        std::span<const ClientUpdate> updates,
                        double server_momentum, double server_lr);

// Dispatches on config.kind and advances the round.
ServerState Aggregate(const ServerState& state,
                      std::span<const ClientUpdate> updates,
                      const StrategyConfig& config);

}  // namespace fedledger::aggregation

#endif  // FEDLEDGER_AGGREGATION_H_
