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

#ifndef FEDLEDGER_ORCHESTRATOR_H_
#define FEDLEDGER_ORCHESTRATOR_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedledger/aggregation.h"
#include "fedledger/data.h"
#include "fedledger/ledger.h"
#include "fedledger/metrics.h"
#include "fedledger/model.h"
#include "fedledger/params.h"
#include "json.hpp"

namespace fedledger {

using Json = nlohmann::ordered_json;

struct DatasetConfig {
  std::string source = "synthetic";  // "synthetic" or "csv"
  int num_classes = 6;               // csv: 0 infers from the labels
  std::size_t samples_per_class = 2000;
  int sample_rate_hz = 50;
  double noise_std = 0.2;
  std::string csv_path;
  std::size_t window_len = 50;
  std::size_t stride = 25;
};

struct ModelSection {
  std::size_t conv_layers = 4;
  std::size_t conv_filters = 64;
  std::size_t filter_size = 0;  // 0 derives it from the sample rate
  std::size_t hidden_units = 128;
  double forget_gate_bias = 1.0;
};

struct LedgerSection {
  ledger::LedgerConfig policy;
  std::string clock = "logical";  // "logical" or "system"
  std::int64_t clock_start_ms = 0;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  ModelSection model;
  model::TrainConfig train;  // seed is derived per client and round
  aggregation::StrategyConfig strategy;
  std::size_t num_clients = 3;
  std::size_t rounds = 20;
  std::size_t folds = 5;
  std::size_t runs = 5;
  std::size_t fold_limit = 0;  // evaluate only the first N folds; 0 = all
  data::PartitionMode partition = data::PartitionMode::kIid;
  std::uint64_t experiment_seed = 0;
  LedgerSection ledger;
  std::vector<std::size_t> sweep_hidden_units = {128, 256, 512};
  std::vector<aggregation::StrategyKind> sweep_strategies = {
      std::begin(aggregation::kAllStrategies),
      std::end(aggregation::kAllStrategies)};

  void Validate() const;
  std::size_t FoldsToRun() const;
};

// Field names follow the JSON config file, e.g. "model.hidden_units".
Json ConfigToJson(const ExperimentConfig& config);
// Keys missing from `j` keep their defaults; unknown keys are kConfig errors.
ExperimentConfig ConfigFromJson(const Json& j);
// Throws kConfig when `patch` names a key the config does not have.
void CheckConfigKeys(const Json& patch);
// Applies "dotted.path=value" to a config document. The value is parsed as
// JSON when possible and taken as a string otherwise.
void ApplyOverride(Json& j, const std::string& assignment);
// Empty path starts from the defaults.
ExperimentConfig LoadConfig(const std::string& path,
                            std::span<const std::string> overrides = {});

struct PreparedData {
  data::WindowedDataset windows;
  model::ModelConfig model;
};

PreparedData PrepareData(const ExperimentConfig& config);

// Seed for client `client_id` training in `round` of (fold, run).
std::uint64_t LocalSeed(std::uint64_t experiment_seed, std::size_t fold,
                        std::size_t run, std::uint64_t client_id,
                        std::uint64_t round);

struct ClientShard {
  std::uint64_t client_id = 0;
  std::vector<std::size_t> indices;  // into the fold's training windows
  data::WindowedDataset data;
};

struct ExperimentHooks {
  std::function<void(std::size_t fold, std::size_t run, std::uint64_t round,
                     const ClientShard& shard)>
      on_local_train;
  // Fault injection: may rewrite the server's aggregate before proposal.
  std::function<void(std::uint64_t round, ParameterSet& aggregate)>
      tamper_aggregate;
};

struct RoundContext {
  std::uint64_t experiment_seed = 0;
  std::size_t fold = 0;
  std::size_t run = 0;
};

struct RoundReport {
  std::uint64_t round = 0;
  bool committed = false;
  std::size_t attempts = 0;
  std::vector<double> client_losses;
  std::string reason;  // set when the round failed
};

// One federated round. On commit the state advances to the endorsed
// aggregate; a twice-rejected proposal leaves the model and momentum
// untouched and only the round counter moves.
RoundReport RunRound(aggregation::ServerState& state,
                     std::span<const ClientShard> clients,
                     const model::ModelConfig& model_config,
                     const model::TrainConfig& train,
                     const aggregation::StrategyConfig& strategy,
                     ledger::LedgerNetwork& network, const RoundContext& ctx,
                     const ExperimentHooks& hooks = {});

struct RunRecord {
  std::size_t fold = 0;
  std::size_t run = 0;
  std::optional<std::uint64_t> client;  // local-only runs
  metrics::Metrics metrics;
  std::vector<RoundReport> rounds;
  // Global model digest at initialization and after every round.
  std::vector<Digest> round_digests;
  std::string ledger_file;  // relative to the output directory
  std::size_t ledger_blocks = 0;
  bool ledger_valid = false;
  ledger::Chain chain;  // kept in memory, not serialized
};

struct ExperimentResult {
  std::string mode;  // "federated", "centralized" or "local"
  ExperimentConfig config;
  std::vector<RunRecord> runs;
  metrics::Summary mean;                  // mean over runs, then folds
  std::vector<metrics::Summary> fold_means;
  std::size_t failed_rounds = 0;
  std::vector<std::string> warnings;
  std::map<std::string, double> phase_seconds;  // not part of the JSON
};

struct RunOptions {
  std::string output_dir;  // empty: nothing is written
  ExperimentHooks hooks;
  std::function<void(const std::string&)> progress;
};

ExperimentResult RunFederated(const ExperimentConfig& config,
                              const RunOptions& options = {});
// One trainer over the union of the client shards, for rounds x local_epochs
// epochs. Training restarts the optimizer every local_epochs epochs, using
// client 0's seed stream, so a single-client federation is reproduced
// exactly.
ExperimentResult RunCentralized(const ExperimentConfig& config,
                                const RunOptions& options = {});
// Every client trains alone on its shard with the centralized schedule.
ExperimentResult RunLocalOnly(const ExperimentConfig& config,
                              const RunOptions& options = {});

struct SweepCell {
  std::size_t hidden_units = 0;
  aggregation::StrategyKind strategy = aggregation::StrategyKind::kFedAvg;
  std::optional<ExperimentResult> result;
  metrics::Improvement improvement;
  std::string error;
};

struct SweepResult {
  ExperimentConfig config;
  std::map<std::size_t, ExperimentResult> centralized;  // by hidden units
  std::map<std::size_t, std::string> centralized_errors;
  std::vector<SweepCell> cells;
  // Per strategy, averaged over the hidden-unit values that succeeded.
  metrics::ImprovementTable mean_improvement;
};

SweepResult RunSweep(const ExperimentConfig& config,
                     const RunOptions& options = {});

Json ResultToJson(const ExperimentResult& result);
Json SweepToJson(const SweepResult& sweep);

std::string ResultFileName(const ExperimentResult& result);
std::string SweepFileName(const ExperimentConfig& config);
std::string LedgerFileName(const ExperimentConfig& config, std::size_t fold,
                           std::size_t run);
std::string SyntheticFileName(const ExperimentConfig& config);

// Writes `j` with a trailing newline and returns the path.
std::string WriteJsonFile(const Json& j, const std::string& dir,
                          const std::string& name);
Json ReadJsonFile(const std::string& path);

// Fixed-width table for a result or sweep document: metric rows by
// strategy columns, percentages with two decimals.
std::string RenderTable(const Json& document);

// Writes the configured synthetic recording as CSV.
void GenerateDataCsv(const ExperimentConfig& config, const std::string& path);

}  // namespace fedledger

#endif  // FEDLEDGER_ORCHESTRATOR_H_
