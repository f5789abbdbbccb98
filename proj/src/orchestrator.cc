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

#include "fedledger/orchestrator.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <utility>

#include "fedledger/error.h"
#include "fedledger/random.h"

namespace fedledger {
namespace {

using aggregation::StrategyKind;
using Seconds = std::chrono::duration<double>;

// ---------------------------------------------------------------------------
// Config plumbing.

std::string JoinPath(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

void MergeStrict(Json& base, const Json& patch, const std::string& prefix) {
  Require(patch.is_object(), ErrorCode::kConfig,
          "config section '" + (prefix.empty() ? std::string("<root>") : prefix) +
              "' must be an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string path = JoinPath(prefix, key);
    Require(base.contains(key), ErrorCode::kConfig,
            "unknown config key '" + path + "'");
    Json& slot = base[key];
    if (slot.is_object()) {
      MergeStrict(slot, value, path);
    } else {
      slot = value;
    }
  }
}

const Json& At(const Json& j, const std::string& path) {
  const Json* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    Require(node->is_object() && node->contains(key), ErrorCode::kConfig,
            "missing config key '" + path + "'");
    node = &(*node)[key];
    if (dot == std::string::npos) return *node;
    start = dot + 1;
  }
}

[[noreturn]] void WrongType(const std::string& path, const char* expected) {
  Fail(ErrorCode::kConfig, "config key '" + path + "' must be " + expected);
}

std::uint64_t ReadUnsigned(const Json& j, const std::string& path) {
  const Json& v = At(j, path);
  if (!v.is_number_unsigned()) WrongType(path, "a nonnegative integer");
  return v.get<std::uint64_t>();
}

std::int64_t ReadInt(const Json& j, const std::string& path) {
  const Json& v = At(j, path);
  if (!v.is_number_integer()) WrongType(path, "an integer");
  return v.get<std::int64_t>();
}

double ReadDouble(const Json& j, const std::string& path) {
  const Json& v = At(j, path);
  if (!v.is_number()) WrongType(path, "a number");
  return v.get<double>();
}

std::string ReadString(const Json& j, const std::string& path) {
  const Json& v = At(j, path);
  if (!v.is_string()) WrongType(path, "a string");
  return v.get<std::string>();
}

Json ParseValue(const std::string& text) {
  Json v = Json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (v.is_discarded()) return Json(text);
  return v;
}

// ---------------------------------------------------------------------------
// Small helpers.

metrics::Summary MeanOf(std::span<const metrics::Summary> xs) {
  metrics::Summary m;
  if (xs.empty()) return m;
  for (const auto& x : xs) {
    m.precision += x.precision;
    m.recall += x.recall;
    m.f1 += x.f1;
  }
  const double n = static_cast<double>(xs.size());
  m.precision /= n;
  m.recall /= n;
  m.f1 /= n;
  return m;
}

// Mean over the records of each fold, then over folds.
void Summarize(ExperimentResult& result) {
  std::map<std::size_t, std::vector<metrics::Summary>> by_fold;
  for (const auto& r : result.runs) by_fold[r.fold].push_back(metrics::Macro(r.metrics));
  result.fold_means.clear();
  for (const auto& [fold, xs] : by_fold) result.fold_means.push_back(MeanOf(xs));
  result.mean = MeanOf(result.fold_means);
}

class PhaseTimer {
 public:
  explicit PhaseTimer(double& sink)
      : sink_(sink), start_(std::chrono::steady_clock::now()) {}
  ~PhaseTimer() { sink_ += Seconds(std::chrono::steady_clock::now() - start_).count(); }

 private:
  double& sink_;
  std::chrono::steady_clock::time_point start_;
};

void Report(const RunOptions& options, const std::string& message) {
  if (options.progress) options.progress(message);
}

std::unique_ptr<ledger::Clock> MakeClock(const LedgerSection& section) {
  if (section.clock == "system") return std::make_unique<ledger::SystemClock>();
  return std::make_unique<ledger::LogicalClock>(section.clock_start_ms, 1);
}

// Everything a (fold, run) pair needs, derived from the config alone.
struct FoldSetup {
  data::WindowedDataset train;
  data::WindowedDataset test;
};

struct Pipeline {
  PreparedData prepared;
  std::vector<data::Fold> folds;
  std::vector<std::string> warnings;

  FoldSetup Fold(std::size_t f) const {
    auto normalized = data::Normalize(prepared.windows.Subset(folds[f].train));
    FoldSetup s;
    s.test = data::ApplyNormalization(prepared.windows.Subset(folds[f].test),
                                      normalized.stats);
    s.train = std::move(normalized.dataset);
    return s;
  }
};

Pipeline BuildPipeline(const ExperimentConfig& config) {
  config.Validate();
  Pipeline p;
  p.prepared = PrepareData(config);
  p.folds = data::KFoldSplit(p.prepared.windows, config.folds,
                             DeriveSeed("kfold", {config.experiment_seed}),
                             &p.warnings);
  return p;
}

std::vector<ClientShard> MakeShards(const ExperimentConfig& config,
                                    const data::WindowedDataset& train,
                                    std::size_t fold, std::size_t run) {
  const auto plan = data::PartitionClients(
      train, config.num_clients, config.partition,
      DeriveSeed("partition", {config.experiment_seed, fold, run}));
  std::vector<ClientShard> shards;
  auto indices = plan.Shards();
  for (std::size_t c = 0; c < indices.size(); ++c) {
    ClientShard s;
    s.client_id = c;
    s.data = train.Subset(indices[c]);
    s.indices = std::move(indices[c]);
    shards.push_back(std::move(s));
  }
  return shards;
}

ParameterSet InitialParams(const ExperimentConfig& config,
                           const model::ModelConfig& model_config,
                           std::size_t fold, std::size_t run) {
  return model::InitGlorot(
      model_config, DeriveSeed("init", {config.experiment_seed, fold, run}));
}

void EnsureDir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  Require(!ec, ErrorCode::kIo, "cannot create output directory '" + dir + "'");
}

std::string Stem(const std::string& file) {
  return std::filesystem::path(file).stem().string();
}

void WriteOutputs(const ExperimentResult& result, const RunOptions& options) {
  if (options.output_dir.empty()) return;
  const std::string name = ResultFileName(result);
  WriteJsonFile(ResultToJson(result), options.output_dir, name);
  Json timings = Json::object();
  for (const auto& [phase, s] : result.phase_seconds) timings[phase] = s;
  WriteJsonFile(timings, options.output_dir,
                "timings_" + Stem(name).substr(std::string("result_").size()) +
                    ".json");
}

// Trains `params` alone on `shard` for the centralized schedule.
RunRecord TrainAlone(const ExperimentConfig& config,
                     const model::ModelConfig& model_config, ParameterSet params,
                     const data::WindowedDataset& shard,
                     const data::WindowedDataset& test, std::size_t fold,
                     std::size_t run, std::uint64_t client_id, double& train_s,
                     double& eval_s) {
  RunRecord record;
  record.fold = fold;
  record.run = run;
  record.round_digests.push_back(ComputeDigest(params));
  model::TrainConfig train = config.train;
  train.prox_mu = 0.0;
  for (std::uint64_t round = 1; round <= config.rounds; ++round) {
    train.seed = LocalSeed(config.experiment_seed, fold, run, client_id, round);
    ClientUpdate update;
    {
      PhaseTimer t(train_s);
      update = model::LocalTrain(params, shard, model_config, train, client_id, round);
    }
    params = std::move(update.params);
    RoundReport report;
    report.round = round;
    report.committed = true;
    report.client_losses = {update.train_loss};
    record.rounds.push_back(std::move(report));
    record.round_digests.push_back(ComputeDigest(params));
  }
  PhaseTimer t(eval_s);
  record.metrics = model::Evaluate(params, test, model_config);
  return record;
}

Json SummaryToJson(const metrics::Summary& s) {
  return Json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
}

Json ImprovementToJson(const metrics::Improvement& d) {
  return Json{{"precision", d.precision}, {"recall", d.recall}, {"f1", d.f1}};
}

Json MetricsToJson(const metrics::Metrics& m) {
  Json per_class = Json::array();
  for (const auto& c : m.per_class) {
    per_class.push_back({{"precision", c.precision},
                         {"recall", c.recall},
                         {"f1", c.f1},
                         {"support", c.support}});
  }
  return Json{{"confusion", m.confusion},
              {"per_class", std::move(per_class)},
              {"macro",
               {{"precision", m.macro_precision},
                {"recall", m.macro_recall},
                {"f1", m.macro_f1}}},
              {"weighted",
               {{"precision", m.weighted_precision},
                {"recall", m.weighted_recall},
                {"f1", m.weighted_f1}}},
              {"total", m.total}};
}

std::string ColumnName(const Json& result) {
  const std::string mode = result.at("mode").get<std::string>();
  if (mode == "federated") return result.at("strategy").get<std::string>();
  if (mode == "centralized") return "Centralized";
  return "Local";
}

std::string Cell(const std::string& text, std::size_t width) {
  if (text.size() >= width) return " " + text;
  return std::string(width - text.size(), ' ') + text;
}

std::string Header(const Json& doc) {
  const Json& config = doc.at("config");
  std::ostringstream out;
  out << "Dataset: " << config.at("dataset").at("source").get<std::string>()
      << " | seed " << doc.at("experiment_seed").get<std::uint64_t>()
      << " | clients " << config.at("num_clients").get<std::uint64_t>()
      << " | folds " << config.at("folds").get<std::uint64_t>() << " x runs "
      << config.at("runs").get<std::uint64_t>() << " | rounds "
      << config.at("rounds").get<std::uint64_t>() << "\n";
  return out.str();
}

constexpr std::size_t kLabelWidth = 10;

std::string MetricBlock(const std::vector<std::string>& columns,
                        const std::vector<const Json*>& summaries,
                        bool as_delta) {
  std::size_t width = 12;
  for (const auto& c : columns) width = std::max(width, c.size() + 2);
  std::ostringstream out;
  out << std::left << std::setw(kLabelWidth) << "Metric" << std::right;
  for (const auto& c : columns) out << Cell(c, width);
  out << "\n";
  const std::pair<const char*, const char*> rows[] = {
      {"Precision", "precision"}, {"Recall", "recall"}, {"F1-score", "f1"}};
  for (const auto& [label, key] : rows) {
    out << std::left << std::setw(kLabelWidth) << label << std::right;
    for (const Json* s : summaries) {
      std::string text = "n/a";
      if (s != nullptr) {
        const double v = s->at(key).get<double>();
        text = as_delta ? metrics::FormatDelta(v) : metrics::FormatPercent(v);
      }
      out << Cell(text, width);
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Config.

void ExperimentConfig::Validate() const {
  Require(dataset.source == "synthetic" || dataset.source == "csv",
          ErrorCode::kConfig, "dataset.source must be 'synthetic' or 'csv'");
  if (dataset.source == "csv") {
    Require(!dataset.csv_path.empty(), ErrorCode::kConfig,
            "dataset.csv_path is required for csv input");
    Require(dataset.num_classes >= 0, ErrorCode::kConfig,
            "dataset.num_classes must be nonnegative");
  } else {
    Require(dataset.num_classes >= 2, ErrorCode::kConfig,
            "dataset.num_classes must be at least 2");
    Require(dataset.samples_per_class >= dataset.window_len, ErrorCode::kConfig,
            "dataset.samples_per_class must cover one window");
    Require(dataset.noise_std >= 0.0, ErrorCode::kConfig,
            "dataset.noise_std must be nonnegative");
  }
  Require(dataset.sample_rate_hz > 0, ErrorCode::kConfig,
          "dataset.sample_rate_hz must be positive");
  Require(dataset.window_len > 0 && dataset.stride > 0, ErrorCode::kConfig,
          "dataset.window_len and dataset.stride must be positive");
  Require(model.conv_layers > 0 && model.conv_filters > 0 &&
              model.hidden_units > 0,
          ErrorCode::kConfig, "model sizes must be positive");
  const std::size_t filter =
      model.filter_size == 0 ? model::FilterSizeForSampleRate(dataset.sample_rate_hz)
                             : model.filter_size;
  Require(dataset.window_len > model.conv_layers * (filter - 1),
          ErrorCode::kConfig,
          "dataset.window_len must exceed model.conv_layers * (filter_size - 1)");
  Require(train.learning_rate > 0.0, ErrorCode::kConfig,
          "train.learning_rate must be positive");
  Require(train.weight_decay >= 0.0, ErrorCode::kConfig,
          "train.weight_decay must be nonnegative");
  Require(train.local_epochs >= 1, ErrorCode::kConfig,
          "train.local_epochs must be positive");
  Require(train.batch_size >= 1, ErrorCode::kConfig,
          "train.batch_size must be positive");
  Require(train.beta1 >= 0.0 && train.beta1 < 1.0 && train.beta2 >= 0.0 &&
              train.beta2 < 1.0 && train.epsilon > 0.0,
          ErrorCode::kConfig, "train Adam coefficients out of range");
  try {
    strategy.Validate();
    ledger.policy.Validate();
  } catch (const Error& e) {
    Fail(ErrorCode::kConfig, e.what());
  }
  Require(num_clients >= 1, ErrorCode::kConfig, "num_clients must be positive");
  if (strategy.kind == StrategyKind::kKrum) {
    Require(num_clients >= strategy.krum_f + 3, ErrorCode::kConfig,
            "Krum needs num_clients >= strategy.krum_f + 3");
  }
  Require(folds >= 2, ErrorCode::kConfig, "folds must be at least 2");
  Require(runs >= 1, ErrorCode::kConfig, "runs must be positive");
  Require(fold_limit <= folds, ErrorCode::kConfig,
          "fold_limit must not exceed folds");
  Require(ledger.clock == "logical" || ledger.clock == "system",
          ErrorCode::kConfig, "ledger.clock must be 'logical' or 'system'");
}

std::size_t ExperimentConfig::FoldsToRun() const {
  return fold_limit == 0 ? folds : fold_limit;
}

Json ConfigToJson(const ExperimentConfig& c) {
  Json strategies = Json::array();
  for (auto k : c.sweep_strategies) strategies.push_back(aggregation::ToString(k));
  return Json{
      {"dataset",
       {{"source", c.dataset.source},
        {"num_classes", c.dataset.num_classes},
        {"samples_per_class", c.dataset.samples_per_class},
        {"sample_rate_hz", c.dataset.sample_rate_hz},
        {"noise_std", c.dataset.noise_std},
        {"csv_path", c.dataset.csv_path},
        {"window_len", c.dataset.window_len},
        {"stride", c.dataset.stride}}},
      {"model",
       {{"conv_layers", c.model.conv_layers},
        {"conv_filters", c.model.conv_filters},
        {"filter_size", c.model.filter_size},
        {"hidden_units", c.model.hidden_units},
        {"forget_gate_bias", c.model.forget_gate_bias}}},
      {"train",
       {{"learning_rate", c.train.learning_rate},
        {"weight_decay", c.train.weight_decay},
        {"local_epochs", c.train.local_epochs},
        {"batch_size", c.train.batch_size},
        {"beta1", c.train.beta1},
        {"beta2", c.train.beta2},
        {"epsilon", c.train.epsilon}}},
      {"strategy",
       {{"kind", aggregation::ToString(c.strategy.kind)},
        {"trim_fraction", c.strategy.trim_fraction},
        {"krum_f", c.strategy.krum_f},
        {"server_momentum", c.strategy.server_momentum},
        {"server_lr", c.strategy.server_lr},
        {"prox_mu", c.strategy.prox_mu}}},
      {"num_clients", c.num_clients},
      {"rounds", c.rounds},
      {"folds", c.folds},
      {"runs", c.runs},
      {"fold_limit", c.fold_limit},
      {"partition", data::ToString(c.partition)},
      {"experiment_seed", c.experiment_seed},
      {"ledger",
       {{"peer_count", c.ledger.policy.peer_count},
        {"required_endorsements", c.ledger.policy.required_endorsements},
        {"clock", c.ledger.clock},
        {"clock_start_ms", c.ledger.clock_start_ms}}},
      {"sweep",
       {{"hidden_units", c.sweep_hidden_units}, {"strategies", std::move(strategies)}}},
  };
}

ExperimentConfig ConfigFromJson(const Json& patch) {
  Json j = ConfigToJson(ExperimentConfig{});
  MergeStrict(j, patch, "");
  ExperimentConfig c;
  c.dataset.source = ReadString(j, "dataset.source");
  c.dataset.num_classes = static_cast<int>(ReadInt(j, "dataset.num_classes"));
  c.dataset.samples_per_class = ReadUnsigned(j, "dataset.samples_per_class");
  c.dataset.sample_rate_hz = static_cast<int>(ReadInt(j, "dataset.sample_rate_hz"));
  c.dataset.noise_std = ReadDouble(j, "dataset.noise_std");
  c.dataset.csv_path = ReadString(j, "dataset.csv_path");
  c.dataset.window_len = ReadUnsigned(j, "dataset.window_len");
  c.dataset.stride = ReadUnsigned(j, "dataset.stride");
  c.model.conv_layers = ReadUnsigned(j, "model.conv_layers");
  c.model.conv_filters = ReadUnsigned(j, "model.conv_filters");
  c.model.filter_size = ReadUnsigned(j, "model.filter_size");
  c.model.hidden_units = ReadUnsigned(j, "model.hidden_units");
  c.model.forget_gate_bias = ReadDouble(j, "model.forget_gate_bias");
  c.train.learning_rate = ReadDouble(j, "train.learning_rate");
  c.train.weight_decay = ReadDouble(j, "train.weight_decay");
  c.train.local_epochs = ReadUnsigned(j, "train.local_epochs");
  c.train.batch_size = ReadUnsigned(j, "train.batch_size");
  c.train.beta1 = ReadDouble(j, "train.beta1");
  c.train.beta2 = ReadDouble(j, "train.beta2");
  c.train.epsilon = ReadDouble(j, "train.epsilon");
  c.strategy.kind = aggregation::ParseStrategyKind(ReadString(j, "strategy.kind"));
  c.strategy.trim_fraction = ReadDouble(j, "strategy.trim_fraction");
  c.strategy.krum_f = ReadUnsigned(j, "strategy.krum_f");
  c.strategy.server_momentum = ReadDouble(j, "strategy.server_momentum");
  c.strategy.server_lr = ReadDouble(j, "strategy.server_lr");
  c.strategy.prox_mu = ReadDouble(j, "strategy.prox_mu");
  c.num_clients = ReadUnsigned(j, "num_clients");
  c.rounds = ReadUnsigned(j, "rounds");
  c.folds = ReadUnsigned(j, "folds");
  c.runs = ReadUnsigned(j, "runs");
  c.fold_limit = ReadUnsigned(j, "fold_limit");
  try {
    c.partition = data::ParsePartitionMode(ReadString(j, "partition"));
  } catch (const Error& e) {
    Fail(ErrorCode::kConfig, e.what());
  }
  c.experiment_seed = ReadUnsigned(j, "experiment_seed");
  c.ledger.policy.peer_count = ReadUnsigned(j, "ledger.peer_count");
  c.ledger.policy.required_endorsements =
      ReadUnsigned(j, "ledger.required_endorsements");
  c.ledger.clock = ReadString(j, "ledger.clock");
  c.ledger.clock_start_ms = ReadInt(j, "ledger.clock_start_ms");

  const Json& hidden = At(j, "sweep.hidden_units");
  if (!hidden.is_array()) WrongType("sweep.hidden_units", "an array");
  c.sweep_hidden_units.clear();
  for (const auto& h : hidden) {
    if (!h.is_number_unsigned() || h.get<std::uint64_t>() == 0) {
      WrongType("sweep.hidden_units", "an array of positive integers");
    }
    c.sweep_hidden_units.push_back(h.get<std::size_t>());
  }
  const Json& strategies = At(j, "sweep.strategies");
  if (!strategies.is_array()) WrongType("sweep.strategies", "an array");
  c.sweep_strategies.clear();
  for (const auto& s : strategies) {
    if (!s.is_string()) WrongType("sweep.strategies", "an array of strategy names");
    c.sweep_strategies.push_back(aggregation::ParseStrategyKind(s.get<std::string>()));
  }
  c.Validate();
  return c;
}

void CheckConfigKeys(const Json& patch) {
  Json j = ConfigToJson(ExperimentConfig{});
  MergeStrict(j, patch, "");
}

void ApplyOverride(Json& j, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  Require(eq != std::string::npos && eq > 0, ErrorCode::kConfig,
          "override '" + assignment + "' is not KEY=VALUE");
  const std::string path = assignment.substr(0, eq);
  Json value = ParseValue(assignment.substr(eq + 1));
  // Build the nested patch and merge it so unknown keys are caught later.
  Json* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    Require(!key.empty(), ErrorCode::kConfig, "override key '" + path + "' is malformed");
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    Json& child = (*node)[key];
    if (!child.is_object()) child = Json::object();
    node = &child;
    start = dot + 1;
  }
}

ExperimentConfig LoadConfig(const std::string& path,
                            std::span<const std::string> overrides) {
  Json j = Json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    Require(in.good(), ErrorCode::kConfig, "cannot read config '" + path + "'");
    try {
      j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      Fail(ErrorCode::kConfig, "config '" + path + "' is not valid JSON: " + e.what());
    }
    Require(j.is_object(), ErrorCode::kConfig,
            "config '" + path + "' must hold a JSON object");
  }
  for (const auto& o : overrides) ApplyOverride(j, o);
  return ConfigFromJson(j);
}

// ---------------------------------------------------------------------------
// Data.

namespace {

data::SyntheticSpec SyntheticSpecFor(const ExperimentConfig& config) {
  data::SyntheticSpec spec;
  spec.num_classes = config.dataset.num_classes;
  spec.samples_per_class = config.dataset.samples_per_class;
  spec.sample_rate_hz = config.dataset.sample_rate_hz;
  spec.noise_std = config.dataset.noise_std;
  spec.seed = DeriveSeed("synthetic", {config.experiment_seed});
  return spec;
}

}  // namespace

PreparedData PrepareData(const ExperimentConfig& config) {
  data::TimeSeriesRecord record;
  const auto& d = config.dataset;
  if (d.source == "csv") {
    record = data::LoadCsv(d.csv_path, d.sample_rate_hz, d.num_classes);
  } else {
    record = data::GenerateSynthetic(SyntheticSpecFor(config));
  }
  PreparedData p;
  p.windows = data::MakeWindows(record, d.window_len, d.stride);
  p.model.in_channels = p.windows.num_channels;
  p.model.window_len = d.window_len;
  p.model.conv_layers = config.model.conv_layers;
  p.model.conv_filters = config.model.conv_filters;
  p.model.filter_size = config.model.filter_size == 0
                            ? model::FilterSizeForSampleRate(d.sample_rate_hz)
                            : config.model.filter_size;
  p.model.hidden_units = config.model.hidden_units;
  p.model.num_classes = static_cast<std::size_t>(p.windows.num_classes);
  p.model.forget_gate_bias = config.model.forget_gate_bias;
  p.model.Validate();
  return p;
}

void GenerateDataCsv(const ExperimentConfig& config, const std::string& path) {
  Require(config.dataset.source == "synthetic", ErrorCode::kConfig,
          "gen-data needs dataset.source = synthetic");
  data::WriteCsv(data::GenerateSynthetic(SyntheticSpecFor(config)), path);
}

std::uint64_t LocalSeed(std::uint64_t experiment_seed, std::size_t fold,
                        std::size_t run, std::uint64_t client_id,
                        std::uint64_t round) {
  return DeriveSeed("local", {experiment_seed, fold, run, client_id, round});
}

// ---------------------------------------------------------------------------
// Rounds and runs.

RoundReport RunRound(aggregation::ServerState& state,
                     std::span<const ClientShard> clients,
                     const model::ModelConfig& model_config,
                     const model::TrainConfig& train,
                     const aggregation::StrategyConfig& strategy,
                     ledger::LedgerNetwork& network, const RoundContext& ctx,
                     const ExperimentHooks& hooks) {
  Require(!clients.empty(), ErrorCode::kInvalidArgument, "round needs clients");
  RoundReport report;
  report.round = state.round + 1;
  model::TrainConfig client_train = train;
  client_train.prox_mu =
      strategy.kind == StrategyKind::kFedProx ? strategy.prox_mu : 0.0;

  std::vector<ClientUpdate> updates;
  updates.reserve(clients.size());
  for (const auto& client : clients) {
    if (hooks.on_local_train) hooks.on_local_train(ctx.fold, ctx.run, report.round, client);
    client_train.seed = LocalSeed(ctx.experiment_seed, ctx.fold, ctx.run,
                                  client.client_id, report.round);
    updates.push_back(model::LocalTrain(state.global_params, client.data,
                                        model_config, client_train,
                                        client.client_id, report.round));
    report.client_losses.push_back(updates.back().train_loss);
  }

  for (std::size_t attempt = 1; attempt <= 2; ++attempt) {
    report.attempts = attempt;
    auto next = aggregation::Aggregate(state, updates, strategy);
    if (hooks.tamper_aggregate) hooks.tamper_aggregate(report.round, next.global_params);
    auto outcome =
        network.Commit(state, updates, next.global_params, report.round, strategy);
    if (outcome.committed) {
      state = std::move(next);
      report.committed = true;
      report.reason.clear();
      return report;
    }
    report.reason = outcome.reason;
  }
  state.round = report.round;
  return report;
}

ExperimentResult RunFederated(const ExperimentConfig& config,
                              const RunOptions& options) {
  const auto wall_start = std::chrono::steady_clock::now();
  ExperimentResult result;
  result.mode = "federated";
  result.config = config;
  double data_s = 0, train_s = 0, commit_s = 0, eval_s = 0;
  Pipeline pipeline;
  {
    PhaseTimer t(data_s);
    pipeline = BuildPipeline(config);
  }
  result.warnings = pipeline.warnings;
  const auto& model_config = pipeline.prepared.model;
  if (!options.output_dir.empty()) EnsureDir(options.output_dir);

  for (std::size_t f = 0; f < config.FoldsToRun(); ++f) {
    FoldSetup setup;
    {
      PhaseTimer t(data_s);
      setup = pipeline.Fold(f);
    }
    for (std::size_t r = 0; r < config.runs; ++r) {
      try {
        Report(options, "federated " + aggregation::ToString(config.strategy.kind) +
                            ": fold " + std::to_string(f) + ", run " +
                            std::to_string(r));
        const auto shards = MakeShards(config, setup.train, f, r);
        auto state = aggregation::ServerState::Initial(
            InitialParams(config, model_config, f, r), config.strategy.kind);
        auto clock = MakeClock(config.ledger);
        ledger::LedgerNetwork network(config.ledger.policy, *clock);
        network.Initialize(state.global_params);

        RunRecord record;
        record.fold = f;
        record.run = r;
        record.round_digests.push_back(ComputeDigest(state.global_params));
        const RoundContext ctx{config.experiment_seed, f, r};
        for (std::size_t round = 1; round <= config.rounds; ++round) {
          const auto before = std::chrono::steady_clock::now();
          auto report = RunRound(state, shards, model_config, config.train,
                                 config.strategy, network, ctx, options.hooks);
          const double elapsed =
              Seconds(std::chrono::steady_clock::now() - before).count();
          train_s += elapsed;
          if (!report.committed) {
            ++result.failed_rounds;
            Report(options, "round " + std::to_string(report.round) +
                                " failed: " + report.reason);
          }
          record.rounds.push_back(std::move(report));
          record.round_digests.push_back(ComputeDigest(state.global_params));
        }
        {
          PhaseTimer t(eval_s);
          record.metrics = model::Evaluate(state.global_params, setup.test, model_config);
        }
        {
          PhaseTimer t(commit_s);
          record.chain = network.chain();
          const auto report = ledger::VerifyChain(record.chain);
          record.ledger_valid = report.valid;
          record.ledger_blocks = record.chain.size();
          if (!options.output_dir.empty()) {
            record.ledger_file = LedgerFileName(config, f, r);
            ledger::WriteChain(record.chain, (std::filesystem::path(options.output_dir) /
                                              record.ledger_file)
                                                 .string());
          }
        }
        result.runs.push_back(std::move(record));
      } catch (const Error& e) {
        Fail(e.code(), "fold " + std::to_string(f) + ", run " + std::to_string(r) +
                           ": " + e.what());
      }
    }
  }
  Summarize(result);
  result.phase_seconds = {
      {"data", data_s},
      {"rounds", train_s},
      {"ledger", commit_s},
      {"evaluate", eval_s},
      {"total", Seconds(std::chrono::steady_clock::now() - wall_start).count()}};
  WriteOutputs(result, options);
  return result;
}

namespace {

ExperimentResult RunAlone(const ExperimentConfig& config, const RunOptions& options,
                          bool per_client) {
  const auto wall_start = std::chrono::steady_clock::now();
  ExperimentResult result;
  result.mode = per_client ? "local" : "centralized";
  result.config = config;
  double data_s = 0, train_s = 0, eval_s = 0;
  Pipeline pipeline;
  {
    PhaseTimer t(data_s);
    pipeline = BuildPipeline(config);
  }
  result.warnings = pipeline.warnings;
  const auto& model_config = pipeline.prepared.model;
  if (!options.output_dir.empty()) EnsureDir(options.output_dir);

  for (std::size_t f = 0; f < config.FoldsToRun(); ++f) {
    FoldSetup setup;
    {
      PhaseTimer t(data_s);
      setup = pipeline.Fold(f);
    }
    for (std::size_t r = 0; r < config.runs; ++r) {
      try {
        Report(options, result.mode + ": fold " + std::to_string(f) + ", run " +
                            std::to_string(r));
        const auto init = InitialParams(config, model_config, f, r);
        if (!per_client) {
          result.runs.push_back(TrainAlone(config, model_config, init, setup.train,
                                           setup.test, f, r, 0, train_s, eval_s));
          continue;
        }
        for (const auto& shard : MakeShards(config, setup.train, f, r)) {
          if (options.hooks.on_local_train) {
            options.hooks.on_local_train(f, r, 0, shard);
          }
          auto record = TrainAlone(config, model_config, init, shard.data,
                                   setup.test, f, r, shard.client_id, train_s, eval_s);
          record.client = shard.client_id;
          result.runs.push_back(std::move(record));
        }
      } catch (const Error& e) {
        Fail(e.code(), "fold " + std::to_string(f) + ", run " + std::to_string(r) +
                           ": " + e.what());
      }
    }
  }
  Summarize(result);
  result.phase_seconds = {
      {"data", data_s},
      {"train", train_s},
      {"evaluate", eval_s},
      {"total", Seconds(std::chrono::steady_clock::now() - wall_start).count()}};
  WriteOutputs(result, options);
  return result;
}

}  // namespace

ExperimentResult RunCentralized(const ExperimentConfig& config,
                                const RunOptions& options) {
  return RunAlone(config, options, /*per_client=*/false);
}

ExperimentResult RunLocalOnly(const ExperimentConfig& config,
                              const RunOptions& options) {
  return RunAlone(config, options, /*per_client=*/true);
}

SweepResult RunSweep(const ExperimentConfig& config, const RunOptions& options) {
  config.Validate();
  Require(!config.sweep_hidden_units.empty() && !config.sweep_strategies.empty(),
          ErrorCode::kConfig, "sweep needs hidden units and strategies");
  SweepResult sweep;
  sweep.config = config;
  std::map<std::string, std::pair<metrics::Improvement, std::size_t>> sums;
  for (std::size_t hidden : config.sweep_hidden_units) {
    ExperimentConfig cell_config = config;
    cell_config.model.hidden_units = hidden;
    try {
      sweep.centralized.emplace(hidden, RunCentralized(cell_config, options));
    } catch (const Error& e) {
      sweep.centralized_errors[hidden] = e.what();
      Report(options, "centralized h" + std::to_string(hidden) + " failed: " + e.what());
    }
    for (auto kind : config.sweep_strategies) {
      SweepCell cell;
      cell.hidden_units = hidden;
      cell.strategy = kind;
      cell_config.strategy.kind = kind;
      try {
        cell.result = RunFederated(cell_config, options);
      } catch (const Error& e) {
        cell.error = e.what();
        Report(options, aggregation::ToString(kind) + " h" + std::to_string(hidden) +
                            " failed: " + e.what());
      }
      const auto central = sweep.centralized.find(hidden);
      if (cell.result && central != sweep.centralized.end()) {
        cell.improvement =
            metrics::ComputeImprovement(central->second.mean, cell.result->mean);
        auto& [sum, count] = sums[aggregation::ToString(kind)];
        sum.precision += cell.improvement.precision;
        sum.recall += cell.improvement.recall;
        sum.f1 += cell.improvement.f1;
        ++count;
      } else if (cell.error.empty()) {
        cell.error = "no centralized baseline for hidden units " + std::to_string(hidden);
      }
      sweep.cells.push_back(std::move(cell));
    }
  }
  for (const auto& [name, entry] : sums) {
    const auto& [sum, count] = entry;
    const double n = static_cast<double>(count);
    sweep.mean_improvement[name] = {sum.precision / n, sum.recall / n, sum.f1 / n};
  }
  if (!options.output_dir.empty()) {
    const Json doc = SweepToJson(sweep);
    WriteJsonFile(doc, options.output_dir, SweepFileName(config));
    std::ofstream out(std::filesystem::path(options.output_dir) /
                      ("table_s" + std::to_string(config.experiment_seed) + ".txt"));
    out << RenderTable(doc);
    Require(out.good(), ErrorCode::kIo, "failed writing the sweep table");
  }
  return sweep;
}

// ---------------------------------------------------------------------------
// Serialization and rendering.

Json ResultToJson(const ExperimentResult& result) {
  const bool federated = result.mode == "federated";
  Json runs = Json::array();
  for (const auto& r : result.runs) {
    Json rounds = Json::array();
    for (const auto& rr : r.rounds) {
      Json jr{{"round", rr.round}};
      if (federated) {
        jr["committed"] = rr.committed;
        jr["attempts"] = rr.attempts;
      }
      jr["client_losses"] = rr.client_losses;
      if (!rr.reason.empty()) jr["reason"] = rr.reason;
      rounds.push_back(std::move(jr));
    }
    Json digests = Json::array();
    for (const auto& d : r.round_digests) digests.push_back(d.ToHex());
    Json jrun{{"fold", r.fold}, {"run", r.run}};
    if (r.client) jrun["client"] = *r.client;
    jrun["metrics"] = MetricsToJson(r.metrics);
    jrun["rounds"] = std::move(rounds);
    jrun["round_digests"] = std::move(digests);
    if (federated) {
      jrun["ledger_file"] = r.ledger_file;
      jrun["ledger_blocks"] = r.ledger_blocks;
      jrun["ledger_valid"] = r.ledger_valid;
    }
    runs.push_back(std::move(jrun));
  }
  Json fold_means = Json::array();
  for (const auto& m : result.fold_means) fold_means.push_back(SummaryToJson(m));
  Json doc{{"mode", result.mode}};
  doc["strategy"] = federated ? Json(aggregation::ToString(result.config.strategy.kind))
                              : Json(nullptr);
  doc["hidden_units"] = result.config.model.hidden_units;
  doc["experiment_seed"] = result.config.experiment_seed;
  doc["config"] = ConfigToJson(result.config);
  doc["mean"] = SummaryToJson(result.mean);
  doc["fold_means"] = std::move(fold_means);
  if (federated) doc["failed_rounds"] = result.failed_rounds;
  doc["warnings"] = result.warnings;
  doc["runs"] = std::move(runs);
  return doc;
}

Json SweepToJson(const SweepResult& sweep) {
  const auto& config = sweep.config;
  Json strategies = Json::array();
  for (auto k : config.sweep_strategies) strategies.push_back(aggregation::ToString(k));
  Json centralized = Json::array();
  for (std::size_t hidden : config.sweep_hidden_units) {
    Json c{{"hidden_units", hidden}};
    if (auto it = sweep.centralized.find(hidden); it != sweep.centralized.end()) {
      c["result_file"] = ResultFileName(it->second);
      c["mean"] = SummaryToJson(it->second.mean);
    } else {
      c["error"] = sweep.centralized_errors.count(hidden)
                       ? sweep.centralized_errors.at(hidden)
                       : std::string("not run");
    }
    centralized.push_back(std::move(c));
  }
  Json cells = Json::array();
  for (const auto& cell : sweep.cells) {
    Json c{{"hidden_units", cell.hidden_units},
           {"strategy", aggregation::ToString(cell.strategy)}};
    if (cell.result) {
      c["result_file"] = ResultFileName(*cell.result);
      c["mean"] = SummaryToJson(cell.result->mean);
      Json ledgers = Json::array();
      for (const auto& r : cell.result->runs) {
        if (!r.ledger_file.empty()) ledgers.push_back(r.ledger_file);
      }
      c["ledger_files"] = std::move(ledgers);
    }
    if (cell.error.empty()) {
      c["improvement"] = ImprovementToJson(cell.improvement);
    } else {
      c["error"] = cell.error;
    }
    cells.push_back(std::move(c));
  }
  Json mean = Json::object();
  for (auto k : config.sweep_strategies) {
    const std::string name = aggregation::ToString(k);
    if (auto it = sweep.mean_improvement.find(name); it != sweep.mean_improvement.end()) {
      mean[name] = ImprovementToJson(it->second);
    }
  }
  return Json{{"mode", "sweep"},
              {"experiment_seed", config.experiment_seed},
              {"config", ConfigToJson(config)},
              {"hidden_units", config.sweep_hidden_units},
              {"strategies", std::move(strategies)},
              {"centralized", std::move(centralized)},
              {"cells", std::move(cells)},
              {"mean_improvement", std::move(mean)}};
}

std::string ResultFileName(const ExperimentResult& result) {
  const auto& c = result.config;
  const std::string tail = "h" + std::to_string(c.model.hidden_units) + "_s" +
                           std::to_string(c.experiment_seed) + ".json";
  if (result.mode == "federated") {
    return "result_federated_" + aggregation::ToString(c.strategy.kind) + "_" + tail;
  }
  return "result_" + result.mode + "_" + tail;
}

std::string SweepFileName(const ExperimentConfig& config) {
  return "sweep_s" + std::to_string(config.experiment_seed) + ".json";
}

std::string LedgerFileName(const ExperimentConfig& config, std::size_t fold,
                           std::size_t run) {
  return "ledger_" + aggregation::ToString(config.strategy.kind) + "_h" +
         std::to_string(config.model.hidden_units) + "_s" +
         std::to_string(config.experiment_seed) + "_f" + std::to_string(fold) +
         "_r" + std::to_string(run) + ".jsonl";
}

std::string SyntheticFileName(const ExperimentConfig& config) {
  return "synthetic_s" + std::to_string(config.experiment_seed) + ".csv";
}

std::string WriteJsonFile(const Json& j, const std::string& dir,
                          const std::string& name) {
  EnsureDir(dir);
  const std::string path = (std::filesystem::path(dir) / name).string();
  std::ofstream out(path, std::ios::binary);
  Require(out.good(), ErrorCode::kIo, "cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  Require(out.good(), ErrorCode::kIo, "failed writing '" + path + "'");
  return path;
}

Json ReadJsonFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  Require(in.good(), ErrorCode::kIo, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kData, "'" + path + "' is not valid JSON: " + e.what());
  }
}

std::string RenderTable(const Json& doc) {
  try {
    const std::string mode = doc.at("mode").get<std::string>();
    std::ostringstream out;
    out << Header(doc);
    if (mode != "sweep") {
      out << "Hidden units: " << doc.at("hidden_units").get<std::uint64_t>() << "\n";
      out << MetricBlock({ColumnName(doc)}, {&doc.at("mean")}, false);
      return out.str();
    }
    std::vector<std::string> strategies;
    for (const auto& s : doc.at("strategies")) strategies.push_back(s.get<std::string>());
    std::vector<std::string> columns = {"Centralized"};
    columns.insert(columns.end(), strategies.begin(), strategies.end());
    for (const auto& h : doc.at("hidden_units")) {
      const auto hidden = h.get<std::uint64_t>();
      std::vector<const Json*> summaries;
      const Json* central = nullptr;
      for (const auto& c : doc.at("centralized")) {
        if (c.at("hidden_units") == h && c.contains("mean")) central = &c.at("mean");
      }
      summaries.push_back(central);
      for (const auto& name : strategies) {
        const Json* found = nullptr;
        for (const auto& cell : doc.at("cells")) {
          if (cell.at("hidden_units") == h && cell.at("strategy") == name &&
              cell.contains("mean")) {
            found = &cell.at("mean");
          }
        }
        summaries.push_back(found);
      }
      out << "\nHidden units: " << hidden << "\n"
          << MetricBlock(columns, summaries, false);
    }
    std::vector<const Json*> deltas;
    const Json& mean = doc.at("mean_improvement");
    for (const auto& name : strategies) {
      deltas.push_back(mean.contains(name) ? &mean.at(name) : nullptr);
    }
    out << "\nImprovement over centralized (percentage points, mean over hidden units)\n"
        << MetricBlock(strategies, deltas, true);
    return out.str();
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kData, std::string("not a result document: ") + e.what());
  }
}

}  // namespace fedledger
