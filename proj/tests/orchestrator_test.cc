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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fedledger/error.h"
#include "gtest/gtest.h"

namespace fedledger {
namespace {

using aggregation::StrategyKind;

ExperimentConfig TinyConfig() {
  std::vector<std::string> overrides = {
      "dataset.samples_per_class=150", "dataset.window_len=20",
      "dataset.stride=10",             "model.conv_layers=1",
      "model.conv_filters=4",          "model.filter_size=3",
      "model.hidden_units=4",          "train.batch_size=8",
      "train.learning_rate=0.005",     "folds=3",
      "runs=2",                        "rounds=2",
      "experiment_seed=11"};
  return LoadConfig("", overrides);
}

std::string TempDir(const std::string& name) {
  auto dir = std::filesystem::path(::testing::TempDir()) / name;
  std::filesystem::remove_all(dir);
  return dir.string();
}

std::string Slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kRuntime;
}

TEST(ConfigTest, DefaultsRoundTrip) {
  ExperimentConfig defaults;
  const Json j = ConfigToJson(defaults);
  EXPECT_EQ(ConfigToJson(ConfigFromJson(j)), j);
  EXPECT_EQ(ConfigToJson(ConfigFromJson(Json::object())), j);
  EXPECT_EQ(defaults.num_clients, 3u);
  EXPECT_EQ(defaults.folds, 5u);
  EXPECT_EQ(defaults.runs, 5u);
  EXPECT_EQ(defaults.sweep_hidden_units, (std::vector<std::size_t>{128, 256, 512}));
  EXPECT_EQ(defaults.sweep_strategies.size(), 5u);
  EXPECT_EQ(defaults.train.learning_rate, 1e-4);
  EXPECT_EQ(defaults.train.weight_decay, 1e-6);
}

TEST(ConfigTest, OverridesUseDottedPaths) {
  std::vector<std::string> o = {"model.hidden_units=256", "strategy.kind=Krum",
                                "partition=label-skew", "sweep.hidden_units=[8,16]",
                                "train.learning_rate=1e-3"};
  auto c = LoadConfig("", o);
  EXPECT_EQ(c.model.hidden_units, 256u);
  EXPECT_EQ(c.strategy.kind, StrategyKind::kKrum);
  EXPECT_EQ(c.partition, data::PartitionMode::kLabelSkew);
  EXPECT_EQ(c.sweep_hidden_units, (std::vector<std::size_t>{8, 16}));
  EXPECT_EQ(c.train.learning_rate, 1e-3);
}

TEST(ConfigTest, ErrorsAreConfigErrors) {
  auto load = [](std::vector<std::string> o) { return [o] { LoadConfig("", o); }; };
  EXPECT_EQ(CodeOf(load({"model.hidden_unit=3"})), ErrorCode::kConfig);
  EXPECT_EQ(CodeOf(load({"nonsense"})), ErrorCode::kConfig);
  EXPECT_EQ(CodeOf(load({"rounds=-1"})), ErrorCode::kConfig);
  EXPECT_EQ(CodeOf(load({"rounds=\"ten\""})), ErrorCode::kConfig);
  EXPECT_EQ(CodeOf(load({"model=3"})), ErrorCode::kConfig);
  EXPECT_EQ(CodeOf(load({"strategy.kind=FedMedian"})), ErrorCode::kConfig);
  EXPECT_EQ(CodeOf(load({"partition=dirichlet"})), ErrorCode::kConfig);
  EXPECT_EQ(CodeOf(load({"strategy.kind=Krum", "strategy.krum_f=1"})),
            ErrorCode::kConfig);
  EXPECT_EQ(CodeOf(load({"dataset.window_len=40"})), ErrorCode::kConfig);
  EXPECT_EQ(CodeOf(load({"ledger.required_endorsements=3"})), ErrorCode::kConfig);
  EXPECT_EQ(CodeOf([] { LoadConfig("/nonexistent/config.json"); }), ErrorCode::kConfig);

  const std::string dir = TempDir("config_errors");
  std::filesystem::create_directories(dir);
  const std::string path = dir + "/bad.json";
  std::ofstream(path) << "{\"rounds\": 3, \"extra\": {}}";
  EXPECT_EQ(CodeOf([&] { LoadConfig(path); }), ErrorCode::kConfig);
  std::ofstream(path) << "{not json";
  EXPECT_EQ(CodeOf([&] { LoadConfig(path); }), ErrorCode::kConfig);
  std::ofstream(path) << "{\"rounds\": 3, \"model\": {\"hidden_units\": 7}}";
  auto c = LoadConfig(path);
  EXPECT_EQ(c.rounds, 3u);
  EXPECT_EQ(c.model.hidden_units, 7u);
}

TEST(PrepareDataTest, DerivesModelShape) {
  auto c = TinyConfig();
  auto p = PrepareData(c);
  EXPECT_EQ(p.model.in_channels, 3u);
  EXPECT_EQ(p.model.window_len, 20u);
  EXPECT_EQ(p.model.num_classes, 6u);
  EXPECT_EQ(p.windows.size(), (6u * 150u - 20u) / 10u + 1u);
  c.model.filter_size = 0;
  c.dataset.window_len = 50;
  EXPECT_EQ(PrepareData(c).model.filter_size, 11u);
}

TEST(PrepareDataTest, CsvMatchesSynthetic) {
  auto c = TinyConfig();
  const std::string dir = TempDir("csv_source");
  std::filesystem::create_directories(dir);
  const std::string path = dir + "/" + SyntheticFileName(c);
  GenerateDataCsv(c, path);
  auto csv = c;
  csv.dataset.source = "csv";
  csv.dataset.csv_path = path;
  const auto a = PrepareData(c);
  const auto b = PrepareData(csv);
  EXPECT_EQ(a.windows.values, b.windows.values);
  EXPECT_EQ(a.windows.labels, b.windows.labels);
}

TEST(RunRoundTest, SingleClientFedAvgIsThatClient) {
  auto c = TinyConfig();
  auto p = PrepareData(c);
  ClientShard shard;
  shard.client_id = 0;
  shard.data = p.windows;
  const auto init = model::InitGlorot(p.model, 5);
  auto state = aggregation::ServerState::Initial(init, StrategyKind::kFedAvg);
  ledger::LogicalClock clock;
  ledger::LedgerNetwork net(ledger::LedgerConfig{}, clock);
  net.Initialize(init);
  std::vector<ClientShard> clients = {shard};
  auto report = RunRound(state, clients, p.model, c.train, c.strategy, net, {7, 0, 0});
  EXPECT_TRUE(report.committed);
  EXPECT_EQ(report.attempts, 1u);
  EXPECT_EQ(state.round, 1u);

  auto train = c.train;
  train.seed = LocalSeed(7, 0, 0, 0, 1);
  const auto expected = model::LocalTrain(init, shard.data, p.model, train, 0, 1);
  EXPECT_TRUE(BitwiseEqual(state.global_params, expected.params));
  ASSERT_EQ(net.chain().size(), 2u);
  EXPECT_EQ(net.chain().back().params_digest, ComputeDigest(state.global_params));
  EXPECT_EQ(net.chain().back().endorsements.size(), 2u);
}

TEST(RunFederatedTest, LedgerCompletenessAndDigestTrail) {
  auto c = TinyConfig();
  c.rounds = 3;
  const auto result = RunFederated(c);
  ASSERT_EQ(result.runs.size(), c.folds * c.runs);
  EXPECT_EQ(result.failed_rounds, 0u);
  for (const auto& run : result.runs) {
    EXPECT_TRUE(run.ledger_valid);
    ASSERT_EQ(run.chain.size(), c.rounds + 1);
    ASSERT_EQ(run.round_digests.size(), c.rounds + 1);
    for (std::size_t i = 0; i < run.chain.size(); ++i) {
      EXPECT_EQ(run.chain[i].params_digest, run.round_digests[i]);
      EXPECT_EQ(run.chain[i].round, i);
    }
    for (const auto& rr : run.rounds) {
      EXPECT_TRUE(rr.committed);
      EXPECT_EQ(rr.client_losses.size(), c.num_clients);
    }
  }
}

TEST(RunFederatedTest, MeansAreMeansOfConstituents) {
  auto c = TinyConfig();
  const auto result = RunFederated(c);
  double f1 = 0.0;
  for (std::size_t f = 0; f < c.folds; ++f) {
    double fold_f1 = 0.0;
    for (const auto& run : result.runs) {
      if (run.fold == f) fold_f1 += run.metrics.macro_f1 / c.runs;
    }
    EXPECT_NEAR(result.fold_means[f].f1, fold_f1, 1e-12);
    f1 += fold_f1 / c.folds;
  }
  EXPECT_NEAR(result.mean.f1, f1, 1e-12);
}

TEST(RunFederatedTest, DeterministicResultJsonAndFiles) {
  auto c = TinyConfig();
  const std::string a = TempDir("det_a");
  const std::string b = TempDir("det_b");
  RunOptions oa, ob;
  oa.output_dir = a;
  ob.output_dir = b;
  const auto ra = RunFederated(c, oa);
  const auto rb = RunFederated(c, ob);
  EXPECT_EQ(ResultToJson(ra).dump(), ResultToJson(rb).dump());
  const std::string name = ResultFileName(ra);
  EXPECT_EQ(name, "result_federated_FedAvg_h4_s11.json");
  EXPECT_EQ(Slurp(a + "/" + name), Slurp(b + "/" + name));
  for (const auto& run : ra.runs) {
    EXPECT_EQ(Slurp(a + "/" + run.ledger_file), Slurp(b + "/" + run.ledger_file));
    EXPECT_TRUE(ledger::VerifyChainFile(a + "/" + run.ledger_file).valid);
  }
  EXPECT_TRUE(std::filesystem::exists(a + "/timings_federated_FedAvg_h4_s11.json"));

  auto other = c;
  other.experiment_seed = 12;
  EXPECT_NE(ResultToJson(RunFederated(other)).at("runs").dump(),
            ResultToJson(ra).at("runs").dump());
}

TEST(RunFederatedTest, ZeroRoundsEvaluateInitialization) {
  auto c = TinyConfig();
  c.rounds = 0;
  const auto fed = RunFederated(c);
  const auto central = RunCentralized(c);
  ASSERT_EQ(fed.runs.size(), central.runs.size());
  for (std::size_t i = 0; i < fed.runs.size(); ++i) {
    EXPECT_EQ(fed.runs[i].round_digests, central.runs[i].round_digests);
    EXPECT_EQ(fed.runs[i].metrics.confusion, central.runs[i].metrics.confusion);
    EXPECT_EQ(fed.runs[i].chain.size(), 1u);
  }
}

TEST(ReductionTest, CentralizedEqualsSingleClientFedAvg) {
  auto c = TinyConfig();
  c.num_clients = 1;
  c.rounds = 3;
  const auto fed = RunFederated(c);
  const auto central = RunCentralized(c);
  ASSERT_EQ(fed.runs.size(), central.runs.size());
  for (std::size_t i = 0; i < fed.runs.size(); ++i) {
    EXPECT_EQ(fed.runs[i].round_digests, central.runs[i].round_digests);
    EXPECT_EQ(fed.runs[i].metrics.confusion, central.runs[i].metrics.confusion);
  }
}

TEST(ReductionTest, FedProxWithoutMuAndPlainFedAvgM) {
  auto c = TinyConfig();
  const auto avg = RunFederated(c);
  auto prox = c;
  prox.strategy.kind = StrategyKind::kFedProx;
  prox.strategy.prox_mu = 0.0;
  auto momentum = c;
  momentum.strategy.kind = StrategyKind::kFedAvgM;
  momentum.strategy.server_momentum = 0.0;
  momentum.strategy.server_lr = 1.0;
  const auto rp = RunFederated(prox);
  const auto rm = RunFederated(momentum);
  for (std::size_t i = 0; i < avg.runs.size(); ++i) {
    EXPECT_EQ(rp.runs[i].round_digests, avg.runs[i].round_digests);
    EXPECT_EQ(rm.runs[i].round_digests, avg.runs[i].round_digests);
  }
  prox.strategy.prox_mu = 0.5;
  EXPECT_NE(RunFederated(prox).runs[0].round_digests, avg.runs[0].round_digests);
}

TEST(IsolationTest, ClientsOnlySeeTheirOwnShard) {
  auto c = TinyConfig();
  c.rounds = 3;
  // (fold, run, client) -> every index set that client was handed.
  std::map<std::tuple<std::size_t, std::size_t, std::uint64_t>,
           std::set<std::vector<std::size_t>>>
      seen;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> counts;
  RunOptions options;
  options.hooks.on_local_train = [&](std::size_t f, std::size_t r, std::uint64_t,
                                     const ClientShard& shard) {
    seen[{f, r, shard.client_id}].insert(shard.indices);
    EXPECT_EQ(shard.data.size(), shard.indices.size());
  };
  RunFederated(c, options);
  ASSERT_EQ(seen.size(), c.folds * c.runs * c.num_clients);
  std::map<std::pair<std::size_t, std::size_t>, std::set<std::size_t>> owned;
  for (const auto& [key, sets] : seen) {
    ASSERT_EQ(sets.size(), 1u) << "client received different shards";
    const auto& indices = *sets.begin();
    auto& pool = owned[{std::get<0>(key), std::get<1>(key)}];
    for (auto i : indices) EXPECT_TRUE(pool.insert(i).second) << "index shared";
  }
}

TEST(FaultInjectionTest, TamperedAggregateIsNeverCommitted) {
  auto c = TinyConfig();
  c.runs = 1;
  c.fold_limit = 1;
  c.rounds = 3;
  RunOptions options;
  std::size_t calls = 0;
  options.hooks.tamper_aggregate = [&](std::uint64_t, ParameterSet& p) {
    ++calls;
    p.mutable_entry(0).values[0] += 1e-9;
  };
  const auto result = RunFederated(c, options);
  EXPECT_EQ(calls, 2 * c.rounds);
  EXPECT_EQ(result.failed_rounds, c.rounds);
  const auto& run = result.runs[0];
  EXPECT_EQ(run.chain.size(), 1u);
  for (const auto& rr : run.rounds) {
    EXPECT_FALSE(rr.committed);
    EXPECT_EQ(rr.attempts, 2u);
    EXPECT_NE(rr.reason.find("refused"), std::string::npos);
  }
  for (const auto& d : run.round_digests) EXPECT_EQ(d, run.round_digests[0]);
  EXPECT_TRUE(run.ledger_valid);
}

TEST(LocalOnlyTest, OneRecordPerClient) {
  auto c = TinyConfig();
  c.partition = data::PartitionMode::kLabelSkew;
  const auto local = RunLocalOnly(c);
  ASSERT_EQ(local.runs.size(), c.folds * c.runs * c.num_clients);
  EXPECT_EQ(local.mode, "local");
  for (std::size_t i = 0; i < local.runs.size(); ++i) {
    EXPECT_EQ(local.runs[i].client, i % c.num_clients);
  }
}

TEST(SweepTest, TableArithmeticMatchesCells) {
  auto c = TinyConfig();
  c.runs = 1;
  c.rounds = 1;
  c.sweep_hidden_units = {3, 5};
  c.sweep_strategies = {StrategyKind::kFedAvg, StrategyKind::kKrum};
  const std::string dir = TempDir("sweep");
  RunOptions options;
  options.output_dir = dir;
  const auto sweep = RunSweep(c, options);
  ASSERT_EQ(sweep.cells.size(), 4u);
  ASSERT_EQ(sweep.centralized.size(), 2u);
  std::map<std::string, std::vector<double>> f1_deltas;
  for (const auto& cell : sweep.cells) {
    ASSERT_TRUE(cell.result.has_value()) << cell.error;
    const auto& central = sweep.centralized.at(cell.hidden_units);
    const double delta = (cell.result->mean.f1 - central.mean.f1) * 100.0;
    EXPECT_NEAR(cell.improvement.f1, delta, 1e-12);
    f1_deltas[aggregation::ToString(cell.strategy)].push_back(delta);
    for (const auto& run : cell.result->runs) {
      EXPECT_TRUE(std::filesystem::exists(dir + "/" + run.ledger_file));
    }
  }
  for (const auto& [name, deltas] : f1_deltas) {
    EXPECT_NEAR(sweep.mean_improvement.at(name).f1, (deltas[0] + deltas[1]) / 2.0, 1e-12);
  }
  EXPECT_TRUE(std::filesystem::exists(dir + "/sweep_s11.json"));
  EXPECT_TRUE(std::filesystem::exists(dir + "/result_centralized_h3_s11.json"));
  EXPECT_TRUE(std::filesystem::exists(dir + "/result_federated_Krum_h5_s11.json"));
  const std::string table = Slurp(dir + "/table_s11.txt");
  EXPECT_NE(table.find("Hidden units: 5"), std::string::npos);
  EXPECT_NE(table.find(metrics::FormatDelta(sweep.mean_improvement.at("Krum").precision)),
            std::string::npos);
}

TEST(SweepTest, SingleCellReducesToRunAndBaseline) {
  auto c = TinyConfig();
  c.runs = 1;
  c.sweep_hidden_units = {4};
  c.sweep_strategies = {StrategyKind::kFedAvg};
  const auto sweep = RunSweep(c);
  const auto fed = RunFederated(c);
  const auto central = RunCentralized(c);
  ASSERT_EQ(sweep.cells.size(), 1u);
  EXPECT_EQ(ResultToJson(*sweep.cells[0].result).dump(), ResultToJson(fed).dump());
  EXPECT_EQ(ResultToJson(sweep.centralized.at(4)).dump(), ResultToJson(central).dump());
  const auto expected = metrics::ComputeImprovement(central.mean, fed.mean);
  EXPECT_EQ(sweep.mean_improvement.at("FedAvg").f1, expected.f1);
}

TEST(SweepTest, FailedCellsAreRecorded) {
  auto c = TinyConfig();
  c.runs = 1;
  c.rounds = 1;
  c.sweep_hidden_units = {4};
  c.sweep_strategies = {StrategyKind::kFedAvg, StrategyKind::kKrum};
  c.strategy.krum_f = 1;  // invalid with 3 clients, only Krum trips on it
  c.strategy.kind = StrategyKind::kFedAvg;
  const auto sweep = RunSweep(c);
  ASSERT_EQ(sweep.cells.size(), 2u);
  EXPECT_TRUE(sweep.cells[0].result.has_value());
  EXPECT_FALSE(sweep.cells[1].result.has_value());
  EXPECT_FALSE(sweep.cells[1].error.empty());
  EXPECT_EQ(sweep.mean_improvement.count("Krum"), 0u);
}

TEST(RenderTableTest, FederatedColumnMatchesJson) {
  auto c = TinyConfig();
  const Json doc = ResultToJson(RunFederated(c));
  const std::string table = RenderTable(doc);
  EXPECT_NE(table.find("FedAvg"), std::string::npos);
  for (const char* key : {"precision", "recall", "f1"}) {
    const std::string cell = metrics::FormatPercent(doc["mean"][key].get<double>());
    EXPECT_NE(table.find(cell), std::string::npos) << cell;
  }
  EXPECT_THROW(RenderTable(Json{{"mode", "federated"}}), Error);
}

}  // namespace
}  // namespace fedledger
