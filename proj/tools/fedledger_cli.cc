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

// Batch command-line front end. Everything goes through the C API.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedledger/fedledger.h"

namespace {

int ExitCode(fl_status status) {
  switch (status) {
    case FL_OK:
      return 0;
    case FL_ERR_CONFIG:
    case FL_ERR_INVALID_ARGUMENT:
      return 1;
    case FL_ERR_LEDGER:
      return 3;
    default:
      return 2;
  }
}

int ReportFailure(fl_status status, const std::string& context) {
  std::cerr << "error: " << context << ": " << fl_last_error() << "\n";
  return ExitCode(status);
}

struct CommonOptions {
  std::string config_path;
  std::string out_dir = "out";
  std::vector<std::string> overrides;
  std::string seed;
  bool verbose = false;
};

void AddCommon(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "JSON experiment config");
  cmd->add_option("--out", o.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("--set", o.overrides, "Override KEY=VALUE (dotted path), repeatable");
  cmd->add_option("--seed", o.seed, "Experiment seed");
  cmd->add_flag("-v,--verbose", o.verbose, "Progress on stderr");
}

// Owns a C handle for the duration of one command.
template <typename T, void (*Free)(T*)>
struct Handle {
  T* ptr = nullptr;
  ~Handle() { Free(ptr); }
};

struct Text {
  char* ptr = nullptr;
  ~Text() { fl_string_free(ptr); }
};

fl_status LoadConfig(const CommonOptions& o, fl_config** out) {
  fl_status s = fl_config_load(o.config_path.empty() ? nullptr : o.config_path.c_str(), out);
  if (s != FL_OK) return s;
  for (const auto& assignment : o.overrides) {
    if ((s = fl_config_set(*out, assignment.c_str())) != FL_OK) return s;
  }
  if (!o.seed.empty()) {
    const std::string assignment = "experiment_seed=" + o.seed;
    if ((s = fl_config_set(*out, assignment.c_str())) != FL_OK) return s;
  }
  return FL_OK;
}

void LogToStderr(const char* message, void*) { std::cerr << message << "\n"; }

using Runner = fl_status (*)(const fl_config*, const char*, fl_result**);

int RunExperiment(const CommonOptions& o, Runner runner, const char* name) {
  Handle<fl_config, fl_config_free> config;
  if (fl_status s = LoadConfig(o, &config.ptr); s != FL_OK) {
    return ReportFailure(s, "config");
  }
  if (o.verbose) fl_set_log_callback(LogToStderr, nullptr);
  Handle<fl_result, fl_result_free> result;
  if (fl_status s = runner(config.ptr, o.out_dir.c_str(), &result.ptr); s != FL_OK) {
    return ReportFailure(s, name);
  }
  std::cout << "wrote " << o.out_dir << "/" << fl_result_file(result.ptr) << "\n";
  double p = 0, r = 0, f1 = 0;
  if (fl_result_macro(result.ptr, &p, &r, &f1) == FL_OK) {
    std::printf("macro precision %.4f, recall %.4f, f1 %.4f\n", p, r, f1);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning simulator with a hash-chained model ledger"};
  app.require_subcommand(1);
  app.set_version_flag("--version", fl_version());

  CommonOptions run_opts, baseline_opts, sweep_opts, gen_opts;
  auto* run = app.add_subcommand("run", "Federated training over all folds and runs");
  AddCommon(run, run_opts);
  auto* baseline = app.add_subcommand("baseline", "Centralized or local-only baseline");
  AddCommon(baseline, baseline_opts);
  bool local_only = false;
  baseline->add_flag("--local", local_only,
                     "Train each client on its own shard, without aggregation");
  auto* sweep = app.add_subcommand("sweep", "Hidden units x strategies sweep");
  AddCommon(sweep, sweep_opts);
  auto* gen = app.add_subcommand("gen-data", "Write the synthetic recording as CSV");
  AddCommon(gen, gen_opts);

  std::string ledger_path;
  auto* verify = app.add_subcommand("verify-ledger", "Check a ledger JSON Lines file");
  verify->add_option("path", ledger_path, "Ledger file")->required();

  std::string table_input, table_output;
  auto* render = app.add_subcommand("render-table", "Render a result or sweep JSON");
  render->add_option("path", table_input, "Result JSON")->required();
  render->add_option("--out", table_output, "Also write the table to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  if (run->parsed()) return RunExperiment(run_opts, fl_run_federated, "run");
  if (baseline->parsed()) {
    return RunExperiment(baseline_opts, local_only ? fl_run_local_only : fl_run_centralized,
                         "baseline");
  }
  if (sweep->parsed()) return RunExperiment(sweep_opts, fl_run_sweep, "sweep");

  if (gen->parsed()) {
    Handle<fl_config, fl_config_free> config;
    if (fl_status s = LoadConfig(gen_opts, &config.ptr); s != FL_OK) {
      return ReportFailure(s, "config");
    }
    Text path;
    if (fl_status s = fl_generate_data(config.ptr, gen_opts.out_dir.c_str(), &path.ptr);
        s != FL_OK) {
      return ReportFailure(s, "gen-data");
    }
    std::cout << "wrote " << path.ptr << "\n";
    return 0;
  }

  if (verify->parsed()) {
    fl_verify_report report;
    if (fl_status s = fl_verify_ledger(ledger_path.c_str(), &report); s != FL_OK) {
      return ReportFailure(s, "verify-ledger");
    }
    if (report.valid) {
      std::cout << "valid, " << report.blocks << " blocks\n";
      return 0;
    }
    std::cout << "invalid, first bad block " << report.first_bad_index << ": "
              << report.reason << "\n";
    std::cerr << "error: verify-ledger: " << ledger_path << ": block "
              << report.first_bad_index << ": " << report.reason << "\n";
    return 3;
  }

  if (render->parsed()) {
    Text table;
    if (fl_status s = fl_render_table(table_input.c_str(), &table.ptr); s != FL_OK) {
      return ReportFailure(s, "render-table");
    }
    std::cout << table.ptr;
    if (!table_output.empty()) {
      std::ofstream out(table_output);
      out << table.ptr;
      if (!out.good()) {
        std::cerr << "error: render-table: cannot write '" << table_output << "'\n";
        return 2;
      }
    }
    return 0;
  }
  return 1;
}
