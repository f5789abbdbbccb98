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

#include "fedledger/fedledger.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <memory>
#include <new>
#include <optional>
#include <string>

#include "fedledger/error.h"
#include "fedledger/orchestrator.h"
#include "fedledger/params.h"

struct fl_params {
  fedledger::ParameterSet set;
};

struct fl_config {
  fedledger::Json document;  // file contents plus overrides, validated on use
};

struct fl_result {
  fedledger::Json document;
  std::optional<fedledger::metrics::Summary> mean;
  std::string file;
};

namespace {

thread_local std::string last_error;

fl_log_fn log_fn = nullptr;
void* log_user = nullptr;

fl_status ToStatus(fedledger::ErrorCode code) {
  using fedledger::ErrorCode;
  switch (code) {
    case ErrorCode::kConfig:
      return FL_ERR_CONFIG;
    case ErrorCode::kLedgerRejected:
      return FL_ERR_LEDGER;
    case ErrorCode::kInvalidArgument:
      return FL_ERR_INVALID_ARGUMENT;
    default:
      return FL_ERR_RUNTIME;
  }
}

fl_status SetError(fl_status status, const std::string& message) {
  last_error = message;
  return status;
}

template <typename Fn>
fl_status Guard(Fn&& fn) {
  try {
    fn();
    return FL_OK;
  } catch (const fedledger::Error& e) {
    return SetError(ToStatus(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return SetError(FL_ERR_RUNTIME, "out of memory");
  } catch (const std::exception& e) {
    return SetError(FL_ERR_RUNTIME, e.what());
  }
}

char* CopyString(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

#define FL_REQUIRE_ARG(cond)                                              \
  do {                                                                    \
    if (!(cond)) return SetError(FL_ERR_INVALID_ARGUMENT, "null argument: " #cond); \
  } while (0)

std::string OptionalString(const char* s) { return s == nullptr ? "" : s; }

fedledger::RunOptions Options(const char* out_dir) {
  fedledger::RunOptions options;
  options.output_dir = OptionalString(out_dir);
  if (log_fn != nullptr) {
    options.progress = [fn = log_fn, user = log_user](const std::string& m) {
      fn(m.c_str(), user);
    };
  }
  return options;
}

template <typename Runner>
fl_status RunExperiment(const fl_config* config, const char* out_dir,
                        fl_result** out, Runner runner) {
  FL_REQUIRE_ARG(config != nullptr);
  FL_REQUIRE_ARG(out != nullptr);
  *out = nullptr;
  return Guard([&] {
    const auto cfg = fedledger::ConfigFromJson(config->document);
    const auto result = runner(cfg, Options(out_dir));
    auto handle = std::make_unique<fl_result>();
    handle->document = fedledger::ResultToJson(result);
    handle->mean = result.mean;
    if (out_dir != nullptr && *out_dir != '\0') {
      handle->file = fedledger::ResultFileName(result);
    }
    *out = handle.release();
  });
}

}  // namespace

extern "C" {

const char* fl_version(void) { return FEDLEDGER_VERSION; }

const char* fl_last_error(void) { return last_error.c_str(); }

void fl_string_free(char* s) { std::free(s); }

void fl_bytes_free(uint8_t* bytes) { std::free(bytes); }

void fl_set_log_callback(fl_log_fn fn, void* user_data) {
  log_fn = fn;
  log_user = user_data;
}

fl_status fl_params_create(fl_params** out) {
  FL_REQUIRE_ARG(out != nullptr);
  return Guard([&] { *out = new fl_params(); });
}

void fl_params_free(fl_params* params) { delete params; }

fl_status fl_params_add(fl_params* params, const char* name, const size_t* shape,
                        size_t rank, const double* values, size_t count) {
  FL_REQUIRE_ARG(params != nullptr);
  FL_REQUIRE_ARG(name != nullptr);
  FL_REQUIRE_ARG(shape != nullptr || rank == 0);
  FL_REQUIRE_ARG(values != nullptr || count == 0);
  return Guard([&] {
    params->set.Add(name, std::vector<std::size_t>(shape, shape + rank),
                    std::vector<double>(values, values + count));
  });
}

fl_status fl_params_digest(const fl_params* params, char out_hex[65]) {
  FL_REQUIRE_ARG(params != nullptr);
  FL_REQUIRE_ARG(out_hex != nullptr);
  return Guard([&] {
    const std::string hex = fedledger::ComputeDigest(params->set).ToHex();
    std::memcpy(out_hex, hex.c_str(), hex.size() + 1);
  });
}

fl_status fl_params_canonical_bytes(const fl_params* params, uint8_t** out,
                                    size_t* out_len) {
  FL_REQUIRE_ARG(params != nullptr);
  FL_REQUIRE_ARG(out != nullptr && out_len != nullptr);
  return Guard([&] {
    const auto bytes = fedledger::CanonicalBytes(params->set);
    auto* buffer = static_cast<uint8_t*>(std::malloc(bytes.empty() ? 1 : bytes.size()));
    if (buffer == nullptr) throw std::bad_alloc();
    std::memcpy(buffer, bytes.data(), bytes.size());
    *out = buffer;
    *out_len = bytes.size();
  });
}

fl_status fl_config_load(const char* path, fl_config** out) {
  FL_REQUIRE_ARG(out != nullptr);
  *out = nullptr;
  return Guard([&] {
    const std::string p = OptionalString(path);
    auto handle = std::make_unique<fl_config>();
    handle->document = fedledger::Json::object();
    if (!p.empty()) {
      fedledger::LoadConfig(p);  // surfaces read, syntax and key errors now
      handle->document = fedledger::ReadJsonFile(p);
    }
    *out = handle.release();
  });
}

void fl_config_free(fl_config* config) { delete config; }

fl_status fl_config_set(fl_config* config, const char* assignment) {
  FL_REQUIRE_ARG(config != nullptr);
  FL_REQUIRE_ARG(assignment != nullptr);
  return Guard([&] {
    fedledger::Json updated = config->document;
    fedledger::ApplyOverride(updated, assignment);
    // Unknown keys fail here; value ranges are checked when the config is used.
    fedledger::CheckConfigKeys(updated);
    config->document = std::move(updated);
  });
}

fl_status fl_config_to_json(const fl_config* config, char** out_json) {
  FL_REQUIRE_ARG(config != nullptr);
  FL_REQUIRE_ARG(out_json != nullptr);
  return Guard([&] {
    const auto full = fedledger::ConfigToJson(fedledger::ConfigFromJson(config->document));
    *out_json = CopyString(full.dump(2));
  });
}

fl_status fl_run_federated(const fl_config* config, const char* out_dir,
                           fl_result** out) {
  return RunExperiment(config, out_dir, out, [](const auto& c, const auto& o) {
    return fedledger::RunFederated(c, o);
  });
}

fl_status fl_run_centralized(const fl_config* config, const char* out_dir,
                             fl_result** out) {
  return RunExperiment(config, out_dir, out, [](const auto& c, const auto& o) {
    return fedledger::RunCentralized(c, o);
  });
}

fl_status fl_run_local_only(const fl_config* config, const char* out_dir,
                            fl_result** out) {
  return RunExperiment(config, out_dir, out, [](const auto& c, const auto& o) {
    return fedledger::RunLocalOnly(c, o);
  });
}

fl_status fl_run_sweep(const fl_config* config, const char* out_dir,
                       fl_result** out) {
  FL_REQUIRE_ARG(config != nullptr);
  FL_REQUIRE_ARG(out != nullptr);
  *out = nullptr;
  return Guard([&] {
    const auto cfg = fedledger::ConfigFromJson(config->document);
    const auto sweep = fedledger::RunSweep(cfg, Options(out_dir));
    auto handle = std::make_unique<fl_result>();
    handle->document = fedledger::SweepToJson(sweep);
    if (out_dir != nullptr && *out_dir != '\0') {
      handle->file = fedledger::SweepFileName(cfg);
    }
    *out = handle.release();
  });
}

void fl_result_free(fl_result* result) { delete result; }

fl_status fl_result_to_json(const fl_result* result, char** out_json) {
  FL_REQUIRE_ARG(result != nullptr);
  FL_REQUIRE_ARG(out_json != nullptr);
  return Guard([&] { *out_json = CopyString(result->document.dump(2)); });
}

fl_status fl_result_macro(const fl_result* result, double* precision,
                          double* recall, double* f1) {
  FL_REQUIRE_ARG(result != nullptr);
  FL_REQUIRE_ARG(precision != nullptr && recall != nullptr && f1 != nullptr);
  if (!result->mean) {
    return SetError(FL_ERR_INVALID_ARGUMENT, "sweep results have no single mean");
  }
  *precision = result->mean->precision;
  *recall = result->mean->recall;
  *f1 = result->mean->f1;
  return FL_OK;
}

const char* fl_result_file(const fl_result* result) {
  return result == nullptr ? "" : result->file.c_str();
}

fl_status fl_generate_data(const fl_config* config, const char* out_dir,
                           char** out_path) {
  FL_REQUIRE_ARG(config != nullptr);
  FL_REQUIRE_ARG(out_dir != nullptr);
  FL_REQUIRE_ARG(out_path != nullptr);
  return Guard([&] {
    const auto cfg = fedledger::ConfigFromJson(config->document);
    std::filesystem::create_directories(out_dir);
    const std::string path =
        (std::filesystem::path(out_dir) / fedledger::SyntheticFileName(cfg)).string();
    fedledger::GenerateDataCsv(cfg, path);
    *out_path = CopyString(path);
  });
}

fl_status fl_verify_ledger(const char* path, fl_verify_report* report) {
  FL_REQUIRE_ARG(path != nullptr);
  FL_REQUIRE_ARG(report != nullptr);
  return Guard([&] {
    const auto r = fedledger::ledger::VerifyChainFile(path);
    report->valid = r.valid ? 1 : 0;
    report->blocks = r.blocks;
    report->first_bad_index =
        r.first_bad_index ? static_cast<int64_t>(*r.first_bad_index) : -1;
    std::strncpy(report->reason, r.reason.c_str(), sizeof(report->reason) - 1);
    report->reason[sizeof(report->reason) - 1] = '\0';
  });
}

fl_status fl_render_table(const char* result_json_path, char** out_text) {
  FL_REQUIRE_ARG(result_json_path != nullptr);
  FL_REQUIRE_ARG(out_text != nullptr);
  return Guard([&] {
    *out_text = CopyString(
        fedledger::RenderTable(fedledger::ReadJsonFile(result_json_path)));
  });
}

}  // extern "C"
