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

#include "fedledger/ledger.h"

#include <chrono>
#include <fstream>
#include <set>

#include "fedledger/error.h"
#include "json.hpp"

namespace fedledger::ledger {

namespace {

using Json = nlohmann::ordered_json;

Digest ParseDigestField(const Json& j, const char* key) {
  return Digest::FromHex(j.at(key).get<std::string>());
}

VerificationReport Invalid(std::size_t blocks, std::size_t index,
                           std::string reason) {
  return {false, blocks, index, std::move(reason)};
}

}  // namespace

std::vector<std::uint8_t> BlockCanonicalBytes(const Block& block) {
  ByteWriter w;
  w.U64(block.index);
  w.Put(block.prev_hash);
  w.U64(block.round);
  w.Text(block.strategy_kind);
  w.Put(block.params_digest);
  w.U64(block.update_digests.size());
  for (const auto& u : block.update_digests) {
    w.U64(u.client_id);
    w.Put(u.digest);
  }
  w.U64(block.endorsements.size());
  for (const auto& e : block.endorsements) {
    w.U64(e.peer_id);
    w.Put(e.digest);
  }
  w.I64(block.timestamp_ms);
  return w.Take();
}

Digest ComputeBlockHash(const Block& block) {
  return Sha256(BlockCanonicalBytes(block));
}

void LedgerConfig::Validate() const {
  Require(peer_count >= 1, ErrorCode::kConfig, "ledger needs at least one peer");
  Require(required_endorsements >= 1 && required_endorsements <= peer_count,
          ErrorCode::kConfig,
          "required endorsements must be in [1, peer_count]");
}

std::int64_t LogicalClock::NowMs() {
  std::int64_t now = next_;
  next_ += step_;
  return now;
}

std::int64_t SystemClock::NowMs() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch())
      .count();
}

Block Genesis(const ParameterSet& initial_params, std::int64_t timestamp_ms,
              std::size_t peer_count) {
  Block b;
  b.index = 0;
  b.prev_hash = Digest::Zero();
  b.round = 0;
  b.strategy_kind = kGenesisKind;
  b.params_digest = ComputeDigest(initial_params);
  for (std::size_t p = 0; p < peer_count; ++p) {
    b.endorsements.push_back({p, ComputeDigest(initial_params)});
  }
  b.timestamp_ms = timestamp_ms;
  b.block_hash = ComputeBlockHash(b);
  return b;
}

Proposal Propose(std::uint64_t round, aggregation::StrategyKind kind,
                 std::span<const ClientUpdate> updates,
                 const ParameterSet& claimed_global,
                 const aggregation::StrategyConfig& strategy_config,
                 const aggregation::ServerState& state_before) {
  Require(!updates.empty(), ErrorCode::kInvalidArgument,
          "proposal needs at least one client update");
  Proposal p;
  p.round = round;
  p.strategy_kind = aggregation::ToString(kind);
  for (const auto& u : updates) {
    p.update_digests.push_back({u.client_id, ComputeDigest(u.params)});
  }
  p.claimed_digest = ComputeDigest(claimed_global);
  p.prior_global_digest = ComputeDigest(state_before.global_params);
  if (state_before.momentum_buffer) {
    p.prior_momentum_digest = ComputeDigest(*state_before.momentum_buffer);
  }
  p.strategy_config = strategy_config;
  return p;
}

EndorsementOutcome Endorse(std::uint64_t peer_id, const Proposal& proposal,
                           std::span<const ClientUpdate> updates,
                           const aggregation::ServerState& state_before,
                           const aggregation::StrategyConfig& strategy_config) {
  if (proposal.strategy_kind != aggregation::ToString(strategy_config.kind)) {
    return Refusal{peer_id, "strategy mismatch: proposal says " +
                                proposal.strategy_kind};
  }
  if (ComputeDigest(state_before.global_params) != proposal.prior_global_digest) {
    return Refusal{peer_id, "prior global model digest mismatch"};
  }
  if (state_before.momentum_buffer.has_value() !=
          proposal.prior_momentum_digest.has_value() ||
      (state_before.momentum_buffer &&
       ComputeDigest(*state_before.momentum_buffer) !=
           *proposal.prior_momentum_digest)) {
    return Refusal{peer_id, "prior momentum buffer digest mismatch"};
  }
  Digest recomputed;
  try {
    auto next = aggregation::Aggregate(state_before, updates, strategy_config);
    recomputed = ComputeDigest(next.global_params);
  } catch (const Error& e) {
    return Refusal{peer_id, std::string("re-execution failed: ") + e.what()};
  }
  if (recomputed != proposal.claimed_digest) {
    return Refusal{peer_id, "aggregate digest mismatch: recomputed " +
                                recomputed.ToHex() + ", claimed " +
                                proposal.claimed_digest.ToHex()};
  }
  if (updates.size() != proposal.update_digests.size()) {
    return Refusal{peer_id, "update count mismatch"};
  }
  for (std::size_t i = 0; i < updates.size(); ++i) {
    const auto& expected = proposal.update_digests[i];
    if (updates[i].client_id != expected.client_id ||
        ComputeDigest(updates[i].params) != expected.digest) {
      return Refusal{peer_id, "update digest mismatch for client " +
                                  std::to_string(expected.client_id)};
    }
  }
  return Endorsement{peer_id, recomputed};
}

const Block& OrderAndAppend(Chain& chain, const Proposal& proposal,
                            std::span<const Endorsement> endorsements,
                            const LedgerConfig& policy,
                            std::int64_t timestamp_ms) {
  policy.Validate();
  Require(!chain.empty(), ErrorCode::kLedgerRejected,
          "chain has no genesis block");
  std::set<std::uint64_t> peers;
  for (const auto& e : endorsements) {
    Require(e.digest == proposal.claimed_digest, ErrorCode::kLedgerRejected,
            "endorsement from peer " + std::to_string(e.peer_id) +
                " disagrees with the claimed digest");
    Require(e.peer_id < policy.peer_count, ErrorCode::kLedgerRejected,
            "endorsement from unknown peer " + std::to_string(e.peer_id));
    peers.insert(e.peer_id);
  }
  Require(peers.size() >= policy.required_endorsements,
          ErrorCode::kLedgerRejected,
          "proposal has " + std::to_string(peers.size()) + " of " +
              std::to_string(policy.required_endorsements) +
              " required endorsements");
  Require(proposal.round > chain.back().round, ErrorCode::kLedgerRejected,
          "proposal round " + std::to_string(proposal.round) +
              " does not advance the chain");
  Block b;
  b.index = chain.size();
  b.prev_hash = chain.back().block_hash;
  b.round = proposal.round;
  b.strategy_kind = proposal.strategy_kind;
  b.params_digest = proposal.claimed_digest;
  b.update_digests = proposal.update_digests;
  b.endorsements.assign(endorsements.begin(), endorsements.end());
  b.timestamp_ms = timestamp_ms;
  b.block_hash = ComputeBlockHash(b);
  chain.push_back(std::move(b));
  return chain.back();
}

VerificationReport VerifyChain(std::span<const Block> chain) {
  const std::size_t n = chain.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Block& b = chain[i];
    if (b.index != i) return Invalid(n, i, "index mismatch");
    const Digest expected_prev = i == 0 ? Digest::Zero() : chain[i - 1].block_hash;
    if (b.prev_hash != expected_prev) return Invalid(n, i, "prev_hash mismatch");
    if (ComputeBlockHash(b) != b.block_hash) return Invalid(n, i, "hash mismatch");
    if (i == 0 ? b.round != 0 : b.round <= chain[i - 1].round) {
      return Invalid(n, i, "round not strictly increasing");
    }
    if (b.endorsements.empty()) return Invalid(n, i, "no endorsements");
    for (const auto& e : b.endorsements) {
      if (e.digest != b.params_digest) {
        return Invalid(n, i, "endorsement digest mismatch");
      }
    }
  }
  return {true, n, std::nullopt, ""};
}

std::string BlockToJsonLine(const Block& block) {
  Json j;
  j["index"] = block.index;
  j["prev_hash"] = block.prev_hash.ToHex();
  j["round"] = block.round;
  j["strategy_kind"] = block.strategy_kind;
  j["params_digest"] = block.params_digest.ToHex();
  Json updates = Json::array();
  for (const auto& u : block.update_digests) {
    updates.push_back({{"client_id", u.client_id}, {"digest", u.digest.ToHex()}});
  }
  j["update_digests"] = std::move(updates);
  Json endorsements = Json::array();
  for (const auto& e : block.endorsements) {
    endorsements.push_back({{"peer_id", e.peer_id}, {"digest", e.digest.ToHex()}});
  }
  j["endorsements"] = std::move(endorsements);
  j["timestamp"] = block.timestamp_ms;
  j["block_hash"] = block.block_hash.ToHex();
  return j.dump();
}

Block BlockFromJsonLine(const std::string& line) {
  try {
    const Json j = Json::parse(line);
    Block b;
    b.index = j.at("index").get<std::uint64_t>();
    b.prev_hash = ParseDigestField(j, "prev_hash");
    b.round = j.at("round").get<std::uint64_t>();
    b.strategy_kind = j.at("strategy_kind").get<std::string>();
    b.params_digest = ParseDigestField(j, "params_digest");
    for (const auto& u : j.at("update_digests")) {
      b.update_digests.push_back(
          {u.at("client_id").get<std::uint64_t>(), ParseDigestField(u, "digest")});
    }
    for (const auto& e : j.at("endorsements")) {
      b.endorsements.push_back(
          {e.at("peer_id").get<std::uint64_t>(), ParseDigestField(e, "digest")});
    }
    b.timestamp_ms = j.at("timestamp").get<std::int64_t>();
    b.block_hash = ParseDigestField(j, "block_hash");
    return b;
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kData, std::string("malformed block: ") + e.what());
  } catch (const Error& e) {
    Fail(ErrorCode::kData, std::string("malformed block: ") + e.what());
  }
}

void WriteChain(const Chain& chain, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  Require(out.good(), ErrorCode::kIo, "cannot write ledger '" + path + "'");
  for (const auto& b : chain) out << BlockToJsonLine(b) << '\n';
  Require(out.good(), ErrorCode::kIo, "failed writing ledger '" + path + "'");
}

namespace {

std::vector<std::string> ReadLines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  Require(in.good(), ErrorCode::kIo, "cannot open ledger '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace

Chain ReadChain(const std::string& path) {
  Chain chain;
  for (const auto& line : ReadLines(path)) chain.push_back(BlockFromJsonLine(line));
  return chain;
}

VerificationReport VerifyChainFile(const std::string& path) {
  const auto lines = ReadLines(path);
  Chain chain;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      chain.push_back(BlockFromJsonLine(lines[i]));
    } catch (const Error& e) {
      // Earlier blocks may already be broken; report the first failure.
      auto prefix = VerifyChain(chain);
      if (!prefix.valid) {
        prefix.blocks = lines.size();
        return prefix;
      }
      return Invalid(lines.size(), i, e.what());
    }
  }
  return VerifyChain(chain);
}

LedgerNetwork::LedgerNetwork(LedgerConfig config, Clock& clock)
    : config_(config), clock_(clock) {
  config_.Validate();
}

const Block& LedgerNetwork::Initialize(const ParameterSet& initial_params) {
  chain_.clear();
  chain_.push_back(Genesis(initial_params, clock_.NowMs(), config_.peer_count));
  return chain_.back();
}

LedgerNetwork::CommitOutcome LedgerNetwork::Commit(
    const aggregation::ServerState& state_before,
    std::span<const ClientUpdate> updates, const ParameterSet& claimed_global,
    std::uint64_t round, const aggregation::StrategyConfig& strategy_config) {
  CommitOutcome outcome;
  const Proposal proposal = Propose(round, strategy_config.kind, updates,
                                    claimed_global, strategy_config, state_before);
  std::vector<Endorsement> accepted;
  for (std::size_t peer = 0; peer < config_.peer_count; ++peer) {
    auto result = Endorse(peer, proposal, updates, state_before, strategy_config);
    if (const auto* e = std::get_if<Endorsement>(&result)) accepted.push_back(*e);
    outcome.endorsements.push_back(std::move(result));
  }
  try {
    OrderAndAppend(chain_, proposal, accepted, config_, clock_.NowMs());
    outcome.committed = true;
  } catch (const Error& e) {
    outcome.reason = e.what();
    for (const auto& r : outcome.endorsements) {
      if (const auto* refusal = std::get_if<Refusal>(&r)) {
        outcome.reason += "; peer " + std::to_string(refusal->peer_id) +
                          " refused: " + refusal->reason;
      }
    }
  }
  return outcome;
}

}  // namespace fedledger::ledger
