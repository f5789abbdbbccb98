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

#ifndef FEDLEDGER_LEDGER_H_
#define FEDLEDGER_LEDGER_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fedledger/aggregation.h"
#include "fedledger/client_update.h"
#include "fedledger/params.h"

namespace fedledger::ledger {

struct UpdateDigest {
  std::uint64_t client_id = 0;
  Digest digest;
  friend bool operator==(const UpdateDigest&, const UpdateDigest&) = default;
};

struct Endorsement {
  std::uint64_t peer_id = 0;
  Digest digest;
  friend bool operator==(const Endorsement&, const Endorsement&) = default;
};

struct Refusal {
  std::uint64_t peer_id = 0;
  std::string reason;
};

using EndorsementOutcome = std::variant<Endorsement, Refusal>;

struct Block {
  std::uint64_t index = 0;
  Digest prev_hash;
  std::uint64_t round = 0;
  std::string strategy_kind;
  Digest params_digest;
  std::vector<UpdateDigest> update_digests;
  std::vector<Endorsement> endorsements;
  std::int64_t timestamp_ms = 0;
  Digest block_hash;

  friend bool operator==(const Block&, const Block&) = default;
};

using Chain = std::vector<Block>;

// Every field but block_hash, in declaration order, using the parameter
// encoders (u64 little-endian integers and lengths, raw digest bytes).
std::vector<std::uint8_t> BlockCanonicalBytes(const Block& block);
Digest ComputeBlockHash(const Block& block);

struct LedgerConfig {
  std::size_t peer_count = 2;
  std::size_t required_endorsements = 2;

  void Validate() const;
};

// Injected time source so block hashes can be pinned.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t NowMs() = 0;
};

// Starts at `start_ms` and advances `step_ms` per reading.
class LogicalClock : public Clock {
 public:
  explicit LogicalClock(std::int64_t start_ms = 0, std::int64_t step_ms = 1)
      : next_(start_ms), step_(step_ms) {}
  std::int64_t NowMs() override;

 private:
  std::int64_t next_;
  std::int64_t step_;
};

class SystemClock : public Clock {
 public:
  std::int64_t NowMs() override;
};

inline constexpr char kGenesisKind[] = "genesis";

// Block 0: zero prev_hash, round 0, every peer endorsing digest(params).
Block Genesis(const ParameterSet& initial_params, std::int64_t timestamp_ms,
              std::size_t peer_count = 2);

struct Proposal {
  std::uint64_t round = 0;
  std::string strategy_kind;
  std::vector<UpdateDigest> update_digests;  // input order
  Digest claimed_digest;
  Digest prior_global_digest;
  std::optional<Digest> prior_momentum_digest;
  aggregation::StrategyConfig strategy_config;
};

Proposal Propose(std::uint64_t round, aggregation::StrategyKind kind,
                 std::span<const ClientUpdate> updates,
                 const ParameterSet& claimed_global,
                 const aggregation::StrategyConfig& strategy_config,
                 const aggregation::ServerState& state_before);

// A peer re-runs the aggregation on the updates it holds and endorses only if
// its result digests to the claimed value and its inputs match the proposal.
EndorsementOutcome Endorse(std::uint64_t peer_id, const Proposal& proposal,
                           std::span<const ClientUpdate> updates,
                           const aggregation::ServerState& state_before,
                           const aggregation::StrategyConfig& strategy_config);

// Throws kLedgerRejected when the policy is not met or endorsement digests
// disagree with the claim.
const Block& OrderAndAppend(Chain& chain, const Proposal& proposal,
                            std::span<const Endorsement> endorsements,
                            const LedgerConfig& policy,
                            std::int64_t timestamp_ms);

struct VerificationReport {
  bool valid = true;
  std::size_t blocks = 0;
  std::optional<std::size_t> first_bad_index;
  std::string reason;
};

// Recomputes hashes and linkage, checks indices, round monotonicity and that
// endorsements match params_digest. Truncating the tail is not detectable.
VerificationReport VerifyChain(std::span<const Block> chain);

// JSON Lines persistence: one block per line, digests as lowercase hex.
std::string BlockToJsonLine(const Block& block);
Block BlockFromJsonLine(const std::string& line);
void WriteChain(const Chain& chain, const std::string& path);
Chain ReadChain(const std::string& path);
// Lines that fail to parse are reported as invalid at that index.
VerificationReport VerifyChainFile(const std::string& path);

// Simulated channel: `peer_count` endorsing peers plus a single orderer
// writing to one chain.
class LedgerNetwork {
 public:
  LedgerNetwork(LedgerConfig config, Clock& clock);

  const Block& Initialize(const ParameterSet& initial_params);

  struct CommitOutcome {
    bool committed = false;
    std::vector<EndorsementOutcome> endorsements;
    std::string reason;
  };

  // Proposes `claimed_global` as the next global model; every peer
  // re-executes the strategy on `updates`. A rejected proposal leaves the
  // chain untouched.
  CommitOutcome Commit(const aggregation::ServerState& state_before,
                       std::span<const ClientUpdate> updates,
                       const ParameterSet& claimed_global,
                       std::uint64_t round,
                       const aggregation::StrategyConfig& strategy_config);

  const Chain& chain() const { return chain_; }
  const LedgerConfig& config() const { return config_; }

 private:
  LedgerConfig config_;
  Clock& clock_;
  Chain chain_;
};

}  // namespace fedledger::ledger

#endif  // FEDLEDGER_LEDGER_H_
