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

#ifndef FEDLEDGER_PARAMS_H_
#define FEDLEDGER_PARAMS_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fedledger {

// 32-byte SHA-256 value.
struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  friend bool operator==(const Digest&, const Digest&) = default;

  std::string ToHex() const;
  // Accepts exactly 64 lowercase or uppercase hex characters.
  static Digest FromHex(std::string_view hex);
  static Digest Zero() { return Digest{}; }
};

Digest Sha256(std::span<const std::uint8_t> data);

// Little-endian primitive encoder shared by every canonical encoding in the
// library (parameter sets, ledger blocks, seed derivation).
class ByteWriter {
 public:
  void U64(std::uint64_t v);
  void I64(std::int64_t v) { U64(static_cast<std::uint64_t>(v)); }
  void F64(double v);
  // Length-prefixed (u64) UTF-8 bytes.
  void Text(std::string_view s);
  void Raw(std::span<const std::uint8_t> bytes);
  void Put(const Digest& d) { Raw(d.bytes); }

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::vector<std::uint8_t> Take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t U64();
  double F64();
  std::string Text();
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> Take(std::size_t n);

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

struct ParameterEntry {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;  // row-major

  std::size_t NumElements() const;
};

// Ordered collection of named tensors. Entry order is construction order and
// is part of the schema.
class ParameterSet {
 public:
  ParameterSet() = default;

  // Throws kInvalidArgument on a duplicate name, a zero dimension, or a
  // shape/value count mismatch.
  void Add(std::string name, std::vector<std::size_t> shape,
           std::vector<double> values);
  void AddZeros(std::string name, std::vector<std::size_t> shape);

  const std::vector<ParameterEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t NumValues() const;

  const ParameterEntry& Get(std::string_view name) const;
  ParameterEntry& GetMutable(std::string_view name);
  ParameterEntry& mutable_entry(std::size_t i) { return entries_[i]; }

  // Same names and shapes in the same order.
  bool SameSchema(const ParameterSet& other) const;
  ParameterSet ZerosLike() const;
  bool AllFinite() const;

  // Flat concatenation of all values in entry order.
  std::vector<double> Flatten() const;
  // Overwrites values from a flat vector of NumValues() elements.
  void Unflatten(std::span<const double> flat);

 private:
  std::vector<ParameterEntry> entries_;
};

// Exact bit-for-bit equality of schema and values (distinguishes -0.0/+0.0).
bool BitwiseEqual(const ParameterSet& a, const ParameterSet& b);

// Throws kSchemaMismatch naming the first differing entry.
void CheckSameSchema(const ParameterSet& x, const ParameterSet& y);

// Canonical encoding: for each entry, u64 name length, name bytes, u64 rank,
// u64 dims, then f64 values, all little-endian. Non-finite values are refused
// with kSerializationRefused.
std::vector<std::uint8_t> CanonicalBytes(const ParameterSet& p);
ParameterSet FromCanonicalBytes(std::span<const std::uint8_t> bytes);
Digest ComputeDigest(const ParameterSet& p);

// a*x + y.
ParameterSet Axpy(double a, const ParameterSet& x, const ParameterSet& y);
ParameterSet Scale(double a, const ParameterSet& x);
ParameterSet Add(const ParameterSet& x, const ParameterSet& y);
ParameterSet Sub(const ParameterSet& x, const ParameterSet& y);
double L2DistanceSq(const ParameterSet& x, const ParameterSet& y);

// Debug export: [{"name":..,"shape":[..],"values":[..]}]. Not a digest input.
std::string ToDebugJson(const ParameterSet& p);

}  // namespace fedledger

#endif  // FEDLEDGER_PARAMS_H_
