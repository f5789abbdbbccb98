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

#include "fedledger/params.h"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <utility>

#include "fedledger/error.h"
#include "json.hpp"

namespace fedledger {

namespace {

constexpr char kHexDigits[] = "0123456789abcdef";

int HexValue(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

template <typename Op>
ParameterSet Elementwise(const ParameterSet& x, const ParameterSet& y, Op op) {
  CheckSameSchema(x, y);
  ParameterSet out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto& ex = x.entries()[i];
    const auto& ey = y.entries()[i];
    std::vector<double> values(ex.values.size());
    for (std::size_t j = 0; j < values.size(); ++j) {
      values[j] = op(ex.values[j], ey.values[j]);
    }
    out.Add(ex.name, ex.shape, std::move(values));
  }
  return out;
}

}  // namespace

std::string Digest::ToHex() const {
  std::string out;
  out.reserve(64);
  for (auto b : bytes) {
    out.push_back(kHexDigits[b >> 4]);
    out.push_back(kHexDigits[b & 0xf]);
  }
  return out;
}

Digest Digest::FromHex(std::string_view hex) {
  Require(hex.size() == 64, ErrorCode::kInvalidArgument,
          "digest hex must be 64 characters, got " + std::to_string(hex.size()));
  Digest d;
  for (std::size_t i = 0; i < 32; ++i) {
    int hi = HexValue(hex[2 * i]);
    int lo = HexValue(hex[2 * i + 1]);
    Require(hi >= 0 && lo >= 0, ErrorCode::kInvalidArgument,
            "invalid hex character in digest");
    d.bytes[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return d;
}

Digest Sha256(std::span<const std::uint8_t> data) {
  Digest d;
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), d.bytes.data(), &len, EVP_sha256(),
                 nullptr) != 1 ||
      len != d.bytes.size()) {
    Fail(ErrorCode::kRuntime, "SHA-256 computation failed");
  }
  return d;
}

void ByteWriter::U64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

void ByteWriter::F64(double v) { U64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::Text(std::string_view s) {
  U64(s.size());
  bytes_.insert(bytes_.end(), s.begin(), s.end());
}

void ByteWriter::Raw(std::span<const std::uint8_t> bytes) {
  bytes_.insert(bytes_.end(), bytes.begin(), bytes.end());
}

std::span<const std::uint8_t> ByteReader::Take(std::size_t n) {
  Require(n <= bytes_.size() - pos_, ErrorCode::kInvalidArgument,
          "truncated canonical byte sequence");
  auto out = bytes_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint64_t ByteReader::U64() {
  auto b = Take(8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

double ByteReader::F64() { return std::bit_cast<double>(U64()); }

std::string ByteReader::Text() {
  std::uint64_t n = U64();
  auto b = Take(n);
  return std::string(b.begin(), b.end());
}

std::size_t ParameterEntry::NumElements() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

void ParameterSet::Add(std::string name, std::vector<std::size_t> shape,
                       std::vector<double> values) {
  for (const auto& e : entries_) {
    Require(e.name != name, ErrorCode::kInvalidArgument,
            "duplicate parameter entry '" + name + "'");
  }
  for (auto d : shape) {
    Require(d > 0, ErrorCode::kInvalidArgument,
            "parameter entry '" + name + "' has a zero dimension");
  }
  ParameterEntry e{std::move(name), std::move(shape), std::move(values)};
  Require(e.NumElements() == e.values.size(), ErrorCode::kInvalidArgument,
          "parameter entry '" + e.name + "' shape product does not match " +
              std::to_string(e.values.size()) + " values");
  entries_.push_back(std::move(e));
}

void ParameterSet::AddZeros(std::string name, std::vector<std::size_t> shape) {
  std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                  std::multiplies<>());
  Add(std::move(name), std::move(shape), std::vector<double>(n, 0.0));
}

std::size_t ParameterSet::NumValues() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.values.size();
  return n;
}

const ParameterEntry& ParameterSet::Get(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e;
  }
  Fail(ErrorCode::kInvalidArgument,
       "no parameter entry named '" + std::string(name) + "'");
}

ParameterEntry& ParameterSet::GetMutable(std::string_view name) {
  return const_cast<ParameterEntry&>(std::as_const(*this).Get(name));
}

bool ParameterSet::SameSchema(const ParameterSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name != other.entries_[i].name ||
        entries_[i].shape != other.entries_[i].shape) {
      return false;
    }
  }
  return true;
}

ParameterSet ParameterSet::ZerosLike() const {
  ParameterSet out;
  for (const auto& e : entries_) out.AddZeros(e.name, e.shape);
  return out;
}

bool ParameterSet::AllFinite() const {
  for (const auto& e : entries_) {
    for (double v : e.values) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

std::vector<double> ParameterSet::Flatten() const {
  std::vector<double> flat;
  flat.reserve(NumValues());
  for (const auto& e : entries_) {
    flat.insert(flat.end(), e.values.begin(), e.values.end());
  }
  return flat;
}

void ParameterSet::Unflatten(std::span<const double> flat) {
  Require(flat.size() == NumValues(), ErrorCode::kInvalidArgument,
          "flat vector length does not match parameter count");
  std::size_t pos = 0;
  for (auto& e : entries_) {
    std::copy_n(flat.begin() + pos, e.values.size(), e.values.begin());
    pos += e.values.size();
  }
}

bool BitwiseEqual(const ParameterSet& a, const ParameterSet& b) {
  if (!a.SameSchema(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& va = a.entries()[i].values;
    const auto& vb = b.entries()[i].values;
    if (std::memcmp(va.data(), vb.data(), va.size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

void CheckSameSchema(const ParameterSet& x, const ParameterSet& y) {
  std::size_t n = std::min(x.size(), y.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ex = x.entries()[i];
    const auto& ey = y.entries()[i];
    if (ex.name != ey.name || ex.shape != ey.shape) {
      Fail(ErrorCode::kSchemaMismatch,
           "schema mismatch at entry " + std::to_string(i) + " ('" + ex.name +
               "' vs '" + ey.name + "')");
    }
  }
  if (x.size() != y.size()) {
    const auto& longer = x.size() > y.size() ? x : y;
    Fail(ErrorCode::kSchemaMismatch,
         "schema mismatch at entry " + std::to_string(n) + " ('" +
             longer.entries()[n].name + "' present on one side only)");
  }
}

std::vector<std::uint8_t> CanonicalBytes(const ParameterSet& p) {
  ByteWriter w;
  for (const auto& e : p.entries()) {
    w.Text(e.name);
    w.U64(e.shape.size());
    for (auto d : e.shape) w.U64(d);
    for (double v : e.values) {
      if (!std::isfinite(v)) {
        Fail(ErrorCode::kSerializationRefused,
             "non-finite value in parameter entry '" + e.name + "'");
      }
      w.F64(v);
    }
  }
  return w.Take();
}

ParameterSet FromCanonicalBytes(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  ParameterSet p;
  while (!r.done()) {
    std::string name = r.Text();
    std::uint64_t rank = r.U64();
    std::vector<std::size_t> shape(rank);
    std::size_t count = 1;
    for (auto& d : shape) {
      d = r.U64();
      count *= d;
    }
    std::vector<double> values(count);
    for (auto& v : values) v = r.F64();
    p.Add(std::move(name), std::move(shape), std::move(values));
  }
  return p;
}

Digest ComputeDigest(const ParameterSet& p) { return Sha256(CanonicalBytes(p)); }

ParameterSet Axpy(double a, const ParameterSet& x, const ParameterSet& y) {
  return Elementwise(x, y, [a](double xv, double yv) { return a * xv + yv; });
}

ParameterSet Scale(double a, const ParameterSet& x) {
  ParameterSet out;
  for (const auto& e : x.entries()) {
    std::vector<double> values(e.values.size());
    for (std::size_t j = 0; j < values.size(); ++j) values[j] = a * e.values[j];
    out.Add(e.name, e.shape, std::move(values));
  }
  return out;
}

ParameterSet Add(const ParameterSet& x, const ParameterSet& y) {
  return Elementwise(x, y, [](double xv, double yv) { return xv + yv; });
}

ParameterSet Sub(const ParameterSet& x, const ParameterSet& y) {
  return Elementwise(x, y, [](double xv, double yv) { return xv - yv; });
}

double L2DistanceSq(const ParameterSet& x, const ParameterSet& y) {
  CheckSameSchema(x, y);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto& vx = x.entries()[i].values;
    const auto& vy = y.entries()[i].values;
    for (std::size_t j = 0; j < vx.size(); ++j) {
      double d = vx[j] - vy[j];
      sum += d * d;
    }
  }
  return sum;
}

std::string ToDebugJson(const ParameterSet& p) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& e : p.entries()) {
    out.push_back({{"name", e.name}, {"shape", e.shape}, {"values", e.values}});
  }
  return out.dump();
}

}  // namespace fedledger
