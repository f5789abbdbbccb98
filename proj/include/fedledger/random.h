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

#ifndef FEDLEDGER_RANDOM_H_
#define FEDLEDGER_RANDOM_H_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>
#include <vector>

namespace fedledger {

// Seeded stream with platform-independent draws. Only the mt19937_64 engine
// is used from <random>; the distributions are implemented here because the
// standard ones are allowed to differ between library vendors.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t NextU64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double Uniform01();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform01(); }
  // Standard normal via Box-Muller.
  double Normal();
  // Uniform in [0, n) by rejection; n > 0.
  std::uint64_t Below(std::uint64_t n);

  template <typename T>
  void Shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(Below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// SHA-256 over (tag, parts...) in the canonical little-endian encoding,
// truncated to the low 64 bits of the first eight digest bytes.
std::uint64_t DeriveSeed(std::string_view tag,
                         std::initializer_list<std::uint64_t> parts);

}  // namespace fedledger

#endif  // FEDLEDGER_RANDOM_H_
