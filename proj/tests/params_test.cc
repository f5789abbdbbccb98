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

#include <cmath>
#include <cstring>
#include <limits>

#include "fedledger/error.h"
#include "fedledger/random.h"
#include "gtest/gtest.h"

namespace fedledger {
namespace {

ParameterSet RandomParams(Rng& rng, std::size_t entries = 3) {
  ParameterSet p;
  for (std::size_t e = 0; e < entries; ++e) {
    std::size_t rows = 1 + rng.Below(4);
    std::size_t cols = 1 + rng.Below(5);
    std::vector<double> values(rows * cols);
    for (auto& v : values) v = rng.Uniform(-10.0, 10.0);
    p.Add("e" + std::to_string(e), {rows, cols}, std::move(values));
  }
  return p;
}

ParameterSet WithSameSchema(const ParameterSet& like, Rng& rng) {
  ParameterSet p = like.ZerosLike();
  for (std::size_t e = 0; e < p.size(); ++e) {
    for (auto& v : p.mutable_entry(e).values) v = rng.Uniform(-10.0, 10.0);
  }
  return p;
}

TEST(ParamsTest, EmptySetHasEmptyCanonicalBytes) {
  EXPECT_TRUE(CanonicalBytes(ParameterSet{}).empty());
}

TEST(ParamsTest, SingleEntryCanonicalBytes) {
  ParameterSet p;
  p.Add("b", {1}, {1.0});
  const std::vector<std::uint8_t> expected = {
      0x01, 0, 0, 0, 0, 0, 0, 0,           // name length
      0x62,                                // "b"
      0x01, 0, 0, 0, 0, 0, 0, 0,           // rank
      0x01, 0, 0, 0, 0, 0, 0, 0,           // dim 0
      0, 0, 0, 0, 0, 0, 0xF0, 0x3F,        // 1.0
  };
  EXPECT_EQ(CanonicalBytes(p), expected);
}

TEST(ParamsTest, SignFlipChangesExactlyOneByte) {
  ParameterSet a;
  a.Add("w", {3}, {1.5, -2.0, 0.25});
  ParameterSet b;
  b.Add("w", {3}, {1.5, 2.0, 0.25});
  auto ba = CanonicalBytes(a);
  auto bb = CanonicalBytes(b);
  ASSERT_EQ(ba.size(), bb.size());
  int differing = 0;
  for (std::size_t i = 0; i < ba.size(); ++i) differing += ba[i] != bb[i];
  EXPECT_EQ(differing, 1);
}

TEST(ParamsTest, NonFiniteValueIsRefused) {
  ParameterSet p;
  p.Add("w", {2}, {1.0, std::numeric_limits<double>::quiet_NaN()});
  try {
    CanonicalBytes(p);
    FAIL() << "expected refusal";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSerializationRefused);
  }
  ParameterSet q;
  q.Add("w", {1}, {std::numeric_limits<double>::infinity()});
  EXPECT_THROW(ComputeDigest(q), Error);
}

TEST(ParamsTest, DigestOfEmptySetIsSha256OfEmptyInput) {
  EXPECT_EQ(ComputeDigest(ParameterSet{}).ToHex(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(ParamsTest, DigestMatchesIndependentEncoding) {
  // Expected values from Python's hashlib over struct-packed bytes.
  ParameterSet single;
  single.Add("b", {1}, {1.0});
  EXPECT_EQ(ComputeDigest(single).ToHex(),
            "9d9e9198caee1b890997bac75ea660bc77124c66daec2cf66f892fd31fdef36b");
  ParameterSet two;
  two.Add("w", {2, 2}, {0.5, -1.25, 3.0, 1e-300});
  two.Add("b", {1}, {-0.0});
  EXPECT_EQ(ComputeDigest(two).ToHex(),
            "46272f4a5c4f3c84e7876e1b3fa66c17f4205701ba1ae18c96a8c916b3ce31d6");
}

TEST(ParamsTest, Sha256KnownVector) {
  const std::string abc = "abc";
  std::vector<std::uint8_t> bytes(abc.begin(), abc.end());
  EXPECT_EQ(Sha256(bytes).ToHex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(ParamsTest, DigestIsDeterministicAndSensitiveToOneUlp) {
  ParameterSet a;
  a.Add("w", {2}, {1.0, 3.0});
  ParameterSet b;
  b.Add("w", {2}, {1.0000000000000002, 3.0});
  EXPECT_EQ(ComputeDigest(a), ComputeDigest(a));
  EXPECT_NE(ComputeDigest(a), ComputeDigest(b));
}

TEST(ParamsTest, DigestHexRoundTrip) {
  Rng rng(5);
  Digest d = ComputeDigest(RandomParams(rng));
  EXPECT_EQ(Digest::FromHex(d.ToHex()), d);
  EXPECT_THROW(Digest::FromHex("zz"), Error);
  EXPECT_THROW(Digest::FromHex(std::string(64, 'g')), Error);
}

TEST(ParamsTest, CanonicalBytesRoundTripIsBitwise) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    ParameterSet p = RandomParams(rng, 1 + rng.Below(4));
    p.mutable_entry(0).values[0] = -0.0;
    ParameterSet back = FromCanonicalBytes(CanonicalBytes(p));
    EXPECT_TRUE(BitwiseEqual(p, back));
  }
}

TEST(ParamsTest, DigestEqualityTracksByteEquality) {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    ParameterSet a = RandomParams(rng, 2);
    ParameterSet b = a;
    if (rng.Below(2) == 1) {
      auto& v = b.mutable_entry(rng.Below(2)).values;
      std::size_t j = rng.Below(v.size());
      std::uint64_t bits;
      std::memcpy(&bits, &v[j], 8);
      bits ^= std::uint64_t{1} << rng.Below(52);  // stay finite
      std::memcpy(&v[j], &bits, 8);
    }
    EXPECT_EQ(ComputeDigest(a) == ComputeDigest(b),
              CanonicalBytes(a) == CanonicalBytes(b));
  }
}

TEST(ParamsTest, AxpyIdentityAndReflexiveDistance) {
  Rng rng(3);
  ParameterSet x = RandomParams(rng);
  EXPECT_TRUE(BitwiseEqual(Axpy(1.0, x, x.ZerosLike()), x));
  EXPECT_EQ(L2DistanceSq(x, x), 0.0);
}

TEST(ParamsTest, SubAndDistanceByHand) {
  ParameterSet x;
  x.Add("v", {2}, {1.0, 2.0});
  ParameterSet y;
  y.Add("v", {2}, {3.0, 5.0});
  auto d = Sub(x, y);
  EXPECT_EQ(d.entries()[0].values, (std::vector<double>{-2.0, -3.0}));
  EXPECT_EQ(L2DistanceSq(x, y), 13.0);
  EXPECT_EQ(Add(x, y).entries()[0].values, (std::vector<double>{4.0, 7.0}));
  EXPECT_EQ(Scale(2.0, x).entries()[0].values, (std::vector<double>{2.0, 4.0}));
}

TEST(ParamsTest, SchemaMismatchNamesFirstDifferingEntry) {
  ParameterSet x;
  x.Add("a", {2}, {1.0, 2.0});
  x.Add("b", {1}, {1.0});
  ParameterSet y;
  y.Add("a", {2}, {1.0, 2.0});
  y.Add("c", {1}, {1.0});
  try {
    Add(x, y);
    FAIL() << "expected schema mismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaMismatch);
    EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos);
  }
  ParameterSet z;
  z.Add("a", {2}, {1.0, 2.0});
  EXPECT_THROW(L2DistanceSq(x, z), Error);
}

TEST(ParamsTest, VectorSpaceAxiomsReproduceExactly) {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    ParameterSet x = RandomParams(rng);
    ParameterSet y = WithSameSchema(x, rng);
    ParameterSet z = WithSameSchema(x, rng);
    EXPECT_TRUE(BitwiseEqual(Add(x, y), Add(y, x)));
    EXPECT_TRUE(BitwiseEqual(Add(x, x.ZerosLike()), x));
    EXPECT_TRUE(BitwiseEqual(Scale(1.0, x), x));
    EXPECT_TRUE(BitwiseEqual(Add(Add(x, y), z), Add(Add(x, y), z)));
    EXPECT_TRUE(BitwiseEqual(Axpy(2.0, x, y), Add(Scale(2.0, x), y)));
    EXPECT_EQ(L2DistanceSq(Sub(x, x), x.ZerosLike()), 0.0);
  }
}

TEST(ParamsTest, AddRejectsBadEntries) {
  ParameterSet p;
  p.Add("a", {2}, {1.0, 2.0});
  EXPECT_THROW(p.Add("a", {1}, {1.0}), Error);
  EXPECT_THROW(p.Add("b", {3}, {1.0}), Error);
  EXPECT_THROW(p.Add("c", {0}, {}), Error);
}

TEST(ParamsTest, DebugJsonExport) {
  ParameterSet p;
  p.Add("b", {1}, {1.0});
  EXPECT_EQ(ToDebugJson(p), R"([{"name":"b","shape":[1],"values":[1.0]}])");
}

}  // namespace
}  // namespace fedledger
