#include <bitset>
#include <cctype>
#include <random>
#include <set>
#include <string>

#include "doctest.h"
#include "tlsbench/device_model.hpp"
#include "tlsbench/errors.hpp"
#include "tlsbench/geometry.hpp"
#include "tlsbench/key.hpp"
#include "tlsbench/rng.hpp"

using namespace tlsbench;

namespace {

const char* kReferenceKey = "0xf20c28551d626c97c75932351b5dcebf4de340562ca7f54ae34f42c2d9ae4b7e";

// Independent reference: nibble-wise decode of a 64-digit hex string.
std::bitset<256> hex_bits(const std::string& hex64) {
  std::bitset<256> b;
  for (int d = 0; d < 64; ++d) {
    const char ch = hex64[static_cast<std::size_t>(63 - d)];
    const int v = std::isdigit(static_cast<unsigned char>(ch)) ? ch - '0' : ch - 'a' + 10;
    for (int k = 0; k < 4; ++k) b[static_cast<std::size_t>(4 * d + k)] = (v >> k) & 1;
  }
  return b;
}

std::string random_hex(std::mt19937_64& g) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (int i = 0; i < 64; ++i) s.push_back(digits[g() & 15]);
  return s;
}

}  // namespace

TEST_CASE("rect helpers") {
  const Rect a{0, 0, 2, 2}, b{1, 1, 3, 3};
  CHECK(intersection(a, b) == Rect{1, 1, 2, 2});
  CHECK(intersection_over_union(a, b) == doctest::Approx(1.0 / 7.0));
  CHECK(intersection_over_union(a, Rect{5, 5, 6, 6}) == 0.0);
  CHECK(a.contains(Vec2{0, 0}));
  CHECK_FALSE(a.contains(Vec2{2, 1}));
  CHECK(a.expanded(1) == Rect{-1, -1, 3, 3});
}

TEST_CASE("stream seeds are distinct and stable") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(stream_seed(42, i));
  CHECK(seen.size() == 10000);
  CHECK(stream_seed(42, 7) == stream_seed(42, 7));
  CHECK(stream_seed(42, 7) != stream_seed(43, 7));
  CHECK(fnv1a("a") != fnv1a("b"));
  SplitMix64 a(1), b(1);
  for (int i = 0; i < 100; ++i) CHECK(a() == b());
}

TEST_CASE("key hex parsing") {
  const Key256 k = Key256::from_hex(kReferenceKey);
  CHECK(k.to_hex() == kReferenceKey);
  CHECK(k.bit(255) == true);   // leading f
  CHECK(k.bit(0) == false);    // trailing e
  CHECK(k.bit(1) == true);
  CHECK(Key256::from_hex("0x1").bit(0));
  CHECK(Key256::from_hex("1").popcount() == 1);
  CHECK(Key256::from_hex("F2-0C_28 55").to_hex().substr(58) == "f20c2855");
  CHECK_THROWS_AS(Key256::from_hex("0xzz"), ConfigError);
  CHECK_THROWS_AS(Key256::from_hex(std::string(65, 'f')), ConfigError);
  CHECK(Key256::from_hex("0x0").popcount() == 0);
}

TEST_CASE("key bits agree with a nibble-wise reference for 1000 random keys") {
  std::mt19937_64 g(123);
  for (int n = 0; n < 1000; ++n) {
    const std::string hex = random_hex(g);
    const Key256 k = Key256::from_hex(hex);
    const std::bitset<256> ref = hex_bits(hex);
    for (int i = 0; i < 256; ++i) REQUIRE(k.bit(i) == ref[static_cast<std::size_t>(i)]);
    CHECK(k.popcount() == static_cast<int>(ref.count()));
    CHECK(k.to_hex() == "0x" + hex);
  }
}

TEST_CASE("hamming distance and set_bit") {
  Key256 a, b;
  b.set_bit(3, true);
  b.set_bit(200, true);
  CHECK(hamming_distance(a, b) == 2);
  b.set_bit(3, false);
  CHECK(hamming_distance(a, b) == 1);
}

TEST_CASE("default bbram mapping places K255 top-left of the key rows") {
  const BitMapping m = BitMapping::row_major_msb_top_left(9, 32, {8});
  CHECK_NOTHROW(m.validate(9, 32));
  CHECK(m.entries.size() == 256);
  CHECK(m.index_at(7, 0) == 255);
  CHECK(m.index_at(7, 31) == 224);
  CHECK(m.index_at(0, 31) == 0);
  CHECK(m.index_at(8, 0) == -1);
  CHECK(m.is_metadata_row(8));
}

TEST_CASE("mapping validation rejects malformed tables") {
  BitMapping m = BitMapping::row_major_msb_top_left(9, 32, {8});
  CHECK_THROWS_AS(m.validate(8, 32), ConfigError);

  BitMapping collide = m;
  collide.entries[1].row = collide.entries[0].row;
  collide.entries[1].col = collide.entries[0].col;
  CHECK_THROWS_AS(collide.validate(9, 32), ConfigError);

  BitMapping outside = m;
  outside.entries[0].col = 40;
  CHECK_THROWS_AS(outside.validate(9, 32), ConfigError);

  BitMapping in_meta = m;
  in_meta.entries[0].row = 8;
  CHECK_THROWS_AS(in_meta.validate(9, 32), ConfigError);

  BitMapping dup = m;
  dup.entries[1].bit_index = dup.entries[0].bit_index;
  CHECK_THROWS_AS(dup.validate(9, 32), ConfigError);

  BitMapping short_map = m;
  short_map.entries.pop_back();
  CHECK_THROWS_AS(short_map.validate(9, 32), ConfigError);
}

TEST_CASE("load_key then decode is the identity; cells follow the reference bit order") {
  const BitMapping m = BitMapping::row_major_msb_top_left(9, 32, {8});
  const auto blank = MemoryArrayModel::make(9, 32, CellGeometry::corner_inset(3.2, 2.8), Diagonal::TL_BR, {});
  std::mt19937_64 g(7);
  for (int n = 0; n < 1000; ++n) {
    const std::string hex = random_hex(g);
    const Key256 key = Key256::from_hex(hex);
    const auto model = load_key(blank, key, m, 0xa5c30f5a);
    REQUIRE(decode_key(model, m) == key);
    const std::bitset<256> ref = hex_bits(hex);
    // Row 7 column 0 holds K255; reading order continues left to right, then down.
    for (int pos = 0; pos < 256; ++pos) {
      const int r = 7 - pos / 32, c = pos % 32;
      REQUIRE(model.bit(r, c) == static_cast<int>(ref[static_cast<std::size_t>(255 - pos)]));
    }
  }
}

TEST_CASE("load_key writes the metadata word and leaves key rows untouched by it") {
  const BitMapping m = BitMapping::row_major_msb_top_left(9, 32, {8});
  const auto blank = MemoryArrayModel::make(9, 32, CellGeometry::corner_inset(3.2, 2.8), Diagonal::TL_BR, {});
  const auto model = load_key(blank, Key256{}, m, 0xa5c30f5a);
  const std::uint32_t word = 0xa5c30f5a;
  for (int c = 0; c < 32; ++c) CHECK(model.bit(8, c) == static_cast<int>((word >> (31 - c)) & 1));
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 32; ++c) CHECK(model.bit(r, c) == 0);
  CHECK(decode_key(model, m) == Key256{});
}

TEST_CASE("the published key round-trips through the cell matrix") {
  const BitMapping m = BitMapping::row_major_msb_top_left(9, 32, {8});
  const auto blank = MemoryArrayModel::make(9, 32, CellGeometry::corner_inset(3.2, 2.8), Diagonal::TL_BR, {});
  const Key256 key = Key256::from_hex(kReferenceKey);
  CHECK(decode_key(load_key(blank, key, m, 0xa5c30f5a), m).to_hex() == kReferenceKey);
}
