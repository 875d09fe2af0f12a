#include "tlsbench/key.hpp"

#include <algorithm>
#include <bit>
#include <cctype>

#include "tlsbench/errors.hpp"

namespace tlsbench {

namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

Key256 Key256::from_hex(std::string_view hex) {
  if (hex.size() >= 2 && hex[0] == '0' && (hex[1] == 'x' || hex[1] == 'X')) hex.remove_prefix(2);
  std::string digits;
  for (char c : hex) {
    if (c == '-' || c == '_' || std::isspace(static_cast<unsigned char>(c))) continue;
    if (hex_value(c) < 0) throw ConfigError("invalid hex digit in key: '" + std::string(1, c) + "'");
    digits.push_back(c);
  }
  if (digits.empty()) throw ConfigError("empty key string");
  if (digits.size() > 64) throw ConfigError("key has more than 64 hex digits");
  digits.insert(0, 64 - digits.size(), '0');

  Key256 k;
  for (std::size_t i = 0; i < 32; ++i) {
    k.bytes_[i] = static_cast<std::uint8_t>(hex_value(digits[2 * i]) << 4 | hex_value(digits[2 * i + 1]));
  }
  return k;
}

std::string Key256::to_hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out = "0x";
  for (std::uint8_t b : bytes_) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

bool Key256::bit(int index) const {
  return (bytes_[31 - index / 8] >> (index % 8)) & 1u;
}

void Key256::set_bit(int index, bool value) {
  auto& b = bytes_[31 - index / 8];
  const auto mask = static_cast<std::uint8_t>(1u << (index % 8));
  b = value ? static_cast<std::uint8_t>(b | mask) : static_cast<std::uint8_t>(b & ~mask);
}

int Key256::popcount() const {
  int n = 0;
  for (std::uint8_t b : bytes_) n += std::popcount(b);
  return n;
}

int hamming_distance(const Key256& a, const Key256& b) {
  int n = 0;
  for (std::size_t i = 0; i < 32; ++i) n += std::popcount(static_cast<std::uint8_t>(a.bytes()[i] ^ b.bytes()[i]));
  return n;
}

BitMapping BitMapping::row_major_msb_top_left(int rows, int cols, std::vector<int> metadata_rows) {
  BitMapping m;
  m.rows = rows;
  m.cols = cols;
  m.metadata_rows = std::move(metadata_rows);
  int position = 0;
  for (int r = rows - 1; r >= 0; --r) {
    if (m.is_metadata_row(r)) continue;
    for (int c = 0; c < cols; ++c, ++position) {
      m.entries.push_back({r, c, 255 - position});
    }
  }
  return m;
}

void BitMapping::validate(int device_rows, int device_cols) const {
  if (rows != device_rows || cols != device_cols) {
    throw ConfigError("bit mapping is " + std::to_string(rows) + "x" + std::to_string(cols) +
                      " but the device is " + std::to_string(device_rows) + "x" +
                      std::to_string(device_cols));
  }
  if (entries.size() != 256) {
    throw ConfigError("bit mapping must cover exactly 256 key bits, has " + std::to_string(entries.size()));
  }
  std::vector<char> cell_used(static_cast<std::size_t>(rows) * cols, 0);
  std::array<char, 256> index_used{};
  for (const auto& e : entries) {
    if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols) {
      throw ConfigError("bit mapping entry outside the cell grid at (" + std::to_string(e.row) + "," +
                        std::to_string(e.col) + ")");
    }
    if (e.bit_index < 0 || e.bit_index > 255) {
      throw ConfigError("bit index out of range: " + std::to_string(e.bit_index));
    }
    if (is_metadata_row(e.row)) {
      throw ConfigError("bit mapping places K" + std::to_string(e.bit_index) + " in metadata row " +
                        std::to_string(e.row));
    }
    auto& used = cell_used[static_cast<std::size_t>(e.row) * cols + e.col];
    if (used) throw ConfigError("bit mapping collision at cell (" + std::to_string(e.row) + "," + std::to_string(e.col) + ")");
    used = 1;
    if (index_used[e.bit_index]) throw ConfigError("bit index K" + std::to_string(e.bit_index) + " mapped twice");
    index_used[e.bit_index] = 1;
  }
}

int BitMapping::index_at(int row, int col) const {
  for (const auto& e : entries) {
    if (e.row == row && e.col == col) return e.bit_index;
  }
  return -1;
}

bool BitMapping::is_metadata_row(int row) const {
  return std::find(metadata_rows.begin(), metadata_rows.end(), row) != metadata_rows.end();
}

}  // namespace tlsbench
