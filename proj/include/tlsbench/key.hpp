#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace tlsbench {

/// 256-bit key. Bit K0 is the least significant bit, K255 the most
/// significant; hex strings are written MSB first.
class Key256 {
 public:
  Key256() = default;

  /// Accepts an optional 0x prefix and up to 64 hex digits (left-padded);
  /// '-', '_' and whitespace are ignored. Throws ConfigError otherwise.
  static Key256 from_hex(std::string_view hex);

  template <class Engine>
  static Key256 random(Engine& engine) {
    Key256 k;
    for (std::size_t i = 0; i < k.bytes_.size(); i += 8) {
      std::uint64_t w = engine();
      for (std::size_t j = 0; j < 8; ++j) k.bytes_[i + j] = static_cast<std::uint8_t>(w >> (8 * j));
    }
    return k;
  }

  /// "0x" followed by exactly 64 lowercase hex digits.
  std::string to_hex() const;

  bool bit(int index) const;
  void set_bit(int index, bool value);
  int popcount() const;

  /// Big-endian bytes: bytes()[0] holds K255..K248.
  const std::array<std::uint8_t, 32>& bytes() const { return bytes_; }

  friend bool operator==(const Key256&, const Key256&) = default;

 private:
  std::array<std::uint8_t, 32> bytes_{};
};

/// Number of differing bits.
int hamming_distance(const Key256& a, const Key256& b);

struct MappedCell {
  int row = 0;
  int col = 0;
  int bit_index = 0;  // logical key bit, 0..255
};

/// Physical cell -> logical key bit table. Rows listed in metadata_rows carry
/// device bookkeeping and are never part of the key.
struct BitMapping {
  int rows = 0;
  int cols = 0;
  std::vector<int> metadata_rows;
  std::vector<MappedCell> entries;

  /// Every non-metadata row holds key bits in reading order starting at the
  /// top-left cell (highest row index, column 0), which stores K255.
  static BitMapping row_major_msb_top_left(int rows, int cols, std::vector<int> metadata_rows);

  /// Throws ConfigError on collisions, out-of-grid cells, missing indices or
  /// entries placed in a metadata row.
  void validate(int device_rows, int device_cols) const;

  /// Logical bit index at (row, col), or -1 for unmapped cells.
  int index_at(int row, int col) const;

  bool is_metadata_row(int row) const;
};

}  // namespace tlsbench
