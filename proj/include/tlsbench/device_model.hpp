#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tlsbench/geometry.hpp"
#include "tlsbench/key.hpp"

namespace tlsbench {

/// Transistor contacts that can act as Seebeck sources, indexed into
/// CellGeometry::site_offsets. The corner names follow the default layout.
enum class Site : int {
  NmosLeft = 0,   // bottom-left
  PmosRight = 1,  // top-right
  NmosRight = 2,  // bottom-right
  PmosLeft = 3,   // top-left
};

struct CellGeometry {
  double width = 0.0;   // um
  double height = 0.0;  // um
  /// Offsets relative to the cell's bottom-left corner, ordered as Site.
  std::array<Vec2, 4> site_offsets{};

  /// Sites at the four corners, pulled inwards by `inset` times the cell size.
  static CellGeometry corner_inset(double width, double height, double inset = 0.15);

  Vec2 site(Site s) const { return site_offsets[static_cast<int>(s)]; }
  void validate() const;
};

/// Diagonal whose sites respond when the cell stores 1. The 0-state diagonal
/// is always the other one.
enum class Diagonal { TL_BR, BL_TR };

Diagonal opposite(Diagonal d);
std::array<Site, 2> diagonal_sites(Diagonal d);

/// Columns >= start_col are shifted right by `offset` um (cumulative).
struct BlockBoundary {
  int start_col = 0;
  double offset = 0.0;
};

/// Structure that responds to stimulation regardless of memory content.
/// Amplitude is relative to the spot's peak delta current.
struct Distractor {
  Rect area;
  double amplitude = 1.0;
};

struct MemoryArrayModel {
  int rows = 0;
  int cols = 0;
  CellGeometry geometry;
  Diagonal polarity = Diagonal::TL_BR;
  Vec2 origin;  // bottom-left corner of cell (0, 0); row index grows upwards
  std::vector<BlockBoundary> block_boundaries;
  std::vector<std::uint8_t> bits;   // row-major, rows x cols
  std::vector<double> sensitivity;  // row-major, > 0
  std::vector<Distractor> distractors;
  /// Unpowered memories have no sensitive sites (BBRAM deactivated).
  bool powered = true;

  /// Zeroed bits, unit sensitivity.
  static MemoryArrayModel make(int rows, int cols, CellGeometry geometry, Diagonal polarity, Vec2 origin,
                               std::vector<BlockBoundary> blocks = {});

  std::size_t index(int r, int c) const { return static_cast<std::size_t>(r) * cols + c; }
  int bit(int r, int c) const { return bits[index(r, c)]; }
  void set_bit(int r, int c, int value) { bits[index(r, c)] = value ? 1 : 0; }

  /// Sum of block offsets applying to column c.
  double block_offset(int c) const;
  double total_block_offset() const;

  /// Bounding rectangle of all cells.
  Rect footprint() const;

  void validate() const;
};

/// Log-normal per-cell sensitivity (median 1), deterministic in `seed`.
void apply_sensitivity_variation(MemoryArrayModel& model, double sigma, std::uint64_t seed);

/// Bottom-left corner of cell (r, c). Throws std::out_of_range.
Vec2 cell_position(const MemoryArrayModel& model, int r, int c);

/// Cell rectangle in um.
Rect cell_rect(const MemoryArrayModel& model, int r, int c);

struct SitePair {
  std::array<Vec2, 2> positions;
  double scale = 1.0;
};

/// The diagonal pair that is sensitive for the stored bit, with the cell's
/// sensitivity factor. Throws std::out_of_range.
SitePair sensitive_sites(const MemoryArrayModel& model, int r, int c);

/// Inclusive index range of cells whose rectangles may intersect [lo, hi]
/// along each axis; empty when first > last.
struct CellSpan {
  int row_first = 0, row_last = -1;
  int col_first = 0, col_last = -1;
};
CellSpan cells_near(const MemoryArrayModel& model, const Rect& window);

/// Metadata rows receive `metadata_word` with its most significant used bit
/// at column 0. Throws ConfigError on an invalid mapping.
MemoryArrayModel load_key(MemoryArrayModel model, const Key256& key, const BitMapping& mapping,
                          std::uint64_t metadata_word);

/// Reads the key back from the bits matrix.
Key256 decode_key(const MemoryArrayModel& model, const BitMapping& mapping);

enum class PowerMode { Active, LowPower };

struct DeviceElectrical {
  double baseline_current = 0.0;    // A
  double baseline_noise_rms = 0.0;  // A, active mode
  double lowpower_noise_rms = 0.0;  // A
  PowerMode mode = PowerMode::LowPower;
  double injected_noise_rms = 0.0;  // A, countermeasure

  /// Per-sample device noise (mode noise and injected noise, in quadrature).
  double noise_rms() const;
  void validate() const;
};

}  // namespace tlsbench
