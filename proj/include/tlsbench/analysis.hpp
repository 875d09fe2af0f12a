#pragma once

#include <string>
#include <vector>

#include "tlsbench/device_model.hpp"
#include "tlsbench/geometry.hpp"
#include "tlsbench/key.hpp"
#include "tlsbench/response_map.hpp"

namespace tlsbench {

// ---------------------------------------------------------------------------
// Map encoding and arithmetic

struct GrayscaleMap {
  int width = 0;
  int height = 0;
  std::vector<double> intensity;  // [0, 1], same layout as ResponseMap::values
  double current_min = 0.0;       // maps to 0
  double current_max = 0.0;       // maps to 1
};

/// Linear-interpolated percentile (0..100) of `values`.
double percentile(std::vector<double> values, double pct);

/// Brighter means more current. Values outside the (low, high) percentiles
/// are clipped. A constant map encodes to 0.5 everywhere.
GrayscaleMap encode_grayscale(const ResponseMap& map, double low_pct = 0.0, double high_pct = 100.0);

/// Elementwise a - b. Throws GeometryError unless both maps share size,
/// pitch and origin exactly; no resampling is attempted.
ResponseMap subtract_maps(const ResponseMap& a, const ResponseMap& b);

/// Per-pixel white-noise rms: 1.4826 * MAD of the 3x3 second-difference
/// residual, divided by the kernel norm. Smooth structure and isolated
/// bright sites barely move the median.
double robust_noise_rms(const ResponseMap& map);

// ---------------------------------------------------------------------------
// Localization

struct CandidateBox {
  Rect area;  // um, pixel edges
  double integrated_difference = 0.0;  // sum |on - off| over member pixels, A
  int pixel_count = 0;
};

/// Regions whose on/off difference exceeds threshold_sigma times the
/// difference-map noise. Neighbouring hits are merged with a one-pixel
/// dilation; components smaller than min_pixels are dropped. Sorted by
/// integrated difference, largest first. Structures present in both maps
/// cancel.
std::vector<CandidateBox> localize_candidates(const ResponseMap& on, const ResponseMap& off,
                                              double threshold_sigma = 6.0, int min_pixels = 3);

// ---------------------------------------------------------------------------
// Cell grid

struct CellGrid {
  Vec2 origin;  // bottom-left corner of cell (0, 0)
  double pitch_x = 0.0;
  double pitch_y = 0.0;
  int rows = 0;
  int cols = 0;
  std::vector<BlockBoundary> block_boundaries;

  Rect cell_rect(int r, int c) const;
};

/// Recovers pitch from the autocorrelation peak nearest the hint and phase
/// from the energy at the hint's site offsets; rows and cols cover the lit
/// cells. Throws FitError (with the autocorrelation diagnostics) when no
/// peak within +-10% of the hint stands out.
CellGrid fit_grid(const ResponseMap& map, const CellGeometry& hint);

/// Keeps pitch and phase but moves the origin by whole cells to the lattice
/// point nearest `nominal_origin`, and sets the grid size.
CellGrid anchor_grid(CellGrid grid, Vec2 nominal_origin, int rows, int cols);

/// Grid indexed like `device` (its size and block boundaries) with the
/// fitted pitch, placed so that device cell (row, col) lands on the fitted
/// lattice point nearest its nominal position. Pitch errors then only
/// accumulate away from that cell.
CellGrid anchor_to_device(const CellGrid& fitted, const MemoryArrayModel& device, int row, int col);

// ---------------------------------------------------------------------------
// Per-cell classification

struct CellPatch {
  const ResponseMap& map;
  Rect cell;
  double noise_rms = 0.0;  // <= 0: estimate from the patch
};

struct BitDecision {
  int bit = 0;
  double score = 0.0;
  double confidence = 0.0;
};

/// Contrast between the corner regions of the 1-state diagonal and those of
/// the 0-state diagonal (each corner region spans corner_fraction of the cell
/// per axis). Positive score means 1. Throws GeometryError if the cell is not
/// fully covered by the map or a corner region holds no pixel centre.
BitDecision classify_bit_quadrant(const CellPatch& patch, Diagonal polarity, double corner_fraction = 0.3);

/// For difference maps (target minus all-zero reference): bit is 1 when the
/// standard deviation over the cell core, in noise units, exceeds
/// `threshold`. The core is the cell shrunk by core_inset per side.
/// Confidence is the distance from the threshold.
BitDecision classify_bit_differential(const CellPatch& patch, double threshold, double core_inset = 0.2);

enum class Classifier { Quadrant, Differential };

const char* classifier_name(Classifier c);
Classifier parse_classifier(const std::string& name);

struct ExtractionSettings {
  Classifier classifier = Classifier::Differential;
  double threshold = 3.0;
  double confidence_floor = 0.5;
  Diagonal polarity = Diagonal::TL_BR;
  double corner_fraction = 0.3;
  double core_inset = 0.2;
};

struct CellDecision {
  int row = 0;
  int col = 0;
  int bit_index = -1;  // -1 for metadata / unmapped cells
  int bit = 0;
  double score = 0.0;
  double confidence = 0.0;
  bool low_confidence = false;
};

struct ExtractionReport {
  Key256 key;
  std::vector<std::string> metadata_hex;  // one entry per metadata row
  std::vector<CellDecision> cells;
  std::vector<int> low_confidence_bits;  // logical indices
  ExtractionSettings settings;
  CellGrid grid;
  double noise_rms = 0.0;
};

/// Classifies every cell of `grid`, assembles K255..K0 through `mapping` and
/// decodes metadata rows (always with the quadrant classifier on the
/// target). Differential mode needs `reference` and classifies target minus
/// reference. Low-confidence bits are flagged, not fatal.
ExtractionReport extract_key(const ResponseMap& target, const ResponseMap* reference, const CellGrid& grid,
                             const BitMapping& mapping, const ExtractionSettings& settings);

struct CellRange {
  int row_first = 0;
  int row_last = 0;
  int col_first = 0;
  int col_last = 0;
  int rows() const { return row_last - row_first + 1; }
  int cols() const { return col_last - col_first + 1; }
};

struct BitMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> bits;  // row-major, row 0 = range.row_first
  std::vector<double> confidence;
  int at(int r, int c) const { return bits[static_cast<std::size_t>(r) * cols + c]; }
};

/// Quadrant classification of the cells in `range`; grid cell (r, c) is
/// device cell (r, c), so the grid must be anchored to the device.
BitMatrix extract_sram_word(const ResponseMap& map, const CellGrid& grid, const CellRange& range,
                            Diagonal polarity, double corner_fraction = 0.3);

}  // namespace tlsbench
