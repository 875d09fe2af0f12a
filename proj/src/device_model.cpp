#include "tlsbench/device_model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "tlsbench/errors.hpp"
#include "tlsbench/rng.hpp"

namespace tlsbench {

CellGeometry CellGeometry::corner_inset(double width, double height, double inset) {
  CellGeometry g;
  g.width = width;
  g.height = height;
  const double lx = inset * width, hx = (1.0 - inset) * width;
  const double ly = inset * height, hy = (1.0 - inset) * height;
  g.site_offsets[static_cast<int>(Site::NmosLeft)] = {lx, ly};
  g.site_offsets[static_cast<int>(Site::PmosRight)] = {hx, hy};
  g.site_offsets[static_cast<int>(Site::NmosRight)] = {hx, ly};
  g.site_offsets[static_cast<int>(Site::PmosLeft)] = {lx, hy};
  return g;
}

void CellGeometry::validate() const {
  if (!(width > 0.0) || !(height > 0.0)) throw ConfigError("cell width and height must be positive");
  for (const auto& s : site_offsets) {
    if (s.x < 0.0 || s.x > width || s.y < 0.0 || s.y > height) {
      throw ConfigError("sensitive site offset lies outside the cell rectangle");
    }
  }
}

Diagonal opposite(Diagonal d) { return d == Diagonal::TL_BR ? Diagonal::BL_TR : Diagonal::TL_BR; }

std::array<Site, 2> diagonal_sites(Diagonal d) {
  if (d == Diagonal::TL_BR) return {Site::PmosLeft, Site::NmosRight};
  return {Site::NmosLeft, Site::PmosRight};
}

MemoryArrayModel MemoryArrayModel::make(int rows, int cols, CellGeometry geometry, Diagonal polarity,
                                        Vec2 origin, std::vector<BlockBoundary> blocks) {
  MemoryArrayModel m;
  m.rows = rows;
  m.cols = cols;
  m.geometry = geometry;
  m.polarity = polarity;
  m.origin = origin;
  m.block_boundaries = std::move(blocks);
  const auto n = static_cast<std::size_t>(std::max(rows, 0)) * static_cast<std::size_t>(std::max(cols, 0));
  m.bits.assign(n, 0);
  m.sensitivity.assign(n, 1.0);
  return m;
}

double MemoryArrayModel::block_offset(int c) const {
  double off = 0.0;
  for (const auto& b : block_boundaries) {
    if (c >= b.start_col) off += b.offset;
  }
  return off;
}

double MemoryArrayModel::total_block_offset() const {
  double off = 0.0;
  for (const auto& b : block_boundaries) off += b.offset;
  return off;
}

Rect MemoryArrayModel::footprint() const {
  return {origin.x, origin.y, origin.x + cols * geometry.width + block_offset(cols - 1),
          origin.y + rows * geometry.height};
}

void MemoryArrayModel::validate() const {
  if (rows <= 0 || cols <= 0) throw ConfigError("memory array needs at least one row and column");
  geometry.validate();
  const auto n = static_cast<std::size_t>(rows) * cols;
  if (bits.size() != n || sensitivity.size() != n) throw ConfigError("bits/sensitivity size mismatch");
  for (auto b : bits) {
    if (b > 1) throw ConfigError("bits entries must be 0 or 1");
  }
  for (double s : sensitivity) {
    if (!(s > 0.0)) throw ConfigError("sensitivity variation entries must be positive");
  }
  for (const auto& b : block_boundaries) {
    if (b.start_col <= 0 || b.start_col >= cols) throw ConfigError("block boundary column out of range");
    if (b.offset < 0.0) throw ConfigError("block offsets must be non-negative");
  }
  for (const auto& d : distractors) {
    if (!(d.area.width() > 0.0) || !(d.area.height() > 0.0)) throw ConfigError("empty distractor rectangle");
    if (d.amplitude < 0.0) throw ConfigError("distractor amplitude must be non-negative");
  }
}

void apply_sensitivity_variation(MemoryArrayModel& model, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw ConfigError("sensitivity sigma must be non-negative");
  SplitMix64 engine(stream_seed(seed, 0x5e45));
  std::lognormal_distribution<double> dist(0.0, sigma);
  for (auto& s : model.sensitivity) s = sigma > 0.0 ? dist(engine) : 1.0;
}

namespace {

void check_index(const MemoryArrayModel& m, int r, int c) {
  if (r < 0 || r >= m.rows || c < 0 || c >= m.cols) {
    throw std::out_of_range("cell (" + std::to_string(r) + "," + std::to_string(c) + ") outside " +
                            std::to_string(m.rows) + "x" + std::to_string(m.cols) + " array");
  }
}

}  // namespace

Vec2 cell_position(const MemoryArrayModel& model, int r, int c) {
  check_index(model, r, c);
  return {model.origin.x + c * model.geometry.width + model.block_offset(c),
          model.origin.y + r * model.geometry.height};
}

Rect cell_rect(const MemoryArrayModel& model, int r, int c) {
  const Vec2 p = cell_position(model, r, c);
  return {p.x, p.y, p.x + model.geometry.width, p.y + model.geometry.height};
}

SitePair sensitive_sites(const MemoryArrayModel& model, int r, int c) {
  const Vec2 p = cell_position(model, r, c);
  const Diagonal d = model.bit(r, c) ? model.polarity : opposite(model.polarity);
  const auto sites = diagonal_sites(d);
  return {{p + model.geometry.site(sites[0]), p + model.geometry.site(sites[1])},
          model.sensitivity[model.index(r, c)]};
}

CellSpan cells_near(const MemoryArrayModel& m, const Rect& w) {
  const double cw = m.geometry.width, ch = m.geometry.height;
  CellSpan s;
  // Offsets are non-negative, so a cell's x lies in [ox + c*w, ox + c*w + total].
  s.col_first = std::max(0, static_cast<int>(std::floor((w.x0 - m.origin.x - m.total_block_offset() - cw) / cw)));
  s.col_last = std::min(m.cols - 1, static_cast<int>(std::floor((w.x1 - m.origin.x) / cw)));
  s.row_first = std::max(0, static_cast<int>(std::floor((w.y0 - m.origin.y - ch) / ch)));
  s.row_last = std::min(m.rows - 1, static_cast<int>(std::floor((w.y1 - m.origin.y) / ch)));
  return s;
}

MemoryArrayModel load_key(MemoryArrayModel model, const Key256& key, const BitMapping& mapping,
                          std::uint64_t metadata_word) {
  mapping.validate(model.rows, model.cols);
  for (const auto& e : mapping.entries) model.set_bit(e.row, e.col, key.bit(e.bit_index));
  for (int r : mapping.metadata_rows) {
    if (r < 0 || r >= model.rows) throw ConfigError("metadata row outside the cell grid");
    for (int c = 0; c < model.cols; ++c) {
      const int shift = model.cols - 1 - c;
      model.set_bit(r, c, shift < 64 ? static_cast<int>((metadata_word >> shift) & 1u) : 0);
    }
  }
  return model;
}

Key256 decode_key(const MemoryArrayModel& model, const BitMapping& mapping) {
  mapping.validate(model.rows, model.cols);
  Key256 key;
  for (const auto& e : mapping.entries) key.set_bit(e.bit_index, model.bit(e.row, e.col) != 0);
  return key;
}

double DeviceElectrical::noise_rms() const {
  const double mode_noise = mode == PowerMode::Active ? baseline_noise_rms : lowpower_noise_rms;
  return std::sqrt(mode_noise * mode_noise + injected_noise_rms * injected_noise_rms);
}

void DeviceElectrical::validate() const {
  if (baseline_noise_rms < 0.0 || lowpower_noise_rms < 0.0 || injected_noise_rms < 0.0) {
    throw ConfigError("noise levels must be non-negative");
  }
  if (lowpower_noise_rms > baseline_noise_rms) {
    throw ConfigError("low-power noise must not exceed active-mode noise");
  }
}

}  // namespace tlsbench
