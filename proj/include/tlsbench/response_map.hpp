#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tlsbench/geometry.hpp"

namespace tlsbench {

enum class FastAxis { Vertical, Horizontal };

struct ScanPlan;

struct MapMetadata {
  std::string kind = "scan";  // "scan" or "difference"
  std::string scenario;
  std::string state;
  std::string plan_name;
  std::uint64_t seed = 0;         // base seed
  std::uint64_t stream_seed = 0;  // seed actually used for pixel streams
  FastAxis fast_axis = FastAxis::Vertical;
  bool serpentine = false;
  int samples_per_pixel = 0;
  double dwell_s = 0.0;
  double stage_time_s = 0.0;
  std::vector<double> line_timestamps_s;  // start of each line, acquisition order
  std::vector<int> refocus_lines;         // lines preceded by a refocus
  int saturated_pixels = 0;
  std::vector<std::string> parents;       // for difference maps: "a", "b"
};

/// Currents in amperes on a regular grid. Pixel (ix, iy) is centred at
/// origin + ((ix + 0.5) * pitch, (iy + 0.5) * pitch); iy grows with y.
struct ResponseMap {
  int width = 0;
  int height = 0;
  double pixel_pitch_um = 0.0;
  Vec2 origin;
  std::vector<double> values;  // row-major, iy * width + ix
  MapMetadata meta;

  static ResponseMap blank(int width, int height, double pitch, Vec2 origin);

  std::size_t size() const { return values.size(); }
  double at(int ix, int iy) const { return values[static_cast<std::size_t>(iy) * width + ix]; }
  double& at(int ix, int iy) { return values[static_cast<std::size_t>(iy) * width + ix]; }

  Vec2 pixel_center(int ix, int iy) const {
    return {origin.x + (ix + 0.5) * pixel_pitch_um, origin.y + (iy + 0.5) * pixel_pitch_um};
  }
  Rect extent() const {
    return {origin.x, origin.y, origin.x + width * pixel_pitch_um, origin.y + height * pixel_pitch_um};
  }

  /// Bilinear interpolation between pixel centres, clamped at the border.
  double sample(Vec2 pos) const;

  bool same_geometry(const ResponseMap& other) const {
    return width == other.width && height == other.height && pixel_pitch_um == other.pixel_pitch_um &&
           origin == other.origin;
  }
};

}  // namespace tlsbench
