#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tlsbench/analysis.hpp"
#include "tlsbench/response_map.hpp"

namespace tlsbench {

/// Writes a 16-bit binary PGM (top row = highest y) and a JSON sidecar with
/// the same stem holding geometry, the current range and all metadata.
/// Returns the sidecar path.
std::filesystem::path save_map(const ResponseMap& map, const std::filesystem::path& pgm_path);

/// Inverse of save_map; currents are restored to within one 16-bit step of
/// the stored range. Accepts the .pgm or the .json path. Throws ConfigError.
ResponseMap load_map(const std::filesystem::path& path);

/// Sidecar path belonging to a PGM path.
std::filesystem::path sidecar_path(const std::filesystem::path& pgm_path);

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

/// 8-bit RGB raster; row 0 is the top of the image.
struct RgbImage {
  int width = 0;
  int height = 0;
  int scale = 1;  // image pixels per map pixel
  std::vector<Rgb> pixels;

  void set(int x, int y, Rgb c) {
    if (x >= 0 && x < width && y >= 0 && y < height) pixels[static_cast<std::size_t>(y) * width + x] = c;
  }
};

/// Grayscale rendering clipped at the given percentiles, upscaled by `scale`.
RgbImage render_map(const ResponseMap& map, double low_pct = 1.0, double high_pct = 99.0, int scale = 1);

/// Outline of a rectangle given in um.
void draw_rect(RgbImage& img, const ResponseMap& map, const Rect& area, Rgb color);

/// Cell outlines plus a centre marker per decided cell: 1 red, 0 blue,
/// low-confidence yellow.
void draw_grid(RgbImage& img, const ResponseMap& map, const CellGrid& grid, const std::vector<CellDecision>& cells);

void write_png(const RgbImage& img, const std::filesystem::path& path);

/// Structured report: hex key, metadata, per-bit table and classifier settings.
std::string report_json(const ExtractionReport& report, const std::vector<std::string>& sources);

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace tlsbench
