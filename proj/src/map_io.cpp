#include "tlsbench/map_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include "json.hpp"
#include "tlsbench/errors.hpp"

namespace tlsbench {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kMaxCode = 65535.0;

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

json meta_to_json(const MapMetadata& m) {
  return {{"kind", m.kind},
          {"scenario", m.scenario},
          {"state", m.state},
          {"plan", m.plan_name},
          {"seed", m.seed},
          {"stream_seed", m.stream_seed},
          {"fast_axis", m.fast_axis == FastAxis::Vertical ? "vertical" : "horizontal"},
          {"serpentine", m.serpentine},
          {"samples_per_pixel", m.samples_per_pixel},
          {"dwell_s", m.dwell_s},
          {"stage_time_s", m.stage_time_s},
          {"line_timestamps_s", m.line_timestamps_s},
          {"refocus_lines", m.refocus_lines},
          {"saturated_pixels", m.saturated_pixels},
          {"parents", m.parents}};
}

MapMetadata meta_from_json(const json& j) {
  MapMetadata m;
  m.kind = j.value("kind", m.kind);
  m.scenario = j.value("scenario", "");
  m.state = j.value("state", "");
  m.plan_name = j.value("plan", "");
  m.seed = j.value("seed", std::uint64_t{0});
  m.stream_seed = j.value("stream_seed", std::uint64_t{0});
  m.fast_axis = j.value("fast_axis", "vertical") == "horizontal" ? FastAxis::Horizontal : FastAxis::Vertical;
  m.serpentine = j.value("serpentine", false);
  m.samples_per_pixel = j.value("samples_per_pixel", 0);
  m.dwell_s = j.value("dwell_s", 0.0);
  m.stage_time_s = j.value("stage_time_s", 0.0);
  m.line_timestamps_s = j.value("line_timestamps_s", std::vector<double>{});
  m.refocus_lines = j.value("refocus_lines", std::vector<int>{});
  m.saturated_pixels = j.value("saturated_pixels", 0);
  m.parents = j.value("parents", std::vector<std::string>{});
  return m;
}

}  // namespace

fs::path sidecar_path(const fs::path& pgm_path) {
  fs::path p = pgm_path;
  return p.replace_extension(".json");
}

fs::path save_map(const ResponseMap& map, const fs::path& pgm_path) {
  if (map.values.empty()) throw GeometryError("cannot save an empty map");
  const auto [lo_it, hi_it] = std::minmax_element(map.values.begin(), map.values.end());
  const double lo = *lo_it, hi = *hi_it;
  const double span = hi - lo;

  ensure_parent(pgm_path);
  std::ofstream out(pgm_path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + pgm_path.string());
  out << "P5\n" << map.width << " " << map.height << "\n65535\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(map.width) * 2);
  for (int iy = map.height - 1; iy >= 0; --iy) {
    for (int ix = 0; ix < map.width; ++ix) {
      const double v = span > 0.0 ? (map.at(ix, iy) - lo) / span * kMaxCode : 0.0;
      const auto code = static_cast<std::uint16_t>(std::clamp(std::lround(v), 0L, 65535L));
      row[2 * ix] = static_cast<unsigned char>(code >> 8);
      row[2 * ix + 1] = static_cast<unsigned char>(code & 0xff);
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw ConfigError("write failed: " + pgm_path.string());

  const json side = {{"format", "tlsbench-map"},
                     {"version", 1},
                     {"raster", pgm_path.filename().string()},
                     {"width", map.width},
                     {"height", map.height},
                     {"pixel_pitch_um", map.pixel_pitch_um},
                     {"origin_um", {map.origin.x, map.origin.y}},
                     {"current_min_A", lo},
                     {"current_max_A", hi},
                     {"metadata", meta_to_json(map.meta)}};
  const fs::path sp = sidecar_path(pgm_path);
  write_text(sp, side.dump(2) + "\n");
  return sp;
}

ResponseMap load_map(const fs::path& path) {
  const fs::path sp = sidecar_path(path);
  std::ifstream sin(sp);
  if (!sin) throw ConfigError("missing map sidecar " + sp.string());
  json side;
  try {
    side = json::parse(sin);
  } catch (const json::exception& e) {
    throw ConfigError(sp.string() + ": " + e.what());
  }
  if (side.value("format", "") != "tlsbench-map") throw ConfigError(sp.string() + ": not a map sidecar");

  ResponseMap map;
  try {
    map = ResponseMap::blank(side.at("width").get<int>(), side.at("height").get<int>(),
                             side.at("pixel_pitch_um").get<double>(),
                             {side.at("origin_um").at(0).get<double>(), side.at("origin_um").at(1).get<double>()});
    map.meta = meta_from_json(side.value("metadata", json::object()));
  } catch (const json::exception& e) {
    throw ConfigError(sp.string() + ": " + e.what());
  }
  const double lo = side.at("current_min_A").get<double>();
  const double hi = side.at("current_max_A").get<double>();

  const fs::path raster = sp.parent_path() / side.value("raster", path.filename().string());
  std::ifstream in(raster, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + raster.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  in.get();
  if (magic != "P5" || w != map.width || h != map.height || maxval != 65535) {
    throw ConfigError(raster.string() + ": raster header does not match its sidecar");
  }
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * 2);
  for (int iy = h - 1; iy >= 0; --iy) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (!in) throw ConfigError(raster.string() + ": truncated raster");
    for (int ix = 0; ix < w; ++ix) {
      const int code = (row[2 * ix] << 8) | row[2 * ix + 1];
      map.at(ix, iy) = lo + code / kMaxCode * (hi - lo);
    }
  }
  return map;
}

RgbImage render_map(const ResponseMap& map, double low_pct, double high_pct, int scale) {
  const GrayscaleMap g = encode_grayscale(map, low_pct, high_pct);
  RgbImage img;
  img.scale = std::max(1, scale);
  img.width = map.width * img.scale;
  img.height = map.height * img.scale;
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  for (int y = 0; y < img.height; ++y) {
    const int iy = map.height - 1 - y / img.scale;
    for (int x = 0; x < img.width; ++x) {
      const auto v = static_cast<std::uint8_t>(std::lround(255.0 * g.intensity[static_cast<std::size_t>(iy) * map.width + x / img.scale]));
      img.pixels[static_cast<std::size_t>(y) * img.width + x] = {v, v, v};
    }
  }
  return img;
}

namespace {

// um -> image pixel coordinates (x right, y down).
double to_px(const RgbImage& img, const ResponseMap& map, double x_um) {
  return (x_um - map.origin.x) / map.pixel_pitch_um * img.scale;
}
double to_py(const RgbImage& img, const ResponseMap& map, double y_um) {
  return img.height - (y_um - map.origin.y) / map.pixel_pitch_um * img.scale;
}

}  // namespace

void draw_rect(RgbImage& img, const ResponseMap& map, const Rect& area, Rgb color) {
  const int x0 = static_cast<int>(std::floor(to_px(img, map, area.x0)));
  const int x1 = static_cast<int>(std::ceil(to_px(img, map, area.x1))) - 1;
  const int y0 = static_cast<int>(std::floor(to_py(img, map, area.y1)));
  const int y1 = static_cast<int>(std::ceil(to_py(img, map, area.y0))) - 1;
  for (int x = x0; x <= x1; ++x) {
    img.set(x, y0, color);
    img.set(x, y1, color);
  }
  for (int y = y0; y <= y1; ++y) {
    img.set(x0, y, color);
    img.set(x1, y, color);
  }
}

void draw_grid(RgbImage& img, const ResponseMap& map, const CellGrid& grid, const std::vector<CellDecision>& cells) {
  constexpr Rgb kLine{0, 170, 0}, kOne{230, 30, 30}, kZero{40, 90, 230}, kUnsure{240, 220, 0};
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) draw_rect(img, map, grid.cell_rect(r, c), kLine);
  }
  for (const auto& d : cells) {
    const Vec2 centre = grid.cell_rect(d.row, d.col).center();
    const Rgb color = d.low_confidence ? kUnsure : (d.bit ? kOne : kZero);
    const int cx = static_cast<int>(to_px(img, map, centre.x));
    const int cy = static_cast<int>(to_py(img, map, centre.y));
    const int rad = std::max(1, img.scale / 2);
    for (int dy = -rad; dy <= rad; ++dy) {
      for (int dx = -rad; dx <= rad; ++dx) img.set(cx + dx, cy + dy, color);
    }
  }
}

void write_png(const RgbImage& img, const fs::path& path) {
  ensure_parent(path);
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw ConfigError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw ConfigError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ConfigError("PNG encoding failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) {
    auto* row = reinterpret_cast<png_bytep>(const_cast<Rgb*>(img.pixels.data() + static_cast<std::size_t>(y) * img.width));
    png_write_row(png, row);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::string report_json(const ExtractionReport& report, const std::vector<std::string>& sources) {
  const auto& s = report.settings;
  json bits = json::array();
  std::vector<const CellDecision*> mapped;
  for (const auto& d : report.cells) {
    if (d.bit_index >= 0) mapped.push_back(&d);
  }
  std::sort(mapped.begin(), mapped.end(),
            [](const CellDecision* a, const CellDecision* b) { return a->bit_index > b->bit_index; });
  for (const CellDecision* d : mapped) {
    bits.push_back({{"bit_index", d->bit_index},
                    {"row", d->row},
                    {"col", d->col},
                    {"bit", d->bit},
                    {"score", d->score},
                    {"confidence", d->confidence},
                    {"low_confidence", d->low_confidence}});
  }
  const json j = {
      {"key", report.key.to_hex()},
      {"metadata_rows", report.metadata_hex},
      {"classifier",
       {{"name", classifier_name(s.classifier)},
        {"origin", "tlsbench heuristic; not a published scoring rule"},
        {"threshold", s.threshold},
        {"confidence_floor", s.confidence_floor},
        {"polarity_one", s.polarity == Diagonal::TL_BR ? "TL_BR" : "BL_TR"},
        {"corner_fraction", s.corner_fraction},
        {"core_inset", s.core_inset}}},
      {"noise_rms_A", report.noise_rms},
      {"grid",
       {{"origin_um", {report.grid.origin.x, report.grid.origin.y}},
        {"pitch_um", {report.grid.pitch_x, report.grid.pitch_y}},
        {"rows", report.grid.rows},
        {"cols", report.grid.cols}}},
      {"low_confidence_count", report.low_confidence_bits.size()},
      {"low_confidence_bits", report.low_confidence_bits},
      {"sources", sources},
      {"bits", bits}};
  return j.dump(2) + "\n";
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("write failed: " + path.string());
}

}  // namespace tlsbench
