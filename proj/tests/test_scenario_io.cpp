#include <cmath>
#include <fstream>
#include <iterator>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "tlsbench/errors.hpp"
#include "tlsbench/map_io.hpp"
#include "tlsbench/scenario.hpp"

using namespace tlsbench;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tlsbench_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Scenario parse(const std::string& text) { return parse_scenario(text, scenario_dir()); }

ResponseMap random_map(std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(-3e-9, 5e-9);
  ResponseMap m = ResponseMap::blank(37, 23, 0.25, {12.5, -4.0});
  for (auto& v : m.values) v = u(g);
  m.meta.scenario = "s";
  m.meta.state = "on";
  m.meta.plan_name = "p";
  m.meta.seed = 18446744073709551557ull;
  m.meta.stream_seed = 42;
  m.meta.line_timestamps_s = {0.2, 1.3, 2.4};
  m.meta.refocus_lines = {2};
  m.meta.samples_per_pixel = 7;
  return m;
}

}  // namespace

TEST_CASE("shipped scenarios load and validate") {
  for (const char* name : {"bbram_key.json", "bbram_localization.json", "bbram_single_bit.json",
                           "msp430_overview.json", "msp430_single_bit.json"}) {
    CAPTURE(name);
    const Scenario sc = load_scenario(scenario_dir() / name);
    CHECK_NOTHROW(sc.validate());
    CHECK(sc.state_names().front() == "default");
    CHECK(!sc.plans.empty());
    for (const auto& state : sc.state_names()) CHECK_NOTHROW(sc.scene(state));
  }
  const Scenario bb = load_scenario(scenario_dir() / "bbram_key.json");
  CHECK(bb.device.rows == 9);
  CHECK(bb.device.cols == 32);
  CHECK(bb.device.polarity == Diagonal::TL_BR);
  CHECK(bb.metadata_word == 0xa5c30f5aull);
  REQUIRE(bb.mapping.has_value());
  CHECK(bb.mapping->index_at(7, 0) == 255);
  CHECK(bb.mapping->is_metadata_row(8));
  const Scenario msp = load_scenario(scenario_dir() / "msp430_overview.json");
  CHECK(msp.device.rows == 64);
  CHECK(msp.device.cols == 128);
  CHECK(msp.device.polarity == Diagonal::BL_TR);
  CHECK(msp.device.block_boundaries.size() == 3);
}

TEST_CASE("states overlay the base contents") {
  const Scenario sc = load_scenario(scenario_dir() / "bbram_key.json");
  CHECK(sc.loaded_key("default") == sc.loaded_key("countermeasure"));
  CHECK(sc.loaded_key("reference") == Key256{});
  CHECK(sc.resolved_contents("countermeasure").injected_noise_rms_A.value() == doctest::Approx(2e-8));
  CHECK(!sc.resolved_contents("default").injected_noise_rms_A.has_value());

  const Scenario sb = load_scenario(scenario_dir() / "bbram_single_bit.json");
  CHECK(sb.resolved_contents("default").set_bits.size() == 1);
  CHECK(sb.resolved_contents("zero").set_bits.empty());
  CHECK(sb.scene("default").device.bit(4, 15) == 1);
  CHECK(sb.scene("zero").device.bit(4, 15) == 0);
  CHECK(sb.scene("default").device.sensitivity == sb.scene("zero").device.sensitivity);
  CHECK_THROWS_AS(sb.scene("missing"), ConfigError);
}

TEST_CASE("stream seeds separate plans and states") {
  const auto a = Scenario::stream_seed_for(1, "p", "default");
  CHECK(a == Scenario::stream_seed_for(1, "p", "default"));
  CHECK(a != Scenario::stream_seed_for(1, "p", "off"));
  CHECK(a != Scenario::stream_seed_for(1, "q", "default"));
  CHECK(a != Scenario::stream_seed_for(2, "p", "default"));
}

TEST_CASE("scenario errors are configuration errors") {
  const std::string base = R"("base": "devices/bbram.json", "name": "t", "seed": 1)";
  CHECK_NOTHROW(parse("{" + base + "}"));
  CHECK_THROWS_AS(parse("{" + base + R"(, "colour": 1})"), ConfigError);
  CHECK_THROWS_AS(parse("{" + base + R"(, "device": {"polarity": "diagonal"}})"), ConfigError);
  CHECK_THROWS_AS(parse("{" + base + R"(, "states": {"default": {}}})"), ConfigError);
  CHECK_THROWS_AS(parse("{" + base + R"(, "contents": {"set_bits": [[9, 0, 1]]}})").scene(), ConfigError);
  CHECK_THROWS_AS(parse("{" + base + R"(, "mapping": null, "contents": {"key": "0x1"}})").scene(), ConfigError);
  CHECK_THROWS_AS(parse("{" + base + R"(, "contents": {"key": "0xzz"}})"), ConfigError);
  CHECK_THROWS_AS(parse(R"({"base": "devices/none.json"})"), ConfigError);
  CHECK_THROWS_AS(parse("{not json"), ConfigError);
  CHECK_THROWS_AS(load_scenario(scenario_dir() / "absent.json"), ConfigError);
  try {
    parse("{" + base + "}").plan("nope");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("bbram_full") != std::string::npos);
  }
}

TEST_CASE("plan regions in three forms") {
  const std::string base = R"({"base": "devices/bbram.json", "name": "t", "seed": 1, "plans": {)";
  const std::string tail = R"(, "pixel_pitch_um": 0.5, "stage_speed_um_s": 50, "samples_per_pixel": 4}}})";
  const Scenario a = parse(base + R"("p": {"region_um": [1, 2, 11, 22])" + tail);
  CHECK(a.plan("p").region == Rect{1, 2, 11, 22});
  CHECK(a.plan("p").name == "p");
  const Scenario b = parse(base + R"("p": {"region_um": {"footprint": true, "margin_um": 2})" + tail);
  CHECK(b.plan("p").region == b.device.footprint().expanded(2.0));
  const Scenario c = parse(base + R"("p": {"region_um": {"cells": {"rows": [1, 2], "cols": [3, 5]}, "margin_um": 0.5})" + tail);
  const Rect lo = cell_rect(c.device, 1, 3), hi = cell_rect(c.device, 2, 5);
  CHECK(c.plan("p").region == Rect{lo.x0 - 0.5, lo.y0 - 0.5, hi.x1 + 0.5, hi.y1 + 0.5});
  CHECK_THROWS_AS(parse(base + R"("p": {"region_um": {"cells": {"rows": [1, 20], "cols": [3, 5]}})" + tail),
                  ConfigError);
  CHECK_THROWS_AS(parse(base + R"("p": {"region_um": [1, 2, 3]})" + tail), ConfigError);
}

TEST_CASE("table mappings") {
  const std::string base = R"({"base": "devices/bbram.json", "name": "t", "seed": 1, "mapping": )";
  std::string entries;
  for (int i = 0; i < 256; ++i) {
    entries += (i ? "," : "") + ("[" + std::to_string(i / 32) + "," + std::to_string(i % 32) + "," +
                                  std::to_string(i) + "]");
  }
  const Scenario sc = parse(base + R"({"layout": "table", "rows": 9, "cols": 32, "metadata_rows": [8], "entries": [)" +
                            entries + "]}}");
  CHECK(sc.mapping->index_at(0, 0) == 0);
  CHECK(sc.mapping->index_at(7, 31) == 255);
  const std::string dup = entries + ",[0,0,3]";
  CHECK_THROWS_AS(parse(base + R"({"layout": "table", "rows": 9, "cols": 32, "metadata_rows": [8], "entries": [)" +
                        dup + "]}}"),
                  ConfigError);
  CHECK_THROWS_AS(parse(base + R"({"layout": "spiral", "rows": 9, "cols": 32})" + "}"), ConfigError);
}

TEST_CASE("map files round-trip within one step") {
  const fs::path dir = scratch("roundtrip");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ResponseMap m = random_map(seed);
    const fs::path pgm = dir / "m.pgm";
    const fs::path side = save_map(m, pgm);
    CHECK(side == sidecar_path(pgm));
    CHECK(fs::exists(side));
    for (const fs::path& p : {pgm, side}) {
      const ResponseMap back = load_map(p);
      REQUIRE(back.same_geometry(m));
      double lo = m.values[0], hi = m.values[0];
      for (double v : m.values) lo = std::min(lo, v), hi = std::max(hi, v);
      const double step = (hi - lo) / 65535.0;
      for (std::size_t i = 0; i < m.values.size(); ++i) CHECK(std::abs(back.values[i] - m.values[i]) <= step);
      CHECK(back.meta.seed == m.meta.seed);
      CHECK(back.meta.stream_seed == m.meta.stream_seed);
      CHECK(back.meta.scenario == "s");
      CHECK(back.meta.state == "on");
      CHECK(back.meta.line_timestamps_s == m.meta.line_timestamps_s);
      CHECK(back.meta.refocus_lines == m.meta.refocus_lines);
      CHECK(back.meta.samples_per_pixel == 7);
    }
  }
}

TEST_CASE("PGM raster stores the highest row first") {
  const fs::path dir = scratch("raster");
  ResponseMap m = ResponseMap::blank(2, 2, 1.0, {});
  m.values = {0.0, 0.0, 1.0, 1.0};  // top row bright
  save_map(m, dir / "r.pgm");
  const std::string bytes = slurp(dir / "r.pgm");
  const std::string header = "P5\n2 2\n65535\n";
  REQUIRE(bytes.size() == header.size() + 8);
  CHECK(bytes.substr(0, header.size()) == header);
  const auto* px = reinterpret_cast<const unsigned char*>(bytes.data() + header.size());
  CHECK(px[0] == 0xff);
  CHECK(px[1] == 0xff);
  CHECK(px[4] == 0x00);
  CHECK(px[5] == 0x00);
}

TEST_CASE("constant maps and bad files") {
  const fs::path dir = scratch("edge");
  ResponseMap m = ResponseMap::blank(3, 3, 0.5, {});
  for (auto& v : m.values) v = 2e-9;
  save_map(m, dir / "c.pgm");
  for (double v : load_map(dir / "c.pgm").values) CHECK(v == doctest::Approx(2e-9));
  CHECK_THROWS_AS(load_map(dir / "missing.pgm"), ConfigError);
  std::ofstream(dir / "bad.json") << "{\"format\": \"other\"}";
  CHECK_THROWS_AS(load_map(dir / "bad.json"), ConfigError);
}

TEST_CASE("saved scans are byte-identical for equal seeds") {
  const Scenario sc = load_scenario(scenario_dir() / "bbram_single_bit.json");
  const fs::path dir = scratch("determinism");
  for (const char* sub : {"a", "b", "c"}) fs::create_directories(dir / sub);
  save_map(sc.scan("bbram_single_bit", "default", 5), dir / "a" / "m.pgm");
  save_map(sc.scan("bbram_single_bit", "default", 5, true), dir / "b" / "m.pgm");
  save_map(sc.scan("bbram_single_bit", "default", 6), dir / "c" / "m.pgm");
  for (const char* file : {"m.pgm", "m.json"}) {
    CHECK(slurp(dir / "a" / file) == slurp(dir / "b" / file));
    CHECK(slurp(dir / "a" / file) != slurp(dir / "c" / file));
  }
}

TEST_CASE("PNG output") {
  const fs::path dir = scratch("png");
  const ResponseMap m = random_map(3);
  RgbImage img = render_map(m, 1.0, 99.0, 3);
  CHECK(img.width == 3 * m.width);
  CHECK(img.height == 3 * m.height);
  draw_rect(img, m, Rect{13.0, -3.0, 16.0, 0.0}, {255, 0, 0});
  write_png(img, dir / "m.png");
  const std::string bytes = slurp(dir / "m.png");
  REQUIRE(bytes.size() > 8);
  CHECK(bytes.substr(0, 8) == std::string("\x89PNG\r\n\x1a\n", 8));
}

TEST_CASE("extraction report") {
  ExtractionReport r;
  r.key = Key256::from_hex("0x1");
  r.metadata_hex = {"0xa5c30f5a"};
  r.cells.push_back({0, 0, 0, 1, 5.0, 2.0, false});
  r.cells.push_back({0, 1, 1, 0, 0.1, 0.1, true});
  r.cells.push_back({8, 0, -1, 1, 1.0, 1.0, false});
  r.low_confidence_bits = {1};
  r.noise_rms = 3e-11;
  const json j = json::parse(report_json(r, {"target.pgm", "reference.pgm"}));
  CHECK(j.at("key") == r.key.to_hex());
  CHECK(j.at("metadata_rows").size() == 1);
  CHECK(j.at("low_confidence_count") == 1);
  CHECK(j.at("sources").size() == 2);
  const json& cls = j.at("classifier");
  CHECK(cls.at("name") == "differential");
  CHECK(cls.at("threshold") == 3.0);
  CHECK(cls.at("origin").get<std::string>().find("heuristic") != std::string::npos);
  const json& bits = j.at("bits");
  REQUIRE(bits.size() == 2);
  CHECK(bits[0].at("bit_index") == 1);
  CHECK(bits[1].at("bit_index") == 0);
  CHECK(report_json(r, {}) == report_json(r, {}));
}
