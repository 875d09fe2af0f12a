// tlsbench: scan, localize and extract from simulated TLS response maps.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "tlsbench/analysis.hpp"
#include "tlsbench/errors.hpp"
#include "tlsbench/map_io.hpp"
#include "tlsbench/optics.hpp"
#include "tlsbench/scan.hpp"
#include "tlsbench/scenario.hpp"

namespace fs = std::filesystem;
using namespace tlsbench;

namespace {

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kGeometry = 3, kFit = 4, kStage = 5 };

Scenario open_scenario(const std::string& arg) {
  fs::path p(arg);
  if (!fs::exists(p) && p.extension().empty()) p = scenario_dir() / (arg + ".json");
  return load_scenario(p);
}

CellRange parse_range(const std::string& rows, const std::string& cols) {
  auto span = [](const std::string& s, int& a, int& b) {
    const auto colon = s.find(':');
    try {
      a = std::stoi(s.substr(0, colon));
      b = colon == std::string::npos ? a : std::stoi(s.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad cell range '" + s + "' (expected first:last)");
    }
    if (b < a) throw ConfigError("bad cell range '" + s + "': last < first");
  };
  CellRange r;
  span(rows, r.row_first, r.row_last);
  span(cols, r.col_first, r.col_last);
  return r;
}

int image_scale(const ResponseMap& map) {
  const int longest = std::max(map.width, map.height);
  return std::clamp(900 / std::max(longest, 1), 1, 8);
}

void print_timing(const Scenario& sc, const ScanPlan& plan) {
  const PlanGeometry g = plan_geometry(plan);
  const double stage = stage_scan_time(plan, sc.instrument.refocus_time_s);
  std::printf("plan %s: %d x %d pixels, pitch %.3g um, dwell %.4g s, %d samples/pixel\n", plan.name.c_str(), g.nx,
              g.ny, plan.pixel_pitch_um, g.dwell_s, resolved_samples(plan, sc.instrument.digitizer));
  std::printf("simulated stage time: %.1f s (%.1f min)\n", stage, stage / 60.0);
  if (sc.galvo) {
    const SpeedupReport r = speedup_report(plan, sc.instrument.refocus_time_s, sc.galvo_model());
    std::printf("galvo-equivalent time: %.1f s (%.2f min)\n", r.galvo_s, r.galvo_s / 60.0);
    std::printf("speedup (stage / galvo): %.2f\n", r.ratio);
  }
}

int run(int argc, char** argv) {
  CLI::App app{"Thermal laser stimulation workbench"};
  app.require_subcommand(1);

  std::string scenario_arg, plan_name, state = "default", out_dir = ".", classifier = "differential";
  std::optional<std::uint64_t> seed;
  std::optional<double> threshold;

  auto* scan = app.add_subcommand("scan", "simulate a scan and write the map");
  scan->add_option("--scenario", scenario_arg, "scenario file or shipped scenario name")->required();
  scan->add_option("--plan", plan_name, "scan plan name")->required();
  scan->add_option("--state", state, "device state")->capture_default_str();
  scan->add_option("--seed", seed, "override the scenario seed");
  scan->add_option("--out", out_dir, "output directory")->capture_default_str();
  bool serial = false;
  scan->add_flag("--serial", serial, "use the serial reference engine");

  std::string on_path, off_path;
  auto* localize = app.add_subcommand("localize", "find regions that respond only when powered");
  localize->add_option("--on", on_path, "map with the memory powered")->required();
  localize->add_option("--off", off_path, "map with the memory unpowered")->required();
  localize->add_option("--threshold", threshold, "detection threshold in noise sigma (default 6)");
  localize->add_option("--out", out_dir, "output directory")->capture_default_str();

  std::string map_path, reference_path;
  auto* extract = app.add_subcommand("extract-key", "classify cells and rebuild the 256-bit key");
  extract->add_option("--map", map_path, "target map")->required();
  extract->add_option("--reference", reference_path, "all-zero reference map (differential)");
  extract->add_option("--scenario", scenario_arg, "scenario providing geometry and bit mapping")->required();
  extract->add_option("--classifier", classifier, "quadrant or differential")
      ->check(CLI::IsMember({"quadrant", "differential"}))
      ->capture_default_str();
  extract->add_option("--threshold", threshold, "differential threshold in noise sigma (default 3)");
  extract->add_option("--out", out_dir, "output directory")->capture_default_str();

  std::string rows_arg, cols_arg;
  auto* sram = app.add_subcommand("extract-sram", "read SRAM cells with the quadrant classifier");
  sram->add_option("--map", map_path, "map covering the cells")->required();
  sram->add_option("--reference", reference_path, "scan of the same region in a known state, used for the grid fit");
  sram->add_option("--scenario", scenario_arg, "scenario providing the device layout")->required();
  sram->add_option("--rows", rows_arg, "row range first:last")->required();
  sram->add_option("--cols", cols_arg, "column range first:last")->required();
  sram->add_option("--out", out_dir, "output directory")->capture_default_str();

  std::string a_path, b_path, diff_name = "difference";
  auto* diff = app.add_subcommand("diff", "subtract two maps of identical geometry");
  diff->add_option("a", a_path, "minuend map")->required();
  diff->add_option("b", b_path, "subtrahend map")->required();
  diff->add_option("--name", diff_name, "output stem")->capture_default_str();
  diff->add_option("--out", out_dir, "output directory")->capture_default_str();

  double cell_w = 0, cell_h = 0;
  OpticsConfig optics;
  bool deconvolution = false;
  auto* feas = app.add_subcommand("feasibility", "can the optics resolve a cell of this size");
  feas->add_option("--cell-w", cell_w, "cell width (um)")->required()->check(CLI::PositiveNumber);
  feas->add_option("--cell-h", cell_h, "cell height (um)")->required()->check(CLI::PositiveNumber);
  feas->add_option("--wavelength", optics.wavelength_nm, "laser wavelength (nm)")->capture_default_str();
  feas->add_option("--na", optics.numerical_aperture, "numerical aperture")->capture_default_str();
  feas->add_option("--sil", optics.sil_factor, "solid immersion lens factor")->capture_default_str();
  feas->add_flag("--deconvolution", deconvolution, "assume deconvolution");

  auto* timing = app.add_subcommand("timing", "stage and galvo acquisition time of a plan");
  timing->add_option("--scenario", scenario_arg, "scenario file or shipped scenario name")->required();
  timing->add_option("--plan", plan_name, "scan plan name (default: all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }
  const fs::path out(out_dir);

  if (*scan) {
    const Scenario sc = open_scenario(scenario_arg);
    const ScanPlan& plan = sc.plan(plan_name);
    sc.resolved_contents(state);
    print_timing(sc, plan);
    const ResponseMap map = sc.scan(plan_name, state, seed.value_or(sc.seed), serial);
    const fs::path pgm = out / (plan_name + "_" + state + ".pgm");
    const fs::path side = save_map(map, pgm);
    write_png(render_map(map, 1.0, 99.0, image_scale(map)), fs::path(pgm).replace_extension(".png"));
    std::printf("saturated pixels: %d\n", map.meta.saturated_pixels);
    std::printf("wrote %s and %s\n", pgm.string().c_str(), side.string().c_str());
    return kOk;
  }

  if (*localize) {
    const ResponseMap on = load_map(on_path);
    const ResponseMap off = load_map(off_path);
    const auto boxes = localize_candidates(on, off, threshold.value_or(6.0));
    if (boxes.empty()) {
      std::printf("no candidates\n");
    } else {
      for (std::size_t i = 0; i < boxes.size(); ++i) {
        const auto& b = boxes[i];
        std::printf("candidate %zu: [%.1f, %.1f] - [%.1f, %.1f] um, centre (%.1f, %.1f), %d px, integrated %.3g A\n",
                    i, b.area.x0, b.area.y0, b.area.x1, b.area.y1, b.area.center().x, b.area.center().y,
                    b.pixel_count, b.integrated_difference);
      }
    }
    RgbImage img = render_map(on, 1.0, 99.0, image_scale(on));
    for (const auto& b : boxes) draw_rect(img, on, b.area, {230, 30, 30});
    const fs::path png = out / "localization.png";
    write_png(img, png);
    std::printf("wrote %s\n", png.string().c_str());
    return kOk;
  }

  if (*extract) {
    const Scenario sc = open_scenario(scenario_arg);
    if (!sc.mapping) throw ConfigError("scenario '" + sc.name + "' has no bit mapping");
    const ResponseMap target = load_map(map_path);
    std::optional<ResponseMap> reference;
    if (!reference_path.empty()) reference = load_map(reference_path);

    ExtractionSettings settings;
    settings.classifier = parse_classifier(classifier);
    settings.polarity = sc.device.polarity;
    if (threshold) settings.threshold = *threshold;

    const ResponseMap& fit_source = reference ? *reference : target;
    CellGrid grid = fit_grid(fit_source, sc.device.geometry);
    if (grid.rows != sc.mapping->rows || grid.cols != sc.mapping->cols) {
      std::printf("fitted grid covers %d x %d cells; anchoring to the %d x %d layout\n", grid.rows, grid.cols,
                  sc.device.rows, sc.device.cols);
      grid = anchor_to_device(grid, sc.device, 0, 0);
    }
    const ExtractionReport report =
        extract_key(target, reference ? &*reference : nullptr, grid, *sc.mapping, settings);

    std::vector<std::string> sources{map_path};
    if (reference) sources.push_back(reference_path);
    const fs::path json_path = out / "extraction_report.json";
    write_text(json_path, report_json(report, sources));
    const ResponseMap& shown = target;
    RgbImage img = render_map(shown, 1.0, 99.0, image_scale(shown));
    draw_grid(img, shown, report.grid, report.cells);
    write_png(img, out / "extraction_grid.png");

    std::printf("classifier: %s (threshold %.3g)\n", classifier_name(settings.classifier), settings.threshold);
    std::printf("grid: origin (%.3f, %.3f) um, pitch %.4f x %.4f um, %d x %d cells\n", report.grid.origin.x,
                report.grid.origin.y, report.grid.pitch_x, report.grid.pitch_y, report.grid.rows, report.grid.cols);
    for (std::size_t i = 0; i < report.metadata_hex.size(); ++i) {
      std::printf("metadata row %d: %s\n", sc.mapping->metadata_rows[i], report.metadata_hex[i].c_str());
    }
    std::printf("low-confidence bits: %zu of 256\n", report.low_confidence_bits.size());
    std::printf("key: %s\n", report.key.to_hex().c_str());
    std::printf("wrote %s\n", json_path.string().c_str());
    return kOk;
  }

  if (*sram) {
    const Scenario sc = open_scenario(scenario_arg);
    const CellRange range = parse_range(rows_arg, cols_arg);
    const ResponseMap map = load_map(map_path);
    ResponseMap fit_source = map;
    if (!reference_path.empty()) {
      fit_source = load_map(reference_path);
      if (!fit_source.same_geometry(map)) throw GeometryError("reference and target maps differ in scan geometry");
    }
    const CellGrid grid = anchor_to_device(fit_grid(fit_source, sc.device.geometry), sc.device, range.row_first,
                                           range.col_first);
    const BitMatrix bits = extract_sram_word(map, grid, range, sc.device.polarity);
    std::string text;
    for (int r = bits.rows - 1; r >= 0; --r) {
      text += "row " + std::to_string(range.row_first + r) + ": ";
      for (int c = 0; c < bits.cols; ++c) text += static_cast<char>('0' + bits.at(r, c));
      text += "\n";
    }
    std::fputs(text.c_str(), stdout);
    const fs::path path = out / "sram_word.txt";
    write_text(path, text);
    std::printf("wrote %s\n", path.string().c_str());
    return kOk;
  }

  if (*diff) {
    const ResponseMap d = subtract_maps(load_map(a_path), load_map(b_path));
    const fs::path pgm = out / (diff_name + ".pgm");
    save_map(d, pgm);
    write_png(render_map(d, 1.0, 99.0, image_scale(d)), fs::path(pgm).replace_extension(".png"));
    std::printf("difference noise rms: %.3g A\nwrote %s\n", robust_noise_rms(d), pgm.string().c_str());
    return kOk;
  }

  if (*feas) {
    optics.validate();
    const SpotProfile spot = spot_from_optics(optics);
    const double cell = std::min(cell_w, cell_h);
    std::printf("spot fwhm: %.4f um (%.0f nm)\n", spot.fwhm_diameter, spot.fwhm_diameter * 1e3);
    for (bool dc : {false, true}) {
      const Feasibility f = feasibility(cell, spot, dc);
      std::printf("required cell size%s: %.4f um\n", dc ? " with deconvolution" : "", f.required_min_um);
    }
    const Feasibility f = feasibility(cell, spot, deconvolution);
    std::printf("verdict for %.3g x %.3g um cells%s: %s (margin %.3f)\n", cell_w, cell_h,
                deconvolution ? " with deconvolution" : "",
                f.verdict == Verdict::Feasible ? "feasible" : "infeasible", f.margin);
    return kOk;
  }

  if (*timing) {
    const Scenario sc = open_scenario(scenario_arg);
    if (!plan_name.empty()) {
      print_timing(sc, sc.plan(plan_name));
    } else {
      for (const auto& [name, plan] : sc.plans) print_timing(sc, plan);
    }
    return kOk;
  }
  return kOther;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kConfig;
  } catch (const GeometryError& e) {
    std::fprintf(stderr, "geometry error: %s\n", e.what());
    return kGeometry;
  } catch (const FitError& e) {
    std::fprintf(stderr, "grid fit failed: %s\n", e.what());
    return kFit;
  } catch (const StageFault& e) {
    std::fprintf(stderr, "stage fault: %s\n", e.what());
    return kStage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kOther;
  }
}
