#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tlsbench/geometry.hpp"
#include "tlsbench/instrument.hpp"
#include "tlsbench/response_map.hpp"

namespace tlsbench {

struct ScanPlan {
  std::string name;
  Rect region;  // um
  double pixel_pitch_um = 0.25;
  double stage_speed_um_s = 50.0;
  /// 0 fills the pixel dwell at the digitizer sample rate.
  int samples_per_pixel = 0;
  FastAxis fast_axis = FastAxis::Vertical;  // bottom-to-top lines, stepped left-to-right
  bool serpentine = false;
  double turnaround_s = 0.2;
  /// Refocus before every n-th line (0 = never).
  int refocus_every_n_lines = 0;
  bool motion_blur = false;

  void validate() const;
  /// Adds the checks that need the instrument: travel limits, step
  /// resolution, speed limit and digitizer throughput.
  void validate(const Instrument& instrument) const;
};

struct PlanGeometry {
  int nx = 0;
  int ny = 0;
  int n_lines = 0;  // slow-axis pixel count
  int n_fast = 0;   // pixels per line
  double dwell_s = 0.0;
  double line_time_s = 0.0;  // n_fast * dwell
  std::size_t total_pixels() const { return static_cast<std::size_t>(nx) * ny; }
};

/// Pixel counts are ceil(extent / pitch), at least 1.
PlanGeometry plan_geometry(const ScanPlan& plan);

/// Samples per pixel after resolving 0 to "fill the dwell".
int resolved_samples(const ScanPlan& plan, const DigitizerModel& digitizer);

/// Deterministic acquisition schedule. Before line k: an optional refocus,
/// then a turnaround; pixels are stamped at mid-dwell.
struct Timeline {
  std::vector<double> line_start_s;
  std::vector<double> line_focus_s;  // time of the last refocus seen by each line
  std::vector<int> refocus_lines;
  double dwell_s = 0.0;
  double total_s = 0.0;

  /// j is the position along the line in acquisition order.
  double pixel_time(int line, int j) const { return line_start_s[line] + (j + 0.5) * dwell_s; }
};

Timeline build_timeline(const ScanPlan& plan, const Instrument& instrument);

/// n_lines * (line_length / speed + turnaround) + refocus overhead.
/// Throws ConfigError for a non-positive speed.
double stage_scan_time(const ScanPlan& plan, double refocus_time_s);

/// total_pixels * dwell + n_lines * line_overhead.
double galvo_scan_time(const ScanPlan& plan, double dwell_per_pixel_s, double line_overhead_s);

/// Galvo dwell such that `plan` takes `target_s` on a galvo scanner.
double calibrate_galvo_dwell(const ScanPlan& plan, double target_s, double line_overhead_s);

struct GalvoModel {
  double dwell_per_pixel_s = 0.0;
  double line_overhead_s = 0.0;
};

struct SpeedupReport {
  double stage_s = 0.0;
  double galvo_s = 0.0;
  double ratio = 0.0;  // stage / galvo
};

SpeedupReport speedup_report(const ScanPlan& plan, double refocus_time_s, const GalvoModel& galvo);

/// Raster scan with per-pixel RNG streams keyed by pixel index. Lines are
/// evaluated in parallel (OpenMP) from the precomputed timeline; the result
/// does not depend on thread count or schedule.
/// Throws PlanningError before measuring anything if the plan is invalid.
ResponseMap execute_scan(const Scene& scene, const Instrument& instrument, const ScanPlan& plan,
                         std::uint64_t seed);

/// Serial version walking pixels in acquisition order with an explicit
/// InstrumentState. Produces maps bit-identical to execute_scan.
ResponseMap execute_scan_reference(const Scene& scene, const Instrument& instrument, const ScanPlan& plan,
                                   std::uint64_t seed);

}  // namespace tlsbench
