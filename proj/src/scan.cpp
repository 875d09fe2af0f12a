#include "tlsbench/scan.hpp"

#include <cmath>
#include <string>

#include "tlsbench/errors.hpp"
#include "tlsbench/rng.hpp"

namespace tlsbench {

namespace {

int pixel_count(double extent, double pitch) {
  // Guard against extents that are an exact multiple of the pitch up to rounding.
  return std::max(1, static_cast<int>(std::ceil(extent / pitch - 1e-9)));
}

}  // namespace

void ScanPlan::validate() const {
  if (!(region.width() > 0.0) || !(region.height() > 0.0)) {
    throw PlanningError("plan '" + name + "': empty scan region");
  }
  if (!(pixel_pitch_um > 0.0)) throw PlanningError("plan '" + name + "': pixel pitch must be positive");
  if (!(stage_speed_um_s > 0.0)) throw PlanningError("plan '" + name + "': stage speed must be positive");
  if (samples_per_pixel < 0) throw PlanningError("plan '" + name + "': negative samples per pixel");
  if (turnaround_s < 0.0) throw PlanningError("plan '" + name + "': negative turnaround time");
  if (refocus_every_n_lines < 0) throw PlanningError("plan '" + name + "': negative refocus interval");
}

void ScanPlan::validate(const Instrument& instrument) const {
  validate();
  const auto& stage = instrument.stage;
  if (pixel_pitch_um < stage.step_resolution_um) {
    throw PlanningError("plan '" + name + "': pixel pitch below the stage step resolution");
  }
  if (stage_speed_um_s > stage.max_speed_um_s) {
    throw PlanningError("plan '" + name + "': stage speed exceeds the stage maximum");
  }
  const PlanGeometry g = plan_geometry(*this);
  const Rect scanned{region.x0, region.y0, region.x0 + g.nx * pixel_pitch_um, region.y0 + g.ny * pixel_pitch_um};
  if (!stage.travel_limits.contains(scanned)) {
    throw PlanningError("plan '" + name + "': region exceeds the stage travel limits");
  }
  const int samples = resolved_samples(*this, instrument.digitizer);
  if (samples / instrument.digitizer.sample_rate_Hz > g.dwell_s * (1.0 + 1e-9)) {
    throw PlanningError("plan '" + name + "': " + std::to_string(samples) +
                        " samples per pixel do not fit the pixel dwell at the digitizer rate");
  }
}

PlanGeometry plan_geometry(const ScanPlan& plan) {
  PlanGeometry g;
  g.nx = pixel_count(plan.region.width(), plan.pixel_pitch_um);
  g.ny = pixel_count(plan.region.height(), plan.pixel_pitch_um);
  const bool vertical = plan.fast_axis == FastAxis::Vertical;
  g.n_lines = vertical ? g.nx : g.ny;
  g.n_fast = vertical ? g.ny : g.nx;
  g.dwell_s = plan.pixel_pitch_um / plan.stage_speed_um_s;
  g.line_time_s = g.n_fast * g.dwell_s;
  return g;
}

int resolved_samples(const ScanPlan& plan, const DigitizerModel& digitizer) {
  if (plan.samples_per_pixel > 0) return plan.samples_per_pixel;
  const double dwell = plan.pixel_pitch_um / plan.stage_speed_um_s;
  return std::max(1, static_cast<int>(std::floor(dwell * digitizer.sample_rate_Hz + 1e-9)));
}

Timeline build_timeline(const ScanPlan& plan, const Instrument& instrument) {
  const PlanGeometry g = plan_geometry(plan);
  Timeline tl;
  tl.dwell_s = g.dwell_s;
  tl.line_start_s.reserve(g.n_lines);
  tl.line_focus_s.reserve(g.n_lines);
  InstrumentState state;
  for (int k = 0; k < g.n_lines; ++k) {
    if (plan.refocus_every_n_lines > 0 && k > 0 && k % plan.refocus_every_n_lines == 0) {
      state = refocus(state, instrument);
      tl.refocus_lines.push_back(k);
    }
    state.clock_s += plan.turnaround_s;
    tl.line_start_s.push_back(state.clock_s);
    tl.line_focus_s.push_back(state.last_refocus_s);
    state.clock_s += g.line_time_s;
  }
  tl.total_s = state.clock_s;
  return tl;
}

double stage_scan_time(const ScanPlan& plan, double refocus_time_s) {
  if (!(plan.stage_speed_um_s > 0.0)) throw ConfigError("stage speed must be positive");
  const PlanGeometry g = plan_geometry(plan);
  const int refocuses = plan.refocus_every_n_lines > 0 ? (g.n_lines - 1) / plan.refocus_every_n_lines : 0;
  return g.n_lines * (g.line_time_s + plan.turnaround_s) + refocuses * refocus_time_s;
}

double galvo_scan_time(const ScanPlan& plan, double dwell_per_pixel_s, double line_overhead_s) {
  const PlanGeometry g = plan_geometry(plan);
  return static_cast<double>(g.total_pixels()) * dwell_per_pixel_s + g.n_lines * line_overhead_s;
}

double calibrate_galvo_dwell(const ScanPlan& plan, double target_s, double line_overhead_s) {
  const PlanGeometry g = plan_geometry(plan);
  const double dwell = (target_s - g.n_lines * line_overhead_s) / static_cast<double>(g.total_pixels());
  if (!(dwell > 0.0)) throw ConfigError("galvo line overhead alone exceeds the reference time");
  return dwell;
}

SpeedupReport speedup_report(const ScanPlan& plan, double refocus_time_s, const GalvoModel& galvo) {
  SpeedupReport r;
  r.stage_s = stage_scan_time(plan, refocus_time_s);
  r.galvo_s = galvo_scan_time(plan, galvo.dwell_per_pixel_s, galvo.line_overhead_s);
  r.ratio = r.stage_s / r.galvo_s;
  return r;
}

namespace {

struct ScanSetup {
  PlanGeometry geometry;
  Timeline timeline;
  Instrument instrument;  // digitizer samples resolved for this plan
  bool vertical = true;
};

ScanSetup prepare(const Instrument& instrument, const ScanPlan& plan) {
  instrument.validate();
  plan.validate(instrument);
  ScanSetup s;
  s.geometry = plan_geometry(plan);
  s.timeline = build_timeline(plan, instrument);
  s.instrument = instrument;
  s.instrument.digitizer.samples_per_pixel = resolved_samples(plan, instrument.digitizer);
  s.vertical = plan.fast_axis == FastAxis::Vertical;
  return s;
}

ResponseMap blank_map(const ScanSetup& s, const ScanPlan& plan, std::uint64_t seed) {
  ResponseMap map = ResponseMap::blank(s.geometry.nx, s.geometry.ny, plan.pixel_pitch_um,
                                       {plan.region.x0, plan.region.y0});
  auto& m = map.meta;
  m.plan_name = plan.name;
  m.seed = seed;
  m.stream_seed = seed;
  m.fast_axis = plan.fast_axis;
  m.serpentine = plan.serpentine;
  m.samples_per_pixel = s.instrument.digitizer.samples_per_pixel;
  m.dwell_s = s.timeline.dwell_s;
  m.stage_time_s = s.timeline.total_s;
  m.line_timestamps_s = s.timeline.line_start_s;
  m.refocus_lines = s.timeline.refocus_lines;
  return map;
}

// Pixel coordinates of the j-th acquired pixel on a line.
struct PixelIndex {
  int ix, iy;
};

PixelIndex locate(const ScanSetup& s, const ScanPlan& plan, int line, int j) {
  const int along = (plan.serpentine && (line % 2 == 1)) ? s.geometry.n_fast - 1 - j : j;
  return s.vertical ? PixelIndex{line, along} : PixelIndex{along, line};
}

Vec2 sweep_vector(const ScanSetup& s, const ScanPlan& plan) {
  if (!plan.motion_blur) return {};
  return s.vertical ? Vec2{0.0, plan.pixel_pitch_um} : Vec2{plan.pixel_pitch_um, 0.0};
}

PixelReading measure_at(const Scene& scene, const ScanSetup& s, const ResponseMap& map, const InstrumentState& state,
                        PixelIndex p, double t, std::uint64_t seed, Vec2 sweep) {
  SplitMix64 rng(stream_seed(seed, static_cast<std::uint64_t>(p.iy) * map.width + p.ix));
  return measure_pixel(scene, s.instrument, state, map.pixel_center(p.ix, p.iy), t, rng, sweep);
}

}  // namespace

ResponseMap execute_scan(const Scene& scene, const Instrument& instrument, const ScanPlan& plan,
                         std::uint64_t seed) {
  const ScanSetup s = prepare(instrument, plan);
  ResponseMap map = blank_map(s, plan, seed);
  const Vec2 sweep = sweep_vector(s, plan);
  const int n_lines = s.geometry.n_lines;
  const int n_fast = s.geometry.n_fast;
  int saturated = 0;

#pragma omp parallel for schedule(dynamic, 4) reduction(+ : saturated)
  for (int line = 0; line < n_lines; ++line) {
    InstrumentState state;
    state.last_refocus_s = s.timeline.line_focus_s[line];
    for (int j = 0; j < n_fast; ++j) {
      const PixelIndex p = locate(s, plan, line, j);
      const double t = s.timeline.pixel_time(line, j);
      state.clock_s = t;
      const PixelReading r = measure_at(scene, s, map, state, p, t, seed, sweep);
      map.at(p.ix, p.iy) = r.current_A;
      saturated += r.saturated ? 1 : 0;
    }
  }
  map.meta.saturated_pixels = saturated;
  return map;
}

ResponseMap execute_scan_reference(const Scene& scene, const Instrument& instrument, const ScanPlan& plan,
                                   std::uint64_t seed) {
  const ScanSetup s = prepare(instrument, plan);
  ResponseMap map = blank_map(s, plan, seed);
  const Vec2 sweep = sweep_vector(s, plan);
  const auto& g = s.geometry;

  InstrumentState state;
  double previous_t = -1.0;
  for (int line = 0; line < g.n_lines; ++line) {
    if (plan.refocus_every_n_lines > 0 && line > 0 && line % plan.refocus_every_n_lines == 0) {
      state = refocus(state, s.instrument);
    }
    state.clock_s += plan.turnaround_s;
    const double line_start = state.clock_s;
    for (int j = 0; j < g.n_fast; ++j) {
      const double t = line_start + (j + 0.5) * g.dwell_s;
      if (!(t > previous_t)) throw std::logic_error("acquisition timeline is not strictly increasing");
      previous_t = t;
      const PixelIndex p = locate(s, plan, line, j);
      const PixelReading r = measure_at(scene, s, map, state, p, t, seed, sweep);
      map.at(p.ix, p.iy) = r.current_A;
      map.meta.saturated_pixels += r.saturated ? 1 : 0;
    }
    state.clock_s += g.line_time_s;
  }
  return map;
}

}  // namespace tlsbench
