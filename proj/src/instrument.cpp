#include "tlsbench/instrument.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "tlsbench/errors.hpp"

namespace tlsbench {

Vec2 StageModel::quantize(Vec2 p) const {
  return {std::round(p.x / step_resolution_um) * step_resolution_um,
          std::round(p.y / step_resolution_um) * step_resolution_um};
}

void StageModel::validate() const {
  if (!(step_resolution_um > 0.0)) throw ConfigError("stage step resolution must be positive");
  if (!(max_speed_um_s > 0.0)) throw ConfigError("stage max speed must be positive");
  if (blur_rate_um_per_min < 0.0) throw ConfigError("blur rate must be non-negative");
  if (!(travel_limits.width() > 0.0 && travel_limits.height() > 0.0)) throw ConfigError("empty travel limits");
}

void PreampModel::validate() const {
  if (!(sensitivity_A_per_V > 0.0)) throw ConfigError("preamp sensitivity must be positive");
  if (!(output_limit_V > 0.0)) throw ConfigError("preamp output limit must be positive");
  if (input_noise_rms_A < 0.0) throw ConfigError("preamp input noise must be non-negative");
}

double DigitizerModel::step_V() const { return 2.0 * input_range_V / std::ldexp(1.0, bits); }

double DigitizerModel::quantize(double volts) const {
  const double step = step_V();
  const double max_code = std::ldexp(1.0, bits - 1) - 1.0;
  const double code = std::clamp(std::round(volts / step), -max_code - 1.0, max_code);
  return code * step;
}

void DigitizerModel::validate() const {
  if (!(sample_rate_Hz > 0.0)) throw ConfigError("digitizer sample rate must be positive");
  if (bits < 2 || bits > 32) throw ConfigError("digitizer resolution must be 2..32 bits");
  if (!(input_range_V > 0.0)) throw ConfigError("digitizer input range must be positive");
  if (samples_per_pixel < 1) throw ConfigError("samples per pixel must be >= 1");
}

void Instrument::validate() const {
  stage.validate();
  preamp.validate();
  digitizer.validate();
  if (refocus_time_s < 0.0) throw ConfigError("refocus time must be non-negative");
}

InstrumentState refocus(InstrumentState state, const Instrument& instrument) {
  state.clock_s += instrument.refocus_time_s;
  state.last_refocus_s = state.clock_s;
  ++state.refocus_count;
  return state;
}

double blurred_sigma(const SpotProfile& spot, const StageModel& stage, double t_s, double last_refocus_s) {
  return spot.gaussian_sigma + stage.blur_rate_um_per_min * std::max(0.0, t_s - last_refocus_s) / 60.0;
}

PixelReading measure_pixel(const Scene& scene, const Instrument& instrument, const InstrumentState& state,
                           Vec2 commanded, double t_s, SplitMix64& rng, Vec2 sweep) {
  const auto& stage = instrument.stage;
  if (!stage.travel_limits.contains(commanded)) {
    throw StageFault("commanded position (" + std::to_string(commanded.x) + ", " + std::to_string(commanded.y) +
                     ") um is outside the stage travel");
  }
  const Vec2 actual = stage.quantize(commanded) + stage.drift_at(t_s);

  SpotProfile spot = scene.spot;
  spot.gaussian_sigma = blurred_sigma(scene.spot, stage, t_s, state.last_refocus_s);
  spot.fwhm_diameter = spot.gaussian_sigma * kFwhmPerSigma;
  // Defocus spreads the same heating power over a wider area.
  const double spread = scene.spot.gaussian_sigma / spot.gaussian_sigma;
  spot.peak_delta_current *= spread * spread;

  const int n = instrument.digitizer.samples_per_pixel;
  const bool moving = sweep.x != 0.0 || sweep.y != 0.0;
  const double static_delta = moving ? 0.0 : delta_current(scene.device, spot, actual);

  const auto& pre = instrument.preamp;
  const double device_noise = scene.electrical.noise_rms();
  const double noise = std::sqrt(device_noise * device_noise + pre.input_noise_rms_A * pre.input_noise_rms_A);
  std::normal_distribution<double> gauss(0.0, 1.0);

  PixelReading out;
  double sum_v = 0.0;
  for (int k = 0; k < n; ++k) {
    double delta = static_delta;
    if (moving) {
      const double f = (k + 0.5) / n - 0.5;
      delta = delta_current(scene.device, spot, actual + f * sweep);
    }
    double current = scene.electrical.baseline_current + delta;
    if (noise > 0.0) current += noise * gauss(rng);
    double v = (current - pre.input_offset_A) / pre.sensitivity_A_per_V;
    if (std::abs(v) >= pre.output_limit_V) {
      out.saturated = true;
      v = std::clamp(v, -pre.output_limit_V, pre.output_limit_V);
    }
    sum_v += instrument.digitizer.quantize(v);
  }
  out.current_A = sum_v / n * pre.sensitivity_A_per_V;
  return out;
}

}  // namespace tlsbench
