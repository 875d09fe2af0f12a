#pragma once

#include "tlsbench/device_model.hpp"
#include "tlsbench/geometry.hpp"
#include "tlsbench/optics.hpp"
#include "tlsbench/rng.hpp"

namespace tlsbench {

/// Motorized XY stage carrying the optics.
struct StageModel {
  double step_resolution_um = 0.05;
  double max_speed_um_s = 10000.0;
  Vec2 drift_nm_s{5.0, 0.0};
  /// Growth of the spot sigma while out of focus, um per minute.
  double blur_rate_um_per_min = 0.017;
  Rect travel_limits{0.0, 0.0, 50000.0, 50000.0};

  /// Commanded position snapped to the step grid.
  Vec2 quantize(Vec2 commanded) const;
  /// Linear drift displacement (um) after t seconds.
  Vec2 drift_at(double t_s) const { return {drift_nm_s.x * 1e-3 * t_s, drift_nm_s.y * 1e-3 * t_s}; }
  void validate() const;
};

/// Current preamplifier: output V = (I - input_offset) / sensitivity,
/// saturating at +-output_limit.
struct PreampModel {
  double sensitivity_A_per_V = 1e-9;
  double input_offset_A = 0.0;
  double bias_voltage_V = 0.0;
  double output_limit_V = 5.0;
  double input_noise_rms_A = 0.0;

  void validate() const;
};

struct DigitizerModel {
  double sample_rate_Hz = 10000.0;
  int bits = 16;
  double input_range_V = 5.0;  // symmetric, +-range
  int samples_per_pixel = 1;

  double step_V() const;
  /// Nearest code inside the converter range, returned as a voltage.
  double quantize(double volts) const;
  void validate() const;
};

struct Instrument {
  StageModel stage;
  PreampModel preamp;
  DigitizerModel digitizer;
  double refocus_time_s = 3.0;

  void validate() const;
};

/// Everything the laser interacts with.
struct Scene {
  MemoryArrayModel device;
  SpotProfile spot;
  DeviceElectrical electrical;
};

/// Time-ordered instrument state for one acquisition.
struct InstrumentState {
  double clock_s = 0.0;
  double last_refocus_s = 0.0;
  int refocus_count = 0;
};

/// Resets the blur clock and charges the refocus time.
InstrumentState refocus(InstrumentState state, const Instrument& instrument);

/// Effective spot sigma at time t given the time of the last refocus.
double blurred_sigma(const SpotProfile& spot, const StageModel& stage, double t_s, double last_refocus_s);

struct PixelReading {
  double current_A = 0.0;
  bool saturated = false;
};

/// One pixel through stage, device, preamp and digitizer.
///
/// The spot sits at quantize(commanded) + drift(t), widened by the blur
/// accumulated since the last refocus (peak lowered so the integrated
/// response is unchanged). Each of the digitizer's
/// samples_per_pixel samples adds fresh Gaussian noise, is converted by the
/// preamp (with clamping) and quantized; the reading is the mean quantized
/// voltage times the preamp sensitivity. The input offset is not added back.
///
/// `sweep` is the stage displacement during the dwell. When non-zero the
/// samples are spread evenly along it (continuous-motion blur).
///
/// Throws StageFault when `commanded` lies outside the travel limits.
PixelReading measure_pixel(const Scene& scene, const Instrument& instrument, const InstrumentState& state,
                           Vec2 commanded, double t_s, SplitMix64& rng, Vec2 sweep = {});

}  // namespace tlsbench
