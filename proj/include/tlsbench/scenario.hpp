#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tlsbench/device_model.hpp"
#include "tlsbench/instrument.hpp"
#include "tlsbench/key.hpp"
#include "tlsbench/optics.hpp"
#include "tlsbench/response_map.hpp"
#include "tlsbench/scan.hpp"

namespace tlsbench {

enum class Fill { Zeros, Ones, Random };

/// What the memory holds and how the device is operated. Unset fields
/// inherit from the scenario's base contents.
struct ContentSpec {
  std::optional<Fill> fill;
  std::optional<Key256> key;
  std::vector<std::array<int, 3>> set_bits;  // (row, col, value), applied last
  std::optional<bool> powered;
  std::optional<PowerMode> mode;
  std::optional<double> injected_noise_rms_A;
};

struct GalvoCalibration {
  std::string plan;  // plan whose galvo time is known
  double reference_time_s = 0.0;
  double line_overhead_s = 0.0;
};

/// A self-contained experiment: device, optics, instrument, scan plans,
/// named device states and the seed. Loaded from JSON.
struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  MemoryArrayModel device;  // bits all zero, unit sensitivity
  double sensitivity_sigma = 0.0;
  DeviceElectrical electrical;
  OpticsConfig optics;
  Instrument instrument;
  std::map<std::string, ScanPlan> plans;
  std::optional<BitMapping> mapping;
  std::uint64_t metadata_word = 0;
  ContentSpec contents;
  std::map<std::string, ContentSpec> states;
  std::optional<GalvoCalibration> galvo;

  /// "default" followed by the configured state names.
  std::vector<std::string> state_names() const;
  /// Throws ConfigError for an unknown name.
  const ScanPlan& plan(const std::string& name) const;
  ContentSpec resolved_contents(const std::string& state) const;

  /// Device, spot and electrical settings for a state. Sensitivity
  /// variation and random fills depend on `seed` only, so every state of
  /// one scenario shares the same physical chip.
  Scene scene(const std::string& state, std::uint64_t seed) const;
  Scene scene(const std::string& state = "default") const { return scene(state, seed); }

  /// The key loaded in a state (zero when the state holds no key).
  Key256 loaded_key(const std::string& state = "default") const;

  /// Noise streams differ between (plan, state) pairs.
  static std::uint64_t stream_seed_for(std::uint64_t seed, const std::string& plan, const std::string& state);

  /// Scans `plan_name` in `state`; metadata names scenario, state and seeds.
  ResponseMap scan(const std::string& plan_name, const std::string& state, std::uint64_t seed,
                   bool reference_engine = false) const;
  ResponseMap scan(const std::string& plan_name, const std::string& state = "default") const {
    return scan(plan_name, state, seed);
  }

  /// Galvo dwell calibrated on the configured reference plan.
  /// Throws ConfigError when no calibration is configured.
  GalvoModel galvo_model() const;

  void validate() const;
};

/// Reads a scenario file. A "base" file is merged first and overridden by
/// the scenario's own keys (JSON merge patch). Relative plan and mapping
/// paths resolve against the scenario file's directory, including those
/// inherited from a base. Throws ConfigError.
Scenario load_scenario(const std::filesystem::path& path);
Scenario parse_scenario(const std::string& json_text, const std::filesystem::path& base_dir);

/// Plans may give the region explicitly as [x0, y0, x1, y1] or relative to
/// the device: {"footprint": true, "margin_um": m} or
/// {"cells": {"rows": [r0, r1], "cols": [c0, c1]}, "margin_um": m}.
ScanPlan parse_plan_file(const std::filesystem::path& path, const MemoryArrayModel& device);

BitMapping load_mapping(const std::filesystem::path& path);

/// Directory holding the shipped scenarios in the source tree.
std::filesystem::path scenario_dir();

}  // namespace tlsbench
