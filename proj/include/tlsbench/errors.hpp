#pragma once

#include <stdexcept>
#include <string>

namespace tlsbench {

/// Invalid scenario, plan, optics or mapping configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scan plan rejected before any pixel is measured.
class PlanningError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Map geometry mismatch, undersized patch or misaligned inputs.
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cell grid could not be recovered from a response map.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Commanded stage position outside the travel limits.
class StageFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tlsbench
