#pragma once

#include <span>

#include "tlsbench/device_model.hpp"
#include "tlsbench/geometry.hpp"

namespace tlsbench {

/// FWHM of a Gaussian divided by its standard deviation, 2*sqrt(2 ln 2).
inline constexpr double kFwhmPerSigma = 2.3548200450309493;

/// Spot-size constant k in fwhm = k * wavelength / NA, fixed so a 1424 nm
/// laser through a 0.65 NA objective gives a 1.0 um spot.
inline constexpr double kResolutionConstant = 1.0 * 0.65 / 1.424;

/// Gaussian kernel truncation radius in units of sigma.
inline constexpr double kKernelCutoffSigmas = 5.0;

struct OpticsConfig {
  double wavelength_nm = 1424.0;
  double numerical_aperture = 0.65;
  double magnification = 50.0;
  double laser_current_mA = 600.0;
  double delivered_power_mW = 43.0;
  double silicon_thickness_um = 350.0;
  double thickness_correction_um = 350.0;
  double sil_factor = 1.0;

  double resolution_constant = kResolutionConstant;
  /// Added blur sigma (um) per um of thickness mismatch.
  double defocus_gain = 2e-3;
  /// Peak current change per mW of delivered power (A/mW); 1 nA at 43 mW.
  double delta_per_mW = 1e-9 / 43.0;

  /// Rejects wavelengths at or below 1100 nm (photocarrier generation),
  /// NA outside (0, 1) and SIL factors below 1.
  void validate() const;
};

struct SpotProfile {
  double fwhm_diameter = 0.0;       // um
  double gaussian_sigma = 0.0;      // um
  double peak_delta_current = 0.0;  // A

  static SpotProfile from_sigma(double sigma, double peak) {
    return {sigma * kFwhmPerSigma, sigma, peak};
  }
};

SpotProfile spot_from_optics(const OpticsConfig& cfg);

/// One (laser current, delivered power) calibration point.
struct PowerPoint {
  double current_mA;
  double power_mW;
};

/// The two measured operating points of the 50x objective.
inline constexpr PowerPoint kDefaultPowerTable[] = {{500.0, 26.0}, {600.0, 43.0}};

struct PowerLookup {
  double power_mW = 0.0;
  bool extrapolated = false;
};

/// Piecewise-linear interpolation through `table` (sorted by current).
/// Values outside the table are extrapolated from the end segments and flagged.
PowerLookup power_from_laser_current(double current_mA,
                                     std::span<const PowerPoint> table = kDefaultPowerTable);

/// Stimulation-induced current change with the spot centred at `pos`.
///
/// Sums a Gaussian kernel over every sensitive site within the cutoff radius
/// plus the Gaussian-blurred rectangle of each distractor. Never negative;
/// reads the model only.
double delta_current(const MemoryArrayModel& model, const SpotProfile& spot, Vec2 pos);

enum class Verdict { Feasible, Infeasible };

struct Feasibility {
  Verdict verdict = Verdict::Infeasible;
  double required_min_um = 0.0;
  double margin = 0.0;  // cell / required
};

/// A cell is resolvable when its smallest dimension is at least twice the
/// spot FWHM; deconvolution halves the requirement.
Feasibility feasibility(double cell_min_dimension_um, const SpotProfile& spot, bool deconvolution);

}  // namespace tlsbench
