#include "tlsbench/optics.hpp"

#include <cmath>

#include "tlsbench/errors.hpp"

namespace tlsbench {

void OpticsConfig::validate() const {
  if (!(wavelength_nm > 1100.0)) {
    throw ConfigError("wavelength must be sub-bandgap (> 1100 nm) for thermal stimulation");
  }
  if (!(numerical_aperture > 0.0 && numerical_aperture < 1.0)) {
    throw ConfigError("numerical aperture must lie in (0, 1)");
  }
  if (!(sil_factor >= 1.0)) throw ConfigError("SIL factor must be >= 1");
  if (!(resolution_constant > 0.0)) throw ConfigError("resolution constant must be positive");
  if (delivered_power_mW < 0.0 || delta_per_mW < 0.0 || defocus_gain < 0.0) {
    throw ConfigError("power, delta_per_mW and defocus gain must be non-negative");
  }
}

SpotProfile spot_from_optics(const OpticsConfig& cfg) {
  cfg.validate();
  const double fwhm0 = cfg.resolution_constant * (cfg.wavelength_nm * 1e-3) /
                       (cfg.numerical_aperture * cfg.sil_factor);
  const double sigma0 = fwhm0 / kFwhmPerSigma;
  const double defocus = cfg.defocus_gain * std::abs(cfg.silicon_thickness_um - cfg.thickness_correction_um);
  const double sigma = std::sqrt(sigma0 * sigma0 + defocus * defocus);
  return SpotProfile::from_sigma(sigma, cfg.delta_per_mW * cfg.delivered_power_mW);
}

PowerLookup power_from_laser_current(double current_mA, std::span<const PowerPoint> table) {
  if (table.size() < 2) throw ConfigError("laser power table needs at least two points");
  std::size_t i = 0;
  while (i + 2 < table.size() && current_mA > table[i + 1].current_mA) ++i;
  const auto& a = table[i];
  const auto& b = table[i + 1];
  const double t = (current_mA - a.current_mA) / (b.current_mA - a.current_mA);
  const bool outside = current_mA < table.front().current_mA || current_mA > table.back().current_mA;
  return {std::max(0.0, a.power_mW + t * (b.power_mW - a.power_mW)), outside};
}

namespace {

// Fraction of a unit Gaussian (sigma s) centred at x that falls in [a, b].
double gaussian_interval(double x, double a, double b, double s) {
  const double k = 1.0 / (s * std::sqrt(2.0));
  return 0.5 * (std::erf((b - x) * k) - std::erf((a - x) * k));
}

}  // namespace

double delta_current(const MemoryArrayModel& model, const SpotProfile& spot, Vec2 pos) {
  const double sigma = spot.gaussian_sigma;
  const double cutoff = kKernelCutoffSigmas * sigma;
  const double cutoff2 = cutoff * cutoff;
  const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
  double sum = 0.0;

  if (model.powered) {
    const Rect window{pos.x - cutoff, pos.y - cutoff, pos.x + cutoff, pos.y + cutoff};
    const CellSpan span = cells_near(model, window);
    for (int r = span.row_first; r <= span.row_last; ++r) {
      for (int c = span.col_first; c <= span.col_last; ++c) {
        const SitePair sp = sensitive_sites(model, r, c);
        for (const Vec2& s : sp.positions) {
          const double d2 = squared_norm(pos - s);
          if (d2 < cutoff2) sum += sp.scale * std::exp(-d2 * inv_two_var);
        }
      }
    }
  }

  for (const auto& d : model.distractors) {
    if (!d.area.expanded(cutoff).contains(pos)) continue;
    sum += d.amplitude * gaussian_interval(pos.x, d.area.x0, d.area.x1, sigma) *
           gaussian_interval(pos.y, d.area.y0, d.area.y1, sigma);
  }
  return spot.peak_delta_current * sum;
}

Feasibility feasibility(double cell_min_dimension_um, const SpotProfile& spot, bool deconvolution) {
  Feasibility f;
  f.required_min_um = 2.0 * spot.fwhm_diameter * (deconvolution ? 0.5 : 1.0);
  f.margin = cell_min_dimension_um / f.required_min_um;
  // Tolerate rounding in the FWHM so that a cell exactly at the limit passes.
  f.verdict = f.margin >= 1.0 - 1e-9 ? Verdict::Feasible : Verdict::Infeasible;
  return f;
}

}  // namespace tlsbench
