#include <cmath>
#include <random>

#include "doctest.h"
#include "tlsbench/device_model.hpp"
#include "tlsbench/errors.hpp"
#include "tlsbench/optics.hpp"

using namespace tlsbench;

namespace {

// All sites of all cells, no cutoff, no distractors.
double brute_force_delta(const MemoryArrayModel& m, const SpotProfile& spot, Vec2 pos) {
  double sum = 0.0;
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      const SitePair sp = sensitive_sites(m, r, c);
      for (const Vec2& s : sp.positions) {
        sum += sp.scale * std::exp(-squared_norm(pos - s) / (2.0 * spot.gaussian_sigma * spot.gaussian_sigma));
      }
    }
  }
  return spot.peak_delta_current * sum;
}

MemoryArrayModel random_array(std::uint64_t seed) {
  auto m = MemoryArrayModel::make(12, 16, CellGeometry::corner_inset(2.5, 1.9, 0.2), Diagonal::BL_TR, {5.0, 7.0},
                                  {{8, 2.5}});
  std::mt19937_64 g(seed);
  for (auto& b : m.bits) b = static_cast<std::uint8_t>(g() & 1);
  apply_sensitivity_variation(m, 0.15, seed);
  return m;
}

OpticsConfig default_optics() {
  OpticsConfig o;
  o.wavelength_nm = 1424;
  o.numerical_aperture = 0.65;
  o.delivered_power_mW = 43;
  o.silicon_thickness_um = o.thickness_correction_um = 350;
  return o;
}

}  // namespace

TEST_CASE("spot size from wavelength and aperture") {
  OpticsConfig o = default_optics();
  SpotProfile s = spot_from_optics(o);
  CHECK(s.fwhm_diameter == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(s.gaussian_sigma == doctest::Approx(1.0 / (2.0 * std::sqrt(2.0 * std::log(2.0)))));
  CHECK(s.peak_delta_current == doctest::Approx(1e-9));

  o.sil_factor = 4.3;
  s = spot_from_optics(o);
  CHECK(s.fwhm_diameter == doctest::Approx(1.0 / 4.3));
  CHECK(std::abs(s.fwhm_diameter / 0.235 - 1.0) < 0.02);
}

TEST_CASE("thickness mismatch only ever broadens the spot") {
  OpticsConfig o = default_optics();
  const double sigma0 = spot_from_optics(o).gaussian_sigma;
  double previous = sigma0;
  for (double mismatch = 0.0; mismatch <= 400.0; mismatch += 10.0) {
    o.thickness_correction_um = o.silicon_thickness_um - mismatch;
    const double s = spot_from_optics(o).gaussian_sigma;
    CHECK(s >= previous);
    previous = s;
  }
  o.thickness_correction_um = o.silicon_thickness_um - 100.0;
  const double expected = std::sqrt(sigma0 * sigma0 + 0.2 * 0.2);
  CHECK(spot_from_optics(o).gaussian_sigma == doctest::Approx(expected));
  o.thickness_correction_um = o.silicon_thickness_um + 100.0;
  CHECK(spot_from_optics(o).gaussian_sigma == doctest::Approx(expected));
}

TEST_CASE("optics validation") {
  OpticsConfig o = default_optics();
  o.wavelength_nm = 1064;
  CHECK_THROWS_AS(o.validate(), ConfigError);
  CHECK_THROWS_AS(spot_from_optics(o), ConfigError);
  o = default_optics();
  o.numerical_aperture = 1.2;
  CHECK_THROWS_AS(o.validate(), ConfigError);
  o = default_optics();
  o.sil_factor = 0.5;
  CHECK_THROWS_AS(o.validate(), ConfigError);
}

TEST_CASE("laser current to power table") {
  CHECK(power_from_laser_current(600).power_mW == doctest::Approx(43.0));
  CHECK(power_from_laser_current(500).power_mW == doctest::Approx(26.0));
  const auto mid = power_from_laser_current(550);
  CHECK(mid.power_mW == doctest::Approx(34.5));
  CHECK_FALSE(mid.extrapolated);
  const auto hi = power_from_laser_current(650);
  CHECK(hi.extrapolated);
  CHECK(hi.power_mW == doctest::Approx(51.5));
}

TEST_CASE("kernel peak and cutoff") {
  auto m = MemoryArrayModel::make(1, 1, CellGeometry::corner_inset(20.0, 20.0), Diagonal::TL_BR, {0, 0});
  const SpotProfile spot = SpotProfile::from_sigma(0.4, 1e-9);
  const auto sites = sensitive_sites(m, 0, 0);
  CHECK(delta_current(m, spot, sites.positions[0]) == doctest::Approx(1e-9).epsilon(1e-12));
  const Vec2 far = sites.positions[0] + Vec2{-5.0 * 0.4, 0.0};
  CHECK(delta_current(m, spot, far) == 0.0);
  CHECK(delta_current(m, spot, sites.positions[0] + Vec2{-4.99 * 0.4, 0.0}) > 0.0);
}

TEST_CASE("two sites equidistant from the spot") {
  auto m = MemoryArrayModel::make(1, 1, CellGeometry::corner_inset(1.0, 1.0), Diagonal::TL_BR, {0, 0});
  m.set_bit(0, 0, 1);
  const SpotProfile spot = SpotProfile::from_sigma(0.42, 1e-9);
  const Vec2 centre{0.5, 0.5};
  const double d = std::sqrt(2.0) * 0.35;
  const double expected = 2.0 * 1e-9 * std::exp(-d * d / (2.0 * 0.42 * 0.42));
  CHECK(delta_current(m, spot, centre) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::abs(brute_force_delta(m, spot, centre) / expected - 1.0) < 1e-3);
}

TEST_CASE("truncated kernel agrees with the brute-force sum") {
  const SpotProfile spot = SpotProfile::from_sigma(1.0 / 2.35482, 1e-9);
  std::mt19937_64 g(17);
  std::uniform_real_distribution<double> ux(0.0, 50.0), uy(3.0, 32.0);
  for (int k = 0; k < 5; ++k) {
    const auto m = random_array(100 + k);
    for (int n = 0; n < 200; ++n) {
      const Vec2 pos{ux(g), uy(g)};
      const double brute = brute_force_delta(m, spot, pos);
      const double fast = delta_current(m, spot, pos);
      CHECK(std::abs(fast - brute) <= 1e-3 * brute + 1e-5 * spot.peak_delta_current);
    }
  }
}

TEST_CASE("distractor adds a blurred rectangle independent of power state") {
  auto m = MemoryArrayModel::make(1, 1, CellGeometry::corner_inset(3.2, 2.8), Diagonal::TL_BR, {0, 0});
  m.distractors.push_back({Rect{100, 0, 160, 60}, 0.5});
  m.powered = false;
  const SpotProfile spot = SpotProfile::from_sigma(0.4, 1e-9);
  CHECK(delta_current(m, spot, {130, 30}) == doctest::Approx(0.5e-9));
  CHECK(delta_current(m, spot, {100, 30}) == doctest::Approx(0.25e-9).epsilon(1e-6));
  CHECK(delta_current(m, spot, {1.6, 1.4}) == 0.0);
}

#include "properties.hpp"

TEST_CASE("physics invariants over random scenes") {
  CHECK(props::non_destructive(1000, 1) == 0);
  CHECK(props::linear_in_power(1000, 2) == 0);
  CHECK(props::site_exchange_symmetry(1000, 3) == 0);
}

TEST_CASE("feasibility thresholds") {
  const SpotProfile plain = SpotProfile::from_sigma(1.0 / kFwhmPerSigma, 1e-9);
  auto f = feasibility(2.0, plain, false);
  CHECK(f.verdict == Verdict::Feasible);
  CHECK(f.margin == doctest::Approx(1.0));
  CHECK(f.required_min_um == doctest::Approx(2.0));

  const SpotProfile sil = SpotProfile::from_sigma(0.235 / kFwhmPerSigma, 1e-9);
  f = feasibility(0.47, sil, false);
  CHECK(f.verdict == Verdict::Feasible);
  CHECK(f.margin == doctest::Approx(1.0));

  CHECK(feasibility(1.9, plain, false).verdict == Verdict::Infeasible);
  f = feasibility(1.9, plain, true);
  CHECK(f.verdict == Verdict::Feasible);
  CHECK(f.required_min_um == doctest::Approx(1.0));
}
