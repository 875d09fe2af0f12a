#pragma once

// Randomized physics and analysis invariants shared by the unit tests and the
// acceptance runner. Each check returns the number of failing cases.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>

#include "tlsbench/analysis.hpp"
#include "tlsbench/device_model.hpp"
#include "tlsbench/optics.hpp"

namespace tlsbench::props {

inline MemoryArrayModel random_model(std::mt19937_64& g) {
  std::uniform_real_distribution<double> size(1.0, 4.0), inset(0.1, 0.3);
  const double w = size(g), h = size(g);
  const int rows = 1 + static_cast<int>(g() % 6), cols = 1 + static_cast<int>(g() % 6);
  auto m = MemoryArrayModel::make(rows, cols, CellGeometry::corner_inset(w, h, inset(g)),
                                  (g() & 1) ? Diagonal::TL_BR : Diagonal::BL_TR, {0.0, 0.0});
  for (auto& b : m.bits) b = static_cast<std::uint8_t>(g() & 1);
  apply_sensitivity_variation(m, 0.15, g());
  if (g() & 1) m.distractors.push_back({Rect{-5.0, -5.0, -1.0, -1.0}, 0.5});
  return m;
}

inline Vec2 random_point(std::mt19937_64& g, const Rect& r) {
  std::uniform_real_distribution<double> ux(r.x0, r.x1), uy(r.y0, r.y1);
  return {ux(g), uy(g)};
}

inline ResponseMap random_map(std::mt19937_64& g, int w, int h) {
  ResponseMap m = ResponseMap::blank(w, h, 0.25, {1.0, 2.0});
  std::normal_distribution<double> n(5e-10, 2e-10);
  for (auto& v : m.values) v = n(g);
  return m;
}

/// Bits unchanged after many delta_current evaluations.
inline int non_destructive(int cases, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  int failures = 0;
  for (int k = 0; k < cases; ++k) {
    const MemoryArrayModel m = random_model(g);
    const auto before = m.bits;
    const SpotProfile spot = SpotProfile::from_sigma(0.4, 1e-9);
    const Rect area = m.footprint().expanded(2.0);
    double sink = 0.0;
    for (int i = 0; i < 50; ++i) sink += delta_current(m, spot, random_point(g, area));
    if (m.bits != before || !(sink >= 0.0)) ++failures;
  }
  return failures;
}

/// delta_current / power is constant across a power sweep.
inline int linear_in_power(int cases, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> power(1.0, 80.0);
  int failures = 0;
  for (int k = 0; k < cases; ++k) {
    const MemoryArrayModel m = random_model(g);
    const Vec2 pos = random_point(g, m.footprint().expanded(1.0));
    OpticsConfig o;
    o.delivered_power_mW = 43.0;
    const double ref = delta_current(m, spot_from_optics(o), pos) / 43.0;
    bool ok = true;
    for (int i = 0; i < 5; ++i) {
      o.delivered_power_mW = power(g);
      const double v = delta_current(m, spot_from_optics(o), pos) / o.delivered_power_mW;
      ok = ok && std::abs(v - ref) <= 1e-12 * std::abs(ref) + 1e-30;
    }
    if (!ok) ++failures;
  }
  return failures;
}

/// Exchanging the two sensitive sites (point reflection about their
/// midpoint) leaves the response of an isolated cell unchanged.
inline int site_exchange_symmetry(int cases, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> size(1.0, 4.0), inset(0.1, 0.3), sigma(0.1, 1.0);
  int failures = 0;
  for (int k = 0; k < cases; ++k) {
    auto m = MemoryArrayModel::make(1, 1, CellGeometry::corner_inset(size(g), size(g), inset(g)),
                                    (g() & 1) ? Diagonal::TL_BR : Diagonal::BL_TR, {0.0, 0.0});
    m.set_bit(0, 0, static_cast<int>(g() & 1));
    const SitePair sp = sensitive_sites(m, 0, 0);
    const SpotProfile spot = SpotProfile::from_sigma(sigma(g), 1e-9);
    const Vec2 p = random_point(g, m.footprint().expanded(1.0));
    const Vec2 mirrored = sp.positions[0] + sp.positions[1] - p;
    const double a = delta_current(m, spot, p), b = delta_current(m, spot, mirrored);
    if (std::abs(a - b) > 1e-12 * std::max(a, b) + 1e-30 || a < 0.0) ++failures;
  }
  return failures;
}

/// Higher current never renders darker; extremes map to 0 and 1.
inline int grayscale_monotone(int cases, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  int failures = 0;
  for (int k = 0; k < cases; ++k) {
    const ResponseMap m = random_map(g, 2 + static_cast<int>(g() % 20), 2 + static_cast<int>(g() % 20));
    const bool full = g() & 1;
    const GrayscaleMap gm = full ? encode_grayscale(m) : encode_grayscale(m, 1.0, 99.0);
    std::vector<std::size_t> order(m.values.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return m.values[a] < m.values[b]; });
    bool ok = true;
    for (std::size_t i = 1; i < order.size(); ++i) ok = ok && gm.intensity[order[i]] >= gm.intensity[order[i - 1]];
    if (full) ok = ok && gm.intensity[order.front()] == 0.0 && gm.intensity[order.back()] == 1.0;
    for (double v : gm.intensity) ok = ok && v >= 0.0 && v <= 1.0;
    if (!ok) ++failures;
  }
  return failures;
}

/// subtract(a, b) == -subtract(b, a) and subtract(a, a) == 0, exactly.
inline int subtraction_antisymmetric(int cases, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  int failures = 0;
  for (int k = 0; k < cases; ++k) {
    const int w = 1 + static_cast<int>(g() % 30), h = 1 + static_cast<int>(g() % 30);
    const ResponseMap a = random_map(g, w, h), b = random_map(g, w, h);
    const ResponseMap ab = subtract_maps(a, b), ba = subtract_maps(b, a), aa = subtract_maps(a, a);
    bool ok = true;
    for (std::size_t i = 0; i < ab.values.size(); ++i) {
      ok = ok && ab.values[i] == -ba.values[i] && aa.values[i] == 0.0;
    }
    if (!ok) ++failures;
  }
  return failures;
}

}  // namespace tlsbench::props
