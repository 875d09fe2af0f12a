#include "tlsbench/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <sstream>

#include "tlsbench/errors.hpp"

namespace tlsbench {

namespace {

constexpr double kMadToSigma = 1.4826;
constexpr double kNoiseFloor = 1e-18;  // A; keeps ratios finite on noiseless maps

double median_inplace(std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
  return m;
}

double mad_sigma(std::vector<double> v) {
  const double med = median_inplace(v);
  for (double& x : v) x = std::abs(x - med);
  return kMadToSigma * median_inplace(v);
}

// Pixel index range [first, last) whose centres fall inside [lo, hi) on one axis.
std::pair<int, int> centre_range(double lo, double hi, double origin, double pitch, int n) {
  const int first = std::max(0, static_cast<int>(std::ceil((lo - origin) / pitch - 0.5)));
  const int last = std::min(n, static_cast<int>(std::ceil((hi - origin) / pitch - 0.5)));
  return {first, last};
}

struct RegionStats {
  double sum = 0.0;
  double sum_sq = 0.0;
  int count = 0;
};

RegionStats region_stats(const ResponseMap& map, const Rect& r) {
  const auto [x0, x1] = centre_range(r.x0, r.x1, map.origin.x, map.pixel_pitch_um, map.width);
  const auto [y0, y1] = centre_range(r.y0, r.y1, map.origin.y, map.pixel_pitch_um, map.height);
  RegionStats s;
  for (int iy = y0; iy < y1; ++iy) {
    for (int ix = x0; ix < x1; ++ix) {
      const double v = map.at(ix, iy);
      s.sum += v;
      s.sum_sq += v * v;
      ++s.count;
    }
  }
  return s;
}

void require_covered(const ResponseMap& map, const Rect& cell) {
  const Rect ext = map.extent();
  const double tol = 1e-9 * map.pixel_pitch_um;
  if (cell.x0 < ext.x0 - tol || cell.y0 < ext.y0 - tol || cell.x1 > ext.x1 + tol || cell.y1 > ext.y1 + tol) {
    throw GeometryError("cell patch is not fully covered by the map");
  }
}

double patch_noise(const CellPatch& patch) {
  if (patch.noise_rms > 0.0) return patch.noise_rms;
  return std::max(robust_noise_rms(patch.map), kNoiseFloor);
}

}  // namespace

double percentile(std::vector<double> values, double pct) {
  if (values.empty()) throw GeometryError("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(pct, 0.0, 100.0) / 100.0 * (values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - lo) * (values[hi] - values[lo]);
}

GrayscaleMap encode_grayscale(const ResponseMap& map, double low_pct, double high_pct) {
  if (map.values.empty()) throw GeometryError("cannot encode an empty map");
  GrayscaleMap g;
  g.width = map.width;
  g.height = map.height;
  g.current_min = percentile(map.values, low_pct);
  g.current_max = percentile(map.values, high_pct);
  g.intensity.resize(map.values.size());
  const double span = g.current_max - g.current_min;
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    g.intensity[i] = span > 0.0 ? std::clamp((map.values[i] - g.current_min) / span, 0.0, 1.0) : 0.5;
  }
  return g;
}

ResponseMap subtract_maps(const ResponseMap& a, const ResponseMap& b) {
  if (!a.same_geometry(b)) {
    std::ostringstream msg;
    msg << "map geometry mismatch: " << a.width << "x" << a.height << " @" << a.pixel_pitch_um << " um origin ("
        << a.origin.x << ", " << a.origin.y << ") vs " << b.width << "x" << b.height << " @" << b.pixel_pitch_um
        << " um origin (" << b.origin.x << ", " << b.origin.y << ")";
    throw GeometryError(msg.str());
  }
  ResponseMap d = a;
  for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] = a.values[i] - b.values[i];
  d.meta.kind = "difference";
  d.meta.saturated_pixels = a.meta.saturated_pixels + b.meta.saturated_pixels;
  auto label = [](const ResponseMap& m) {
    std::ostringstream s;
    s << (m.meta.scenario.empty() ? "map" : m.meta.scenario) << ":" << m.meta.state << ":" << m.meta.plan_name
      << "#" << m.meta.stream_seed;
    return s.str();
  };
  d.meta.parents = {label(a), label(b)};
  return d;
}

double robust_noise_rms(const ResponseMap& map) {
  if (map.width < 3 || map.height < 3) return mad_sigma(map.values);
  std::vector<double> residual;
  residual.reserve(static_cast<std::size_t>(map.width - 2) * (map.height - 2));
  for (int y = 1; y < map.height - 1; ++y) {
    for (int x = 1; x < map.width - 1; ++x) {
      const double r = map.at(x - 1, y - 1) - 2 * map.at(x, y - 1) + map.at(x + 1, y - 1) -
                       2 * map.at(x - 1, y) + 4 * map.at(x, y) - 2 * map.at(x + 1, y) + map.at(x - 1, y + 1) -
                       2 * map.at(x, y + 1) + map.at(x + 1, y + 1);
      residual.push_back(r);
    }
  }
  // The kernel's L2 norm is 6, so white noise of rms s gives residual rms 6s.
  return mad_sigma(std::move(residual)) / 6.0;
}

std::vector<CandidateBox> localize_candidates(const ResponseMap& on, const ResponseMap& off, double threshold_sigma,
                                              int min_pixels) {
  const ResponseMap diff = subtract_maps(on, off);
  const double noise = robust_noise_rms(diff);
  const double level = threshold_sigma * noise;
  const int w = diff.width, h = diff.height;

  std::vector<char> hit(diff.values.size(), 0);
  for (std::size_t i = 0; i < hit.size(); ++i) hit[i] = std::abs(diff.values[i]) > level;

  std::vector<char> grown(hit.size(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!hit[static_cast<std::size_t>(y) * w + x]) continue;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = x + dx, yy = y + dy;
          if (xx >= 0 && xx < w && yy >= 0 && yy < h) grown[static_cast<std::size_t>(yy) * w + xx] = 1;
        }
      }
    }
  }

  std::vector<int> label(hit.size(), -1);
  std::vector<CandidateBox> boxes;
  std::deque<int> queue;
  for (int start = 0; start < w * h; ++start) {
    if (!grown[start] || label[start] >= 0) continue;
    const int id = static_cast<int>(boxes.size());
    CandidateBox box;
    int bx0 = w, by0 = h, bx1 = -1, by1 = -1;
    label[start] = id;
    queue.push_back(start);
    while (!queue.empty()) {
      const int p = queue.front();
      queue.pop_front();
      const int x = p % w, y = p / w;
      if (hit[p]) {
        ++box.pixel_count;
        box.integrated_difference += std::abs(diff.values[p]);
        bx0 = std::min(bx0, x);
        bx1 = std::max(bx1, x);
        by0 = std::min(by0, y);
        by1 = std::max(by1, y);
      }
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = x + dx, yy = y + dy;
          if (xx < 0 || xx >= w || yy < 0 || yy >= h) continue;
          const int q = yy * w + xx;
          if (grown[q] && label[q] < 0) {
            label[q] = id;
            queue.push_back(q);
          }
        }
      }
    }
    const double p = diff.pixel_pitch_um;
    box.area = {diff.origin.x + bx0 * p, diff.origin.y + by0 * p, diff.origin.x + (bx1 + 1) * p,
                diff.origin.y + (by1 + 1) * p};
    boxes.push_back(box);
  }

  std::erase_if(boxes, [&](const CandidateBox& b) { return b.pixel_count < min_pixels; });
  std::stable_sort(boxes.begin(), boxes.end(), [](const CandidateBox& a, const CandidateBox& b) {
    return a.integrated_difference > b.integrated_difference;
  });
  return boxes;
}

// ---------------------------------------------------------------------------

Rect CellGrid::cell_rect(int r, int c) const {
  double off = 0.0;
  for (const auto& b : block_boundaries) {
    if (c >= b.start_col) off += b.offset;
  }
  const double x = origin.x + c * pitch_x + off;
  const double y = origin.y + r * pitch_y;
  return {x, y, x + pitch_x, y + pitch_y};
}

namespace {

constexpr double kMinPeakCorrelation = 0.15;
constexpr double kSearchWindow = 0.15;  // lag search, fraction of the hint
constexpr double kAcceptWindow = 0.10;  // accepted pitch deviation

// Normalized autocorrelation of the zero-mean map at integer lag along one axis.
double autocorrelation(const std::vector<double>& a, int w, int h, bool along_x, int lag) {
  double sum = 0.0;
  std::size_t n = 0;
  if (along_x) {
    for (int y = 0; y < h; ++y) {
      const double* row = a.data() + static_cast<std::size_t>(y) * w;
      for (int x = 0; x + lag < w; ++x) sum += row[x] * row[x + lag];
      n += static_cast<std::size_t>(std::max(0, w - lag));
    }
  } else {
    for (int y = 0; y + lag < h; ++y) {
      const double* r0 = a.data() + static_cast<std::size_t>(y) * w;
      const double* r1 = r0 + static_cast<std::size_t>(lag) * w;
      for (int x = 0; x < w; ++x) sum += r0[x] * r1[x];
      n += static_cast<std::size_t>(w);
    }
  }
  return n ? sum / n : 0.0;
}

struct Peak {
  int lag = 0;
  double value = -std::numeric_limits<double>::infinity();
  double refined = 0.0;
};

Peak find_peak(const std::vector<double>& a, int w, int h, bool along_x, int lo, int hi, double var) {
  Peak best;
  std::vector<double> r(static_cast<std::size_t>(hi - lo + 3));
  for (int lag = lo - 1; lag <= hi + 1; ++lag) {
    r[static_cast<std::size_t>(lag - lo + 1)] = autocorrelation(a, w, h, along_x, std::max(lag, 0)) / var;
  }
  for (int lag = lo; lag <= hi; ++lag) {
    const double v = r[static_cast<std::size_t>(lag - lo + 1)];
    if (v > best.value) {
      best.value = v;
      best.lag = lag;
    }
  }
  const double ym = r[static_cast<std::size_t>(best.lag - lo)];
  const double y0 = best.value;
  const double yp = r[static_cast<std::size_t>(best.lag - lo + 2)];
  const double denom = ym - 2 * y0 + yp;
  const double shift = denom < 0.0 ? 0.5 * (ym - yp) / denom : 0.0;
  best.refined = best.lag + std::clamp(shift, -0.5, 0.5);
  return best;
}

double estimate_period(const std::vector<double>& a, int w, int h, bool along_x, double hint_px, double var,
                       const char* axis) {
  const int n = along_x ? w : h;
  const int lo = std::max(1, static_cast<int>(std::floor(hint_px * (1.0 - kSearchWindow))));
  const int hi = static_cast<int>(std::ceil(hint_px * (1.0 + kSearchWindow)));
  if (hi + 1 >= n / 2) {
    throw FitError(std::string("map too small along ") + axis + " for a period near " + std::to_string(hint_px) +
                   " px (need >= 3 cells of signal)");
  }
  const Peak first = find_peak(a, w, h, along_x, lo, hi, var);
  if (first.value < kMinPeakCorrelation || first.lag == lo || first.lag == hi) {
    std::ostringstream msg;
    msg << "no autocorrelation peak along " << axis << " near the hint (" << hint_px << " px): best lag "
        << first.lag << " px, correlation " << first.value << " (need >= " << kMinPeakCorrelation
        << " at an interior lag in [" << lo << ", " << hi << "])";
    throw FitError(msg.str());
  }
  // Refine on higher harmonics: the lag error is divided by the multiple.
  double period = first.refined;
  for (int m = 2; m <= 64; ++m) {
    const int centre = static_cast<int>(std::lround(m * period));
    if (centre + 3 >= n / 2) break;
    const Peak p = find_peak(a, w, h, along_x, centre - 2, centre + 2, var);
    if (p.value < 0.5 * first.value || p.lag == centre - 2 || p.lag == centre + 2) break;
    period = p.refined / m;
  }
  return period;
}

}  // namespace

CellGrid fit_grid(const ResponseMap& map, const CellGeometry& hint) {
  hint.validate();
  const int w = map.width, h = map.height;
  if (w < 4 || h < 4) throw FitError("map too small for grid fitting");
  const double mean = std::accumulate(map.values.begin(), map.values.end(), 0.0) / map.values.size();
  std::vector<double> a(map.values.size());
  double var = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = map.values[i] - mean;
    var += a[i] * a[i];
  }
  var /= a.size();
  if (!(var > 0.0)) throw FitError("constant map: no periodic structure");

  const double px = estimate_period(a, w, h, true, hint.width / map.pixel_pitch_um, var, "x") * map.pixel_pitch_um;
  const double py = estimate_period(a, w, h, false, hint.height / map.pixel_pitch_um, var, "y") * map.pixel_pitch_um;
  if (std::abs(px / hint.width - 1.0) > kAcceptWindow || std::abs(py / hint.height - 1.0) > kAcceptWindow) {
    std::ostringstream msg;
    msg << "fitted pitch " << px << " x " << py << " um deviates more than 10% from hint " << hint.width << " x "
        << hint.height << " um";
    throw FitError(msg.str());
  }

  std::array<Vec2, 4> sites;
  for (int i = 0; i < 4; ++i) {
    sites[i] = {hint.site_offsets[i].x * px / hint.width, hint.site_offsets[i].y * py / hint.height};
  }
  std::vector<double> tmp = map.values;
  const double background = median_inplace(tmp);
  const Rect ext = map.extent();
  const int kx = static_cast<int>(std::floor(ext.width() / px)) - 1;
  const int ky = static_cast<int>(std::floor(ext.height() / py)) - 1;
  if (kx < 1 || ky < 1) throw FitError("map covers fewer than two cells per axis");
  // Evaluate at most ~1500 cells per phase candidate.
  const int stride = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(kx) * ky / 1500.0)));

  auto site_energy = [&](Vec2 cell_origin) {
    double e = 0.0;
    for (const Vec2& s : sites) e += map.sample(cell_origin + s) - background;
    return e * 0.25;
  };

  constexpr int kPhaseSteps = 48;
  double best_energy = -std::numeric_limits<double>::infinity();
  Vec2 best_phase;
  for (int fy = 0; fy < kPhaseSteps; ++fy) {
    for (int fx = 0; fx < kPhaseSteps; ++fx) {
      const Vec2 phase{ext.x0 + px * fx / kPhaseSteps, ext.y0 + py * fy / kPhaseSteps};
      double e = 0.0;
      for (int j = 0; j < ky; j += stride) {
        for (int i = 0; i < kx; i += stride) e += site_energy(phase + Vec2{i * px, j * py});
      }
      if (e > best_energy) {
        best_energy = e;
        best_phase = phase;
      }
    }
  }

  // Cells whose site energy is well above background form the grid extent.
  std::vector<double> energy(static_cast<std::size_t>(kx) * ky);
  for (int j = 0; j < ky; ++j) {
    for (int i = 0; i < kx; ++i) energy[static_cast<std::size_t>(j) * kx + i] = site_energy(best_phase + Vec2{i * px, j * py});
  }
  const double high = percentile(energy, 95.0);
  if (!(high > 0.0)) throw FitError("no cells with signal above background");
  std::vector<char> lit(energy.size());
  for (std::size_t i = 0; i < energy.size(); ++i) lit[i] = energy[i] > 0.3 * high;

  // Largest 4-connected block of lit cells.
  std::vector<int> comp(lit.size(), -1);
  int best_comp = -1;
  std::size_t best_size = 0;
  int bi0 = 0, bj0 = 0, bi1 = -1, bj1 = -1;
  for (std::size_t s = 0; s < lit.size(); ++s) {
    if (!lit[s] || comp[s] >= 0) continue;
    const int id = static_cast<int>(s);
    std::deque<std::size_t> q{s};
    comp[s] = id;
    std::size_t size = 0;
    int i0 = kx, j0 = ky, i1 = -1, j1 = -1;
    while (!q.empty()) {
      const std::size_t p = q.front();
      q.pop_front();
      ++size;
      const int i = static_cast<int>(p % kx), j = static_cast<int>(p / kx);
      i0 = std::min(i0, i), i1 = std::max(i1, i), j0 = std::min(j0, j), j1 = std::max(j1, j);
      const int nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
      for (const auto& n : nb) {
        if (n[0] < 0 || n[0] >= kx || n[1] < 0 || n[1] >= ky) continue;
        const std::size_t q2 = static_cast<std::size_t>(n[1]) * kx + n[0];
        if (lit[q2] && comp[q2] < 0) {
          comp[q2] = id;
          q.push_back(q2);
        }
      }
    }
    if (size > best_size) {
      best_size = size;
      best_comp = id;
      bi0 = i0, bj0 = j0, bi1 = i1, bj1 = j1;
    }
  }
  if (best_comp < 0) throw FitError("no lit cells found");

  CellGrid g;
  g.pitch_x = px;
  g.pitch_y = py;
  g.origin = best_phase + Vec2{bi0 * px, bj0 * py};
  g.cols = bi1 - bi0 + 1;
  g.rows = bj1 - bj0 + 1;
  return g;
}

CellGrid anchor_grid(CellGrid grid, Vec2 nominal_origin, int rows, int cols) {
  const double kx = std::round((nominal_origin.x - grid.origin.x) / grid.pitch_x);
  const double ky = std::round((nominal_origin.y - grid.origin.y) / grid.pitch_y);
  grid.origin = grid.origin + Vec2{kx * grid.pitch_x, ky * grid.pitch_y};
  grid.rows = rows;
  grid.cols = cols;
  return grid;
}

CellGrid anchor_to_device(const CellGrid& fitted, const MemoryArrayModel& device, int row, int col) {
  const Vec2 nominal = cell_position(device, row, col);
  CellGrid g = anchor_grid(fitted, nominal, device.rows, device.cols);
  g.block_boundaries = device.block_boundaries;
  g.origin = g.origin - Vec2{col * g.pitch_x + device.block_offset(col), row * g.pitch_y};
  return g;
}

// ---------------------------------------------------------------------------

BitDecision classify_bit_quadrant(const CellPatch& patch, Diagonal polarity, double corner_fraction) {
  require_covered(patch.map, patch.cell);
  const Rect& c = patch.cell;
  const double fw = corner_fraction * c.width(), fh = corner_fraction * c.height();
  const Rect bl{c.x0, c.y0, c.x0 + fw, c.y0 + fh};
  const Rect br{c.x1 - fw, c.y0, c.x1, c.y0 + fh};
  const Rect tl{c.x0, c.y1 - fh, c.x0 + fw, c.y1};
  const Rect tr{c.x1 - fw, c.y1 - fh, c.x1, c.y1};
  auto mean = [&](const Rect& r) {
    const RegionStats s = region_stats(patch.map, r);
    if (s.count == 0) throw GeometryError("pixel pitch too coarse: a corner region contains no pixel");
    return s.sum / s.count;
  };
  const double tlbr = 0.5 * (mean(tl) + mean(br));
  const double bltr = 0.5 * (mean(bl) + mean(tr));
  const double score = polarity == Diagonal::TL_BR ? tlbr - bltr : bltr - tlbr;
  return {score > 0.0 ? 1 : 0, score, std::abs(score) / patch_noise(patch)};
}

BitDecision classify_bit_differential(const CellPatch& patch, double threshold, double core_inset) {
  require_covered(patch.map, patch.cell);
  const Rect& c = patch.cell;
  const Rect core{c.x0 + core_inset * c.width(), c.y0 + core_inset * c.height(), c.x1 - core_inset * c.width(),
                  c.y1 - core_inset * c.height()};
  const RegionStats s = region_stats(patch.map, core);
  if (s.count < 2) throw GeometryError("pixel pitch too coarse: cell core holds fewer than two pixels");
  const double mean = s.sum / s.count;
  const double std = std::sqrt(std::max(0.0, s.sum_sq / s.count - mean * mean));
  const double ratio = std / patch_noise(patch);
  return {ratio > threshold ? 1 : 0, ratio, std::abs(ratio - threshold)};
}

const char* classifier_name(Classifier c) {
  return c == Classifier::Quadrant ? "quadrant" : "differential";
}

Classifier parse_classifier(const std::string& name) {
  if (name == "quadrant") return Classifier::Quadrant;
  if (name == "differential") return Classifier::Differential;
  throw ConfigError("unknown classifier '" + name + "' (expected quadrant or differential)");
}

ExtractionReport extract_key(const ResponseMap& target, const ResponseMap* reference, const CellGrid& grid,
                             const BitMapping& mapping, const ExtractionSettings& settings) {
  if (grid.rows != mapping.rows || grid.cols != mapping.cols) {
    throw GeometryError("grid is " + std::to_string(grid.rows) + "x" + std::to_string(grid.cols) +
                        " but the bit mapping expects " + std::to_string(mapping.rows) + "x" +
                        std::to_string(mapping.cols));
  }
  mapping.validate(grid.rows, grid.cols);

  ResponseMap diff;
  const ResponseMap* source = &target;
  if (settings.classifier == Classifier::Differential) {
    if (!reference) throw ConfigError("differential classification needs a reference map");
    diff = subtract_maps(target, *reference);
    source = &diff;
  }
  const double noise = std::max(robust_noise_rms(*source), kNoiseFloor);
  const double target_noise =
      source == &target ? noise : std::max(robust_noise_rms(target), kNoiseFloor);

  std::vector<int> index_of(static_cast<std::size_t>(grid.rows) * grid.cols, -1);
  for (const auto& e : mapping.entries) index_of[static_cast<std::size_t>(e.row) * grid.cols + e.col] = e.bit_index;

  ExtractionReport report;
  report.settings = settings;
  report.grid = grid;
  report.noise_rms = noise;
  report.cells.resize(index_of.size());

  const int n = static_cast<int>(index_of.size());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const int r = i / grid.cols, c = i % grid.cols;
    CellDecision& d = report.cells[static_cast<std::size_t>(i)];
    d.row = r;
    d.col = c;
    d.bit_index = index_of[static_cast<std::size_t>(i)];
    const Rect cell = grid.cell_rect(r, c);
    BitDecision b;
    if (d.bit_index < 0 || settings.classifier == Classifier::Quadrant) {
      b = classify_bit_quadrant({target, cell, target_noise}, settings.polarity, settings.corner_fraction);
    } else {
      b = classify_bit_differential({*source, cell, noise}, settings.threshold, settings.core_inset);
    }
    d.bit = b.bit;
    d.score = b.score;
    d.confidence = b.confidence;
    d.low_confidence = b.confidence < settings.confidence_floor;
  }

  for (const auto& d : report.cells) {
    if (d.bit_index < 0) continue;
    report.key.set_bit(d.bit_index, d.bit != 0);
    if (d.low_confidence) report.low_confidence_bits.push_back(d.bit_index);
  }
  std::sort(report.low_confidence_bits.begin(), report.low_confidence_bits.end(), std::greater<>());

  static constexpr char kDigits[] = "0123456789abcdef";
  for (int r : mapping.metadata_rows) {
    std::string hex = "0x";
    for (int c0 = 0; c0 < grid.cols; c0 += 4) {
      int nibble = 0;
      for (int c = c0; c < c0 + 4; ++c) {
        nibble <<= 1;
        if (c < grid.cols) nibble |= report.cells[static_cast<std::size_t>(r) * grid.cols + c].bit;
      }
      hex.push_back(kDigits[nibble]);
    }
    report.metadata_hex.push_back(hex);
  }
  return report;
}

BitMatrix extract_sram_word(const ResponseMap& map, const CellGrid& grid, const CellRange& range, Diagonal polarity,
                            double corner_fraction) {
  if (range.rows() <= 0 || range.cols() <= 0) throw GeometryError("empty cell range");
  const double noise = std::max(robust_noise_rms(map), kNoiseFloor);
  BitMatrix out;
  out.rows = range.rows();
  out.cols = range.cols();
  out.bits.resize(static_cast<std::size_t>(out.rows) * out.cols);
  out.confidence.resize(out.bits.size());
  for (int r = 0; r < out.rows; ++r) {
    for (int c = 0; c < out.cols; ++c) {
      const Rect cell = grid.cell_rect(range.row_first + r, range.col_first + c);
      const BitDecision b = classify_bit_quadrant({map, cell, noise}, polarity, corner_fraction);
      out.bits[static_cast<std::size_t>(r) * out.cols + c] = static_cast<std::uint8_t>(b.bit);
      out.confidence[static_cast<std::size_t>(r) * out.cols + c] = b.confidence;
    }
  }
  return out;
}

}  // namespace tlsbench
