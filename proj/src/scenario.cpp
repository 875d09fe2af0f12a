#include "tlsbench/scenario.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tlsbench/errors.hpp"
#include "tlsbench/rng.hpp"

namespace tlsbench {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : obj.items()) {
    if (!ok.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback) {
  const auto it = obj.find(key);
  return it == obj.end() ? fallback : it->template get<T>();
}

Vec2 to_vec2(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

Rect to_rect(const json& j) {
  if (!j.is_array() || j.size() != 4) throw ConfigError("expected [x0, y0, x1, y1]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

std::uint64_t to_u64(const json& j) {
  if (j.is_number_unsigned() || j.is_number_integer()) return j.get<std::uint64_t>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(s, &used, 0);
    if (used != s.size()) throw ConfigError("not an integer: " + s);
    return v;
  }
  throw ConfigError("expected an unsigned integer");
}

Diagonal parse_diagonal(const std::string& s) {
  if (s == "TL_BR") return Diagonal::TL_BR;
  if (s == "BL_TR") return Diagonal::BL_TR;
  throw ConfigError("polarity must be TL_BR or BL_TR, got '" + s + "'");
}

PowerMode parse_mode(const std::string& s) {
  if (s == "Active" || s == "active") return PowerMode::Active;
  if (s == "LowPower" || s == "low_power" || s == "LPM4") return PowerMode::LowPower;
  throw ConfigError("mode must be Active or LowPower, got '" + s + "'");
}

Fill parse_fill(const std::string& s) {
  if (s == "zeros") return Fill::Zeros;
  if (s == "ones") return Fill::Ones;
  if (s == "random") return Fill::Random;
  throw ConfigError("fill must be zeros, ones or random, got '" + s + "'");
}

CellGeometry parse_cell(const json& j) {
  check_keys(j, {"width_um", "height_um", "site_inset", "site_offsets_um"}, "device.cell");
  const double w = j.at("width_um").get<double>();
  const double h = j.at("height_um").get<double>();
  CellGeometry g = CellGeometry::corner_inset(w, h, get_or(j, "site_inset", 0.15));
  if (j.contains("site_offsets_um")) {
    const json& offs = j.at("site_offsets_um");
    if (!offs.is_array() || offs.size() != 4) throw ConfigError("device.cell.site_offsets_um needs four [x, y]");
    for (int i = 0; i < 4; ++i) g.site_offsets[i] = to_vec2(offs[i]);
  }
  return g;
}

MemoryArrayModel parse_device(const json& j, double& sensitivity_sigma) {
  check_keys(j,
             {"rows", "cols", "cell", "polarity", "origin_um", "block_boundaries", "sensitivity_sigma",
              "distractors"},
             "device");
  std::vector<BlockBoundary> blocks;
  for (const auto& b : get_or(j, "block_boundaries", json::array())) {
    check_keys(b, {"start_col", "offset_um"}, "device.block_boundaries");
    blocks.push_back({b.at("start_col").get<int>(), b.at("offset_um").get<double>()});
  }
  auto m = MemoryArrayModel::make(j.at("rows").get<int>(), j.at("cols").get<int>(), parse_cell(j.at("cell")),
                                  parse_diagonal(j.at("polarity").get<std::string>()),
                                  to_vec2(get_or(j, "origin_um", json::array({0.0, 0.0}))), std::move(blocks));
  for (const auto& d : get_or(j, "distractors", json::array())) {
    check_keys(d, {"area_um", "amplitude"}, "device.distractors");
    m.distractors.push_back({to_rect(d.at("area_um")), get_or(d, "amplitude", 1.0)});
  }
  sensitivity_sigma = get_or(j, "sensitivity_sigma", 0.15);
  m.validate();
  return m;
}

DeviceElectrical parse_electrical(const json& j) {
  check_keys(j,
             {"baseline_current_A", "baseline_noise_rms_A", "lowpower_noise_rms_A", "mode", "injected_noise_rms_A"},
             "electrical");
  DeviceElectrical e;
  e.baseline_current = get_or(j, "baseline_current_A", 0.0);
  e.baseline_noise_rms = get_or(j, "baseline_noise_rms_A", 0.0);
  e.lowpower_noise_rms = get_or(j, "lowpower_noise_rms_A", 0.0);
  e.mode = parse_mode(get_or<std::string>(j, "mode", "LowPower"));
  e.injected_noise_rms = get_or(j, "injected_noise_rms_A", 0.0);
  e.validate();
  return e;
}

OpticsConfig parse_optics(const json& j) {
  check_keys(j,
             {"wavelength_nm", "numerical_aperture", "magnification", "laser_current_mA", "delivered_power_mW",
              "silicon_thickness_um", "thickness_correction_um", "sil_factor", "defocus_gain", "delta_per_mW_A"},
             "optics");
  OpticsConfig o;
  o.wavelength_nm = get_or(j, "wavelength_nm", o.wavelength_nm);
  o.numerical_aperture = get_or(j, "numerical_aperture", o.numerical_aperture);
  o.magnification = get_or(j, "magnification", o.magnification);
  o.laser_current_mA = get_or(j, "laser_current_mA", o.laser_current_mA);
  o.delivered_power_mW = j.contains("delivered_power_mW") ? j.at("delivered_power_mW").get<double>()
                                                           : power_from_laser_current(o.laser_current_mA).power_mW;
  o.silicon_thickness_um = get_or(j, "silicon_thickness_um", o.silicon_thickness_um);
  o.thickness_correction_um = get_or(j, "thickness_correction_um", o.silicon_thickness_um);
  o.sil_factor = get_or(j, "sil_factor", o.sil_factor);
  o.defocus_gain = get_or(j, "defocus_gain", o.defocus_gain);
  o.delta_per_mW = get_or(j, "delta_per_mW_A", o.delta_per_mW);
  o.validate();
  return o;
}

Instrument parse_instrument(const json& j) {
  check_keys(j, {"stage", "preamp", "digitizer", "refocus_time_s"}, "instrument");
  Instrument ins;
  if (j.contains("stage")) {
    const json& s = j.at("stage");
    check_keys(s,
               {"step_resolution_um", "max_speed_um_s", "drift_nm_s", "blur_rate_um_per_min", "travel_limits_um"},
               "instrument.stage");
    auto& st = ins.stage;
    st.step_resolution_um = get_or(s, "step_resolution_um", st.step_resolution_um);
    st.max_speed_um_s = get_or(s, "max_speed_um_s", st.max_speed_um_s);
    if (s.contains("drift_nm_s")) st.drift_nm_s = to_vec2(s.at("drift_nm_s"));
    st.blur_rate_um_per_min = get_or(s, "blur_rate_um_per_min", st.blur_rate_um_per_min);
    if (s.contains("travel_limits_um")) st.travel_limits = to_rect(s.at("travel_limits_um"));
  }
  if (j.contains("preamp")) {
    const json& p = j.at("preamp");
    check_keys(p, {"sensitivity_A_per_V", "input_offset_A", "bias_voltage_V", "output_limit_V", "input_noise_rms_A"},
               "instrument.preamp");
    auto& pa = ins.preamp;
    pa.sensitivity_A_per_V = get_or(p, "sensitivity_A_per_V", pa.sensitivity_A_per_V);
    pa.input_offset_A = get_or(p, "input_offset_A", pa.input_offset_A);
    pa.bias_voltage_V = get_or(p, "bias_voltage_V", pa.bias_voltage_V);
    pa.output_limit_V = get_or(p, "output_limit_V", pa.output_limit_V);
    pa.input_noise_rms_A = get_or(p, "input_noise_rms_A", pa.input_noise_rms_A);
  }
  if (j.contains("digitizer")) {
    const json& d = j.at("digitizer");
    check_keys(d, {"sample_rate_Hz", "bits", "input_range_V"}, "instrument.digitizer");
    auto& dg = ins.digitizer;
    dg.sample_rate_Hz = get_or(d, "sample_rate_Hz", dg.sample_rate_Hz);
    dg.bits = get_or(d, "bits", dg.bits);
    dg.input_range_V = get_or(d, "input_range_V", dg.input_range_V);
  }
  ins.refocus_time_s = get_or(j, "refocus_time_s", ins.refocus_time_s);
  ins.validate();
  return ins;
}

Rect plan_region(const json& j, const MemoryArrayModel& device) {
  if (j.is_array()) return to_rect(j);
  check_keys(j, {"footprint", "cells", "margin_um"}, "plan.region");
  const double margin = get_or(j, "margin_um", 0.0);
  if (j.contains("cells")) {
    const json& c = j.at("cells");
    check_keys(c, {"rows", "cols"}, "plan.region.cells");
    const int r0 = c.at("rows").at(0).get<int>(), r1 = c.at("rows").at(1).get<int>();
    const int c0 = c.at("cols").at(0).get<int>(), c1 = c.at("cols").at(1).get<int>();
    try {
      const Rect lo = cell_rect(device, r0, c0);
      const Rect hi = cell_rect(device, r1, c1);
      return Rect{lo.x0, lo.y0, hi.x1, hi.y1}.expanded(margin);
    } catch (const std::out_of_range&) {
      throw ConfigError("plan.region.cells outside the device array");
    }
  }
  if (get_or(j, "footprint", false)) return device.footprint().expanded(margin);
  throw ConfigError("plan.region needs [x0, y0, x1, y1], footprint or cells");
}

ScanPlan parse_plan(const json& j, const std::string& name, const MemoryArrayModel& device) {
  check_keys(j,
             {"name", "region_um", "pixel_pitch_um", "stage_speed_um_s", "samples_per_pixel", "fast_axis",
              "serpentine", "turnaround_s", "refocus_every_n_lines", "motion_blur"},
             "plan " + name);
  ScanPlan p;
  p.name = get_or<std::string>(j, "name", name);
  p.region = plan_region(j.at("region_um"), device);
  p.pixel_pitch_um = get_or(j, "pixel_pitch_um", p.pixel_pitch_um);
  p.stage_speed_um_s = get_or(j, "stage_speed_um_s", p.stage_speed_um_s);
  p.samples_per_pixel = get_or(j, "samples_per_pixel", p.samples_per_pixel);
  const std::string axis = get_or<std::string>(j, "fast_axis", "vertical");
  if (axis == "vertical") {
    p.fast_axis = FastAxis::Vertical;
  } else if (axis == "horizontal") {
    p.fast_axis = FastAxis::Horizontal;
  } else {
    throw ConfigError("fast_axis must be vertical or horizontal");
  }
  p.serpentine = get_or(j, "serpentine", p.serpentine);
  p.turnaround_s = get_or(j, "turnaround_s", p.turnaround_s);
  p.refocus_every_n_lines = get_or(j, "refocus_every_n_lines", p.refocus_every_n_lines);
  p.motion_blur = get_or(j, "motion_blur", p.motion_blur);
  p.validate();
  return p;
}

BitMapping parse_mapping(const json& j) {
  check_keys(j, {"layout", "rows", "cols", "metadata_rows", "entries"}, "mapping");
  const int rows = j.at("rows").get<int>();
  const int cols = j.at("cols").get<int>();
  const auto meta = get_or(j, "metadata_rows", std::vector<int>{});
  const std::string layout = get_or<std::string>(j, "layout", "table");
  BitMapping m;
  if (layout == "row_major_msb_top_left") {
    m = BitMapping::row_major_msb_top_left(rows, cols, meta);
  } else if (layout == "table") {
    m.rows = rows;
    m.cols = cols;
    m.metadata_rows = meta;
    for (const auto& e : j.at("entries")) {
      if (!e.is_array() || e.size() != 3) throw ConfigError("mapping entries are [row, col, bit_index]");
      m.entries.push_back({e[0].get<int>(), e[1].get<int>(), e[2].get<int>()});
    }
  } else {
    throw ConfigError("unknown mapping layout '" + layout + "'");
  }
  return m;
}

ContentSpec parse_contents(const json& j, const std::string& where) {
  check_keys(j, {"fill", "key", "set_bits", "powered", "mode", "injected_noise_rms_A"}, where);
  ContentSpec c;
  if (j.contains("fill")) c.fill = parse_fill(j.at("fill").get<std::string>());
  if (j.contains("key")) c.key = Key256::from_hex(j.at("key").get<std::string>());
  for (const auto& b : get_or(j, "set_bits", json::array())) {
    if (!b.is_array() || b.size() != 3) throw ConfigError(where + ".set_bits entries are [row, col, value]");
    c.set_bits.push_back({b[0].get<int>(), b[1].get<int>(), b[2].get<int>()});
  }
  if (j.contains("powered")) c.powered = j.at("powered").get<bool>();
  if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
  if (j.contains("injected_noise_rms_A")) c.injected_noise_rms_A = j.at("injected_noise_rms_A").get<double>();
  return c;
}

ContentSpec overlay(ContentSpec base, const ContentSpec& top) {
  if (top.fill) base.fill = top.fill;
  // A state that sets its own fill starts from a clean slate.
  if (top.fill && !top.key) base.key.reset();
  if (top.key) base.key = top.key;
  if (top.fill || top.key || !top.set_bits.empty()) base.set_bits = top.set_bits;
  if (top.powered) base.powered = top.powered;
  if (top.mode) base.mode = top.mode;
  if (top.injected_noise_rms_A) base.injected_noise_rms_A = top.injected_noise_rms_A;
  return base;
}

fs::path resolve(const fs::path& base_dir, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

// Merges "base" chains: the including file wins.
json expand_base(json j, const fs::path& base_dir, int depth = 0) {
  if (depth > 8) throw ConfigError("scenario base chain too deep");
  if (!j.contains("base")) return j;
  const fs::path base_path = resolve(base_dir, j.at("base").get<std::string>());
  json merged = expand_base(read_json(base_path), base_path.parent_path(), depth + 1);
  j.erase("base");
  merged.merge_patch(j);
  return merged;
}

Scenario build(const json& raw, const fs::path& base_dir) {
  const json j = expand_base(raw, base_dir);
  check_keys(j,
             {"name", "description", "seed", "device", "electrical", "optics", "instrument", "plans", "mapping",
              "metadata_word", "contents", "states", "galvo"},
             "scenario");
  Scenario s;
  s.name = get_or<std::string>(j, "name", "scenario");
  s.seed = j.contains("seed") ? to_u64(j.at("seed")) : 0;
  s.device = parse_device(j.at("device"), s.sensitivity_sigma);
  s.electrical = parse_electrical(get_or(j, "electrical", json::object()));
  s.optics = parse_optics(get_or(j, "optics", json::object()));
  s.instrument = parse_instrument(get_or(j, "instrument", json::object()));
  const json plans = get_or(j, "plans", json::object());
  for (const auto& [name, entry] : plans.items()) {
    s.plans[name] = entry.is_string() ? parse_plan_file(resolve(base_dir, entry.get<std::string>()), s.device)
                                     : parse_plan(entry, name, s.device);
    s.plans[name].name = name;
  }
  if (j.contains("mapping")) {
    const json& m = j.at("mapping");
    s.mapping = m.is_string() ? load_mapping(resolve(base_dir, m.get<std::string>())) : parse_mapping(m);
  }
  s.metadata_word = j.contains("metadata_word") ? to_u64(j.at("metadata_word")) : 0;
  s.contents = parse_contents(get_or(j, "contents", json::object()), "contents");
  const json states = get_or(j, "states", json::object());
  for (const auto& [name, entry] : states.items()) {
    if (name == "default") throw ConfigError("state name 'default' is reserved");
    s.states[name] = parse_contents(entry, "states." + name);
  }
  if (j.contains("galvo")) {
    const json& g = j.at("galvo");
    check_keys(g, {"plan", "reference_time_s", "line_overhead_s"}, "galvo");
    s.galvo = GalvoCalibration{g.at("plan").get<std::string>(), g.at("reference_time_s").get<double>(),
                               get_or(g, "line_overhead_s", 0.0)};
  }
  s.validate();
  return s;
}

}  // namespace

std::vector<std::string> Scenario::state_names() const {
  std::vector<std::string> names{"default"};
  for (const auto& [k, v] : states) names.push_back(k);
  return names;
}

const ScanPlan& Scenario::plan(const std::string& plan_name) const {
  const auto it = plans.find(plan_name);
  if (it == plans.end()) {
    std::string known;
    for (const auto& [k, v] : plans) known += (known.empty() ? "" : ", ") + k;
    throw ConfigError("scenario '" + name + "' has no plan '" + plan_name + "' (available: " + known + ")");
  }
  return it->second;
}

ContentSpec Scenario::resolved_contents(const std::string& state) const {
  if (state == "default") return contents;
  const auto it = states.find(state);
  if (it == states.end()) throw ConfigError("scenario '" + name + "' has no state '" + state + "'");
  return overlay(contents, it->second);
}

Scene Scenario::scene(const std::string& state, std::uint64_t run_seed) const {
  const ContentSpec c = resolved_contents(state);
  Scene sc;
  sc.device = device;
  apply_sensitivity_variation(sc.device, sensitivity_sigma, stream_seed(run_seed, fnv1a("sensitivity")));

  const Fill fill = c.fill.value_or(Fill::Zeros);
  if (fill == Fill::Ones) {
    std::fill(sc.device.bits.begin(), sc.device.bits.end(), std::uint8_t{1});
  } else if (fill == Fill::Random) {
    SplitMix64 rng(stream_seed(run_seed, fnv1a("fill")));
    for (auto& b : sc.device.bits) b = static_cast<std::uint8_t>(rng() >> 63);
  }
  if (c.key) {
    if (!mapping) throw ConfigError("state '" + state + "' loads a key but the scenario has no bit mapping");
    sc.device = load_key(std::move(sc.device), *c.key, *mapping, metadata_word);
  }
  for (const auto& [r, col, v] : c.set_bits) {
    if (r < 0 || r >= sc.device.rows || col < 0 || col >= sc.device.cols) {
      throw ConfigError("set_bits cell (" + std::to_string(r) + ", " + std::to_string(col) + ") outside the array");
    }
    sc.device.set_bit(r, col, v);
  }
  sc.device.powered = c.powered.value_or(true);

  sc.electrical = electrical;
  if (c.mode) sc.electrical.mode = *c.mode;
  if (c.injected_noise_rms_A) sc.electrical.injected_noise_rms = *c.injected_noise_rms_A;
  sc.electrical.validate();
  sc.spot = spot_from_optics(optics);
  return sc;
}

Key256 Scenario::loaded_key(const std::string& state) const {
  const ContentSpec c = resolved_contents(state);
  if (c.key) return *c.key;
  if (!mapping) return {};
  return decode_key(scene(state).device, *mapping);
}

std::uint64_t Scenario::stream_seed_for(std::uint64_t run_seed, const std::string& plan_name,
                                        const std::string& state) {
  return stream_seed(run_seed, fnv1a(plan_name + "/" + state));
}

ResponseMap Scenario::scan(const std::string& plan_name, const std::string& state, std::uint64_t run_seed,
                           bool reference_engine) const {
  const ScanPlan& p = plan(plan_name);
  const Scene sc = scene(state, run_seed);
  const std::uint64_t stream = stream_seed_for(run_seed, plan_name, state);
  ResponseMap map = reference_engine ? execute_scan_reference(sc, instrument, p, stream)
                                     : execute_scan(sc, instrument, p, stream);
  map.meta.scenario = name;
  map.meta.state = state;
  map.meta.seed = run_seed;
  map.meta.stream_seed = stream;
  return map;
}

GalvoModel Scenario::galvo_model() const {
  if (!galvo) throw ConfigError("scenario '" + name + "' has no galvo calibration");
  return {calibrate_galvo_dwell(plan(galvo->plan), galvo->reference_time_s, galvo->line_overhead_s),
          galvo->line_overhead_s};
}

void Scenario::validate() const {
  device.validate();
  electrical.validate();
  optics.validate();
  instrument.validate();
  for (const auto& [k, p] : plans) p.validate(instrument);
  if (mapping) mapping->validate(device.rows, device.cols);
  if (galvo) plan(galvo->plan);
  for (const auto& st : state_names()) {
    const ContentSpec c = resolved_contents(st);
    if (c.key && !mapping) throw ConfigError("state '" + st + "' loads a key but the scenario has no bit mapping");
  }
}

Scenario load_scenario(const fs::path& path) {
  const json j = read_json(path);
  try {
    return build(j, path.parent_path());
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

Scenario parse_scenario(const std::string& json_text, const fs::path& base_dir) {
  try {
    return build(json::parse(json_text), base_dir);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
}

ScanPlan parse_plan_file(const fs::path& path, const MemoryArrayModel& device) {
  try {
    return parse_plan(read_json(path), path.stem().string(), device);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

BitMapping load_mapping(const fs::path& path) {
  try {
    return parse_mapping(read_json(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

fs::path scenario_dir() { return fs::path(TLSBENCH_SOURCE_DIR) / "scenarios"; }

}  // namespace tlsbench
