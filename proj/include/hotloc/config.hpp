#pragma once

#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hotloc/evaluator.hpp"
#include "hotloc/localizer.hpp"
#include "hotloc/scenario.hpp"

namespace hotloc {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace cfgdetail {

using nlohmann::json;

inline void expect_keys(const json& obj, const std::string& where,
                        const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError(where + "." + it.key() + ": unknown key");
}

inline double get_num(const json& obj, const std::string& where,
                      const std::string& key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number())
    throw ConfigError(where + "." + key + ": expected a number");
  return obj[key].get<double>();
}

inline std::int64_t get_int(const json& obj, const std::string& where,
                            const std::string& key, std::int64_t fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer())
    throw ConfigError(where + "." + key + ": expected an integer");
  return obj[key].get<std::int64_t>();
}

inline bool get_bool(const json& obj, const std::string& where,
                     const std::string& key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean())
    throw ConfigError(where + "." + key + ": expected a boolean");
  return obj[key].get<bool>();
}

inline std::string get_str(const json& obj, const std::string& where,
                           const std::string& key,
                           const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_string())
    throw ConfigError(where + "." + key + ": expected a string");
  return obj[key].get<std::string>();
}

inline const json& require(const json& obj, const std::string& where,
                           const std::string& key) {
  if (!obj.contains(key)) throw ConfigError(where + "." + key + ": missing");
  return obj[key];
}

}  // namespace cfgdetail

struct HotspotSpec {
  double x = 0.0;
  double y = 0.0;
  double weight = 1.0;
  double radius_m = 0.0;  // 0 = single pixel
};

struct PathsConfig {
  std::string out_dir = "out";
  std::string kpi_file = "kpis.csv";
  std::string radio_file = "radio_map.csv";
  std::string truth_file = "truth.csv";
  std::string weights_file = "weights.csv";
};

struct EvaluationConfig {
  std::int64_t cdf_points = 100;
  bool mass_weighted_cdf = false;
  std::vector<double> thresholds = default_detection_thresholds();
};

struct RunConfig {
  Scenario scenario;
  FusionConfig fusion;
  PathsConfig paths;
  EvaluationConfig evaluation;
  std::vector<HotspotSpec> hotspots;  // kept for reference after building
};

namespace cfgdetail {

inline PixelGrid parse_grid(const json& j) {
  const std::string where = "scenario.grid";
  expect_keys(j, where,
              {"origin_x", "origin_y", "width", "height", "resolution_m"});
  PixelGrid g;
  g.origin.x = get_num(j, where, "origin_x", 0.0);
  g.origin.y = get_num(j, where, "origin_y", 0.0);
  g.width = static_cast<int>(get_int(j, where, "width", 0));
  g.height = static_cast<int>(get_int(j, where, "height", 0));
  g.resolution = get_num(j, where, "resolution_m", 25.0);
  if (g.resolution <= 0.0)
    throw ConfigError(where + ".resolution_m: must be > 0");
  if (g.width < 1) throw ConfigError(where + ".width: must be >= 1");
  if (g.height < 1) throw ConfigError(where + ".height: must be >= 1");
  return g;
}

inline std::vector<Cell> parse_layout(const json& j) {
  const std::string where = "scenario.layout";
  const std::string type = get_str(j, where, "type", "hex");
  if (type == "hex") {
    expect_keys(j, where,
                {"type", "n_sites", "isd_m", "beamwidth_deg", "tx_power_dbm",
                 "azimuth0_deg", "center_x", "center_y"});
    const int n_sites = static_cast<int>(get_int(j, where, "n_sites", 7));
    if (n_sites < 1) throw ConfigError(where + ".n_sites: must be >= 1");
    const double isd = get_num(j, where, "isd_m", 500.0);
    if (isd <= 0.0) throw ConfigError(where + ".isd_m: must be > 0");
    const Point center{get_num(j, where, "center_x", 0.0),
                       get_num(j, where, "center_y", 0.0)};
    return tri_sector_cells(hex_site_positions(n_sites, isd, center),
                            get_num(j, where, "beamwidth_deg", 65.0),
                            get_num(j, where, "tx_power_dbm", 46.0),
                            get_num(j, where, "azimuth0_deg", 0.0));
  }
  if (type == "explicit") {
    expect_keys(j, where, {"type", "cells"});
    const json& arr = require(j, where, "cells");
    if (!arr.is_array()) throw ConfigError(where + ".cells: expected an array");
    std::vector<Cell> cells;
    int idx = 0;
    for (const json& cj : arr) {
      const std::string cw = where + ".cells[" + std::to_string(idx++) + "]";
      expect_keys(cj, cw,
                  {"id", "x", "y", "azimuth_deg", "beamwidth_deg",
                   "tx_power_dbm", "max_backoff_db"});
      Cell c;
      c.id = static_cast<int>(get_int(cj, cw, "id", idx - 1));
      c.site.x = get_num(cj, cw, "x", 0.0);
      c.site.y = get_num(cj, cw, "y", 0.0);
      c.azimuth_deg = get_num(cj, cw, "azimuth_deg", 0.0);
      c.beamwidth_deg = get_num(cj, cw, "beamwidth_deg", 65.0);
      c.tx_power_dbm = get_num(cj, cw, "tx_power_dbm", 46.0);
      c.max_backoff_db = get_num(cj, cw, "max_backoff_db", 30.0);
      try {
        c.validate();
      } catch (const std::exception& e) {
        throw ConfigError(cw + ": " + e.what());
      }
      cells.push_back(c);
    }
    return cells;
  }
  throw ConfigError(where + ".type: must be 'hex' or 'explicit'");
}

inline Raster<double> build_intensity(const json& j, const PixelGrid& grid,
                                      std::vector<HotspotSpec>* out_spots) {
  const std::string where = "scenario.intensity";
  expect_keys(j, where, {"uniform", "hotspots"});
  Raster<double> intensity(grid, get_num(j, where, "uniform", 0.0));
  if (intensity.data()[0] < 0.0)
    throw ConfigError(where + ".uniform: must be >= 0");
  // `uniform` is total background mass spread over the grid
  const double per_pixel = intensity.data()[0] / grid.n_pixels();
  for (double& v : intensity) v = per_pixel;
  if (j.contains("hotspots")) {
    const json& arr = j["hotspots"];
    if (!arr.is_array())
      throw ConfigError(where + ".hotspots: expected an array");
    int idx = 0;
    for (const json& hj : arr) {
      const std::string hw = where + ".hotspots[" + std::to_string(idx++) + "]";
      expect_keys(hj, hw, {"x", "y", "weight", "radius_m"});
      HotspotSpec h;
      h.x = get_num(hj, hw, "x", 0.0);
      h.y = get_num(hj, hw, "y", 0.0);
      h.weight = get_num(hj, hw, "weight", 1.0);
      h.radius_m = get_num(hj, hw, "radius_m", 0.0);
      if (h.weight < 0.0) throw ConfigError(hw + ".weight: must be >= 0");
      if (h.radius_m < 0.0) throw ConfigError(hw + ".radius_m: must be >= 0");
      if (!grid.contains({h.x, h.y}))
        throw ConfigError(hw + ": hotspot center outside the grid");
      if (out_spots) out_spots->push_back(h);
      // spread the hotspot mass uniformly over pixels within radius
      std::vector<std::size_t> members;
      if (h.radius_m <= 0.0) {
        members.push_back(grid.pixel_of({h.x, h.y}));
      } else {
        for (std::size_t p = 0; p < grid.n_pixels(); ++p)
          if (distance(grid.center(p), {h.x, h.y}) <= h.radius_m)
            members.push_back(p);
        if (members.empty()) members.push_back(grid.pixel_of({h.x, h.y}));
      }
      for (std::size_t p : members)
        intensity[p] += h.weight / members.size();
    }
  }
  return intensity;
}

inline Scenario parse_scenario(const json& j,
                               std::vector<HotspotSpec>* out_spots) {
  const std::string where = "scenario";
  expect_keys(j, where,
              {"grid", "layout", "intensity", "bandwidth_hz",
               "arrival_rate_per_s", "file_size_bits", "mobile_fraction",
               "speed_mps", "period_s", "n_periods", "seed",
               "shadowing_sigma_db", "hysteresis_db", "noise_figure_db",
               "ta_bin_width_m", "aoa_bin_width_deg", "aoa_noise_deg",
               "max_attached"});
  Scenario sc;
  sc.grid = parse_grid(require(j, where, "grid"));
  sc.cells = parse_layout(require(j, where, "layout"));
  sc.bandwidth_hz = get_num(j, where, "bandwidth_hz", 20e6);
  sc.arrival_rate_per_s = get_num(j, where, "arrival_rate_per_s", 1.0);
  sc.file_size_bits = get_num(j, where, "file_size_bits", 1e6);
  sc.mobile_fraction = get_num(j, where, "mobile_fraction", 0.3);
  sc.speed_mps = get_num(j, where, "speed_mps", 2.315);
  sc.period_s = get_num(j, where, "period_s", 900.0);
  sc.n_periods = static_cast<int>(get_int(j, where, "n_periods", 4));
  sc.seed = static_cast<std::uint64_t>(get_int(j, where, "seed", 1));
  sc.shadowing_sigma_db = get_num(j, where, "shadowing_sigma_db", 0.0);
  sc.hysteresis_db = get_num(j, where, "hysteresis_db", 3.0);
  sc.noise_figure_db = get_num(j, where, "noise_figure_db", 9.0);
  sc.ta_bin_width_m = get_num(j, where, "ta_bin_width_m", kDefaultTaBinWidthM);
  sc.aoa_bin_width_deg = get_num(j, where, "aoa_bin_width_deg", 10.0);
  sc.aoa_noise_deg = get_num(j, where, "aoa_noise_deg", 0.0);
  sc.max_attached = get_int(j, where, "max_attached", 0);
  if (sc.period_s < 1.0) throw ConfigError(where + ".period_s: must be >= 1");
  sc.intensity = build_intensity(require(j, where, "intensity"), sc.grid,
                                 out_spots);
  try {
    sc.validate();
  } catch (const std::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return sc;
}

inline FusionConfig parse_fusion(const json& j) {
  const std::string where = "fusion";
  expect_keys(j, where,
              {"alpha", "lambda_m", "load_tolerance", "candidate_margin_db",
               "throughput_threshold", "normalizing_constant", "edge_fraction",
               "use_load_correlation", "load_correlation_threshold",
               "edge_variant"});
  FusionConfig f;
  if (j.contains("alpha")) {
    const json& a = j["alpha"];
    if (!a.is_array() || a.size() != 5)
      throw ConfigError(where + ".alpha: expected an array of 5 numbers");
    for (std::size_t k = 0; k < 5; ++k) {
      if (!a[k].is_number())
        throw ConfigError(where + ".alpha: expected an array of 5 numbers");
      f.alpha[k] = a[k].get<double>();
    }
  }
  f.lambda_m = get_num(j, where, "lambda_m", f.lambda_m);
  f.load_tolerance = get_num(j, where, "load_tolerance", f.load_tolerance);
  f.candidate_margin_db =
      get_num(j, where, "candidate_margin_db", f.candidate_margin_db);
  f.throughput_threshold =
      get_num(j, where, "throughput_threshold", f.throughput_threshold);
  f.normalizing_constant =
      get_num(j, where, "normalizing_constant", f.normalizing_constant);
  f.edge_fraction = get_num(j, where, "edge_fraction", f.edge_fraction);
  f.use_load_correlation =
      get_bool(j, where, "use_load_correlation", f.use_load_correlation);
  f.load_correlation_threshold = get_num(j, where, "load_correlation_threshold",
                                         f.load_correlation_threshold);
  const std::string variant = get_str(j, where, "edge_variant", "literal");
  if (variant == "literal") {
    f.edge_variant = EdgeWeightVariant::kLiteral;
  } else if (variant == "inverse") {
    f.edge_variant = EdgeWeightVariant::kInverse;
  } else {
    throw ConfigError(where + ".edge_variant: must be 'literal' or 'inverse'");
  }
  try {
    f.validate();
  } catch (const std::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return f;
}

inline PathsConfig parse_paths(const json& j) {
  const std::string where = "paths";
  expect_keys(j, where,
              {"out_dir", "kpi_file", "radio_file", "truth_file",
               "weights_file"});
  PathsConfig p;
  p.out_dir = get_str(j, where, "out_dir", p.out_dir);
  p.kpi_file = get_str(j, where, "kpi_file", p.kpi_file);
  p.radio_file = get_str(j, where, "radio_file", p.radio_file);
  p.truth_file = get_str(j, where, "truth_file", p.truth_file);
  p.weights_file = get_str(j, where, "weights_file", p.weights_file);
  std::set<std::string> distinct{p.kpi_file, p.radio_file, p.truth_file,
                                 p.weights_file};
  if (distinct.size() != 4)
    throw ConfigError(where + ": referenced file names must be distinct");
  return p;
}

inline EvaluationConfig parse_evaluation(const json& j) {
  const std::string where = "evaluation";
  expect_keys(j, where, {"cdf_points", "mass_weighted_cdf", "thresholds"});
  EvaluationConfig e;
  e.cdf_points = get_int(j, where, "cdf_points", e.cdf_points);
  if (e.cdf_points < 2) throw ConfigError(where + ".cdf_points: must be >= 2");
  e.mass_weighted_cdf =
      get_bool(j, where, "mass_weighted_cdf", e.mass_weighted_cdf);
  if (j.contains("thresholds")) {
    const json& t = j["thresholds"];
    if (!t.is_array() || t.empty())
      throw ConfigError(where + ".thresholds: expected a non-empty array");
    e.thresholds.clear();
    for (const json& v : t) {
      if (!v.is_number())
        throw ConfigError(where + ".thresholds: expected numbers");
      const double q = v.get<double>();
      if (q <= 0.0 || q > 100.0)
        throw ConfigError(where + ".thresholds: q must be in (0,100]");
      e.thresholds.push_back(q);
    }
  }
  return e;
}

}  // namespace cfgdetail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  using namespace cfgdetail;
  expect_keys(j, "config", {"scenario", "fusion", "paths", "evaluation"});
  RunConfig rc;
  rc.scenario = parse_scenario(require(j, "config", "scenario"), &rc.hotspots);
  rc.fusion = j.contains("fusion") ? parse_fusion(j["fusion"]) : FusionConfig{};
  rc.paths = j.contains("paths") ? parse_paths(j["paths"]) : PathsConfig{};
  rc.evaluation = j.contains("evaluation") ? parse_evaluation(j["evaluation"])
                                           : EvaluationConfig{};
  return rc;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return parse_run_config(j);
}

}  // namespace hotloc
