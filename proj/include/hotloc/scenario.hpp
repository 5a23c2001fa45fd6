#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "hotloc/cell.hpp"
#include "hotloc/geometry.hpp"
#include "hotloc/kpi.hpp"

namespace hotloc {

// Full simulation description. Intensity is a relative per-pixel arrival
// density; arrivals sample the normalized map.
struct Scenario {
  PixelGrid grid;
  std::vector<Cell> cells;
  double bandwidth_hz = 20e6;
  Raster<double> intensity;
  double arrival_rate_per_s = 1.0;    // network-wide sessions/s
  double file_size_bits = 1'000'000;  // 1000 Kbit download per session
  double mobile_fraction = 0.3;
  double speed_mps = 2.315;           // ~8.33 km/h
  double period_s = 900.0;            // quarter hour
  int n_periods = 4;
  std::uint64_t seed = 1;
  double shadowing_sigma_db = 0.0;
  double hysteresis_db = 3.0;
  double noise_figure_db = 9.0;
  double ta_bin_width_m = kDefaultTaBinWidthM;
  double aoa_bin_width_deg = 10.0;
  double aoa_noise_deg = 0.0;         // stddev of the bearing estimate error
  std::int64_t max_attached = 0;      // 0 = no admission cap

  void validate() const {
    grid.validate();
    if (cells.size() < 2)
      throw std::invalid_argument("scenario requires at least 2 cells");
    if (bandwidth_hz <= 0.0)
      throw std::invalid_argument("scenario.bandwidth must be > 0");
    if (file_size_bits <= 0.0)
      throw std::invalid_argument("scenario.file_size must be > 0");
    if (period_s <= 0.0)
      throw std::invalid_argument("scenario.period must be > 0");
    if (n_periods < 1)
      throw std::invalid_argument("scenario.n_periods must be >= 1");
    if (mobile_fraction < 0.0 || mobile_fraction > 1.0)
      throw std::invalid_argument("scenario.mobile_fraction must be in [0,1]");
    if (arrival_rate_per_s < 0.0)
      throw std::invalid_argument("scenario.arrival_rate must be >= 0");
    if (intensity.size() != grid.n_pixels())
      throw std::invalid_argument("scenario.intensity grid mismatch");
    double total = 0.0;
    for (double v : intensity) {
      if (v < 0.0)
        throw std::invalid_argument("scenario.intensity entries must be >= 0");
      total += v;
    }
    if (aoa_noise_deg < 0.0)
      throw std::invalid_argument("scenario.aoa_noise_deg must be >= 0");
    if (arrival_rate_per_s > 0.0 && total <= 0.0)
      throw std::invalid_argument("scenario.intensity must have positive mass");
  }

  std::size_t n_ta_bins() const {
    return ta_bin(grid.diagonal(), ta_bin_width_m) + 1;
  }
  std::size_t n_aoa_bins() const {
    return static_cast<std::size_t>(std::round(360.0 / aoa_bin_width_deg));
  }
};

// Hexagonal site lattice: center site plus concentric rings, tri-sector,
// sector azimuths 120 degrees apart starting at `azimuth0`.
inline std::vector<Point> hex_site_positions(int n_sites, double isd_m,
                                             Point center = {}) {
  std::vector<Point> out;
  out.push_back(center);
  int ring = 1;
  while (static_cast<int>(out.size()) < n_sites) {
    // walk the ring starting at angle 0, 6*ring sites per ring
    for (int k = 0; k < 6 * ring && static_cast<int>(out.size()) < n_sites;
         ++k) {
      const double corner = M_PI / 3.0 * (k / ring);
      const double frac = static_cast<double>(k % ring) / ring;
      const double next = corner + M_PI / 3.0;
      const double x = ring * isd_m *
                       ((1 - frac) * std::cos(corner) + frac * std::cos(next));
      const double y = ring * isd_m *
                       ((1 - frac) * std::sin(corner) + frac * std::sin(next));
      out.push_back({center.x + x, center.y + y});
    }
    ++ring;
  }
  return out;
}

inline std::vector<Cell> tri_sector_cells(const std::vector<Point>& sites,
                                          double beamwidth_deg = 65.0,
                                          double tx_power_dbm = 46.0,
                                          double azimuth0_deg = 0.0) {
  std::vector<Cell> cells;
  cells.reserve(sites.size() * 3);
  int id = 0;
  for (const Point& s : sites) {
    for (int k = 0; k < 3; ++k) {
      Cell c;
      c.id = id++;
      c.site = s;
      c.azimuth_deg = wrap360(azimuth0_deg + 120.0 * k);
      c.beamwidth_deg = beamwidth_deg;
      c.tx_power_dbm = tx_power_dbm;
      cells.push_back(c);
    }
  }
  return cells;
}

}  // namespace hotloc
