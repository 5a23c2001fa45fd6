#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "hotloc/geometry.hpp"

namespace hotloc {

// One sector antenna. Azimuth is the boresight direction in degrees
// clockwise from geographic north (conventional compass azimuth).
struct Cell {
  int id = 0;
  Point site;
  double azimuth_deg = 0.0;
  double beamwidth_deg = 65.0;
  double tx_power_dbm = 46.0;
  double max_backoff_db = 30.0;

  void validate() const {
    if (azimuth_deg < 0.0 || azimuth_deg >= 360.0)
      throw std::invalid_argument("cell.azimuth must be in [0,360)");
    if (beamwidth_deg <= 0.0)
      throw std::invalid_argument("cell.beamwidth must be > 0");
  }
};

// Horizontal parabolic sector pattern: min(12*(dphi/bw)^2, Am) dB.
inline double antenna_attenuation_db(const Cell& cell, double bearing_acw_deg) {
  // bearings are anticlockwise from north, azimuths clockwise.
  const double boresight_acw = wrap360(360.0 - cell.azimuth_deg);
  const double dphi = wrap180(bearing_acw_deg - boresight_acw);
  const double ratio = dphi / cell.beamwidth_deg;
  return std::min(12.0 * ratio * ratio, cell.max_backoff_db);
}

// Macro path loss 128.1 + 37.6*log10(d_km) plus sector pattern attenuation.
// Distance clamped to 10 m to avoid the log singularity.
inline double path_loss_db(double distance_m, const Cell& cell,
                           double bearing_acw_deg) {
  constexpr double kMinDistM = 10.0;
  const double d_km = std::max(distance_m, kMinDistM) / 1000.0;
  return 128.1 + 37.6 * std::log10(d_km) +
         antenna_attenuation_db(cell, bearing_acw_deg);
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

}  // namespace hotloc
