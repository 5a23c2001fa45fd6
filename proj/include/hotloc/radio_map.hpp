#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "hotloc/cell.hpp"
#include "hotloc/csv.hpp"
#include "hotloc/geometry.hpp"

namespace hotloc {

struct Shadowing {
  double sigma_db = 0.0;
  std::uint64_t seed = 0;
};

// Per-pixel, per-cell RSRP plus derived best/second-best server fields.
// RSRP is stored row-major: pixel index * n_cells + cell index.
class RadioMap {
 public:
  RadioMap() = default;

  RadioMap(const PixelGrid& grid, std::vector<Cell> cells)
      : grid_(grid), cells_(std::move(cells)) {
    for (std::size_t k = 0; k < cells_.size(); ++k) {
      if (!id_to_index_.emplace(cells_[k].id, k).second)
        throw std::invalid_argument("duplicate cell id " +
                                    std::to_string(cells_[k].id));
    }
    rsrp_.assign(grid_.n_pixels() * cells_.size(), 0.0);
    best_.assign(grid_.n_pixels(), -1);
    second_best_.assign(grid_.n_pixels(), -1);
    dist_.assign(grid_.n_pixels(), 0.0);
    bearing_.assign(grid_.n_pixels(), 0.0);
  }

  const PixelGrid& grid() const { return grid_; }
  const std::vector<Cell>& cells() const { return cells_; }
  std::size_t n_cells() const { return cells_.size(); }

  std::size_t cell_index(int cell_id) const {
    auto it = id_to_index_.find(cell_id);
    if (it == id_to_index_.end())
      throw std::invalid_argument("unknown cell id " + std::to_string(cell_id));
    return it->second;
  }
  bool has_cell(int cell_id) const { return id_to_index_.count(cell_id) > 0; }

  double rsrp(std::size_t pixel, std::size_t cell_idx) const {
    return rsrp_[pixel * cells_.size() + cell_idx];
  }
  double rsrp_by_id(std::size_t pixel, int cell_id) const {
    return rsrp(pixel, cell_index(cell_id));
  }
  double& rsrp_ref(std::size_t pixel, std::size_t cell_idx) {
    return rsrp_[pixel * cells_.size() + cell_idx];
  }

  int best(std::size_t pixel) const { return best_[pixel]; }
  int second_best(std::size_t pixel) const { return second_best_[pixel]; }
  double dist(std::size_t pixel) const { return dist_[pixel]; }
  double bearing(std::size_t pixel) const { return bearing_[pixel]; }

  // Sum of linear received powers from all cells at a pixel (mW).
  double total_rx_linear(std::size_t pixel) const {
    return total_linear_[pixel];
  }

  void finalize() {
    const std::size_t n = grid_.n_pixels();
    total_linear_.assign(n, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
      std::size_t b = 0, s = 0;
      double b_val = -std::numeric_limits<double>::infinity();
      double s_val = -std::numeric_limits<double>::infinity();
      double tot = 0.0;
      for (std::size_t k = 0; k < cells_.size(); ++k) {
        const double v = rsrp(p, k);
        tot += db_to_linear(v);
        // ties go to the lowest cell id; cells_ is sorted by id.
        if (v > b_val) {
          s_val = b_val; s = b;
          b_val = v; b = k;
        } else if (v > s_val) {
          s_val = v; s = k;
        }
      }
      best_[p] = cells_[b].id;
      second_best_[p] = cells_[s].id;
      total_linear_[p] = tot;
      const Point c = grid_.center(p);
      dist_[p] = distance(cells_[b].site, c);
      bearing_[p] = bearing_from_north(cells_[b].site, c);
    }
  }

 private:
  PixelGrid grid_;
  std::vector<Cell> cells_;
  std::map<int, std::size_t> id_to_index_;
  std::vector<double> rsrp_;
  std::vector<double> total_linear_;
  std::vector<int> best_;
  std::vector<int> second_best_;
  std::vector<double> dist_;
  std::vector<double> bearing_;
};

inline RadioMap build_radio_map(const PixelGrid& grid, std::vector<Cell> cells,
                                std::optional<Shadowing> shadowing = {}) {
  grid.validate();
  if (cells.size() < 2)
    throw std::invalid_argument(
        "build_radio_map requires at least 2 cells (second-best server)");
  std::sort(cells.begin(), cells.end(),
            [](const Cell& a, const Cell& b) { return a.id < b.id; });
  for (const Cell& c : cells) c.validate();

  RadioMap map(grid, std::move(cells));
  const auto& cs = map.cells();

  std::vector<double> shadow;
  if (shadowing && shadowing->sigma_db > 0.0) {
    std::mt19937_64 rng(shadowing->seed);
    std::normal_distribution<double> gauss(0.0, shadowing->sigma_db);
    shadow.resize(grid.n_pixels() * cs.size());
    for (double& v : shadow) v = gauss(rng);
  }

  for (std::size_t p = 0; p < grid.n_pixels(); ++p) {
    const Point c = grid.center(p);
    for (std::size_t k = 0; k < cs.size(); ++k) {
      const double d = distance(cs[k].site, c);
      const double brg = bearing_from_north(cs[k].site, c);
      double v = cs[k].tx_power_dbm - path_loss_db(d, cs[k], brg);
      if (!shadow.empty()) v -= shadow[p * cs.size() + k];
      map.rsrp_ref(p, k) = v;
    }
  }
  map.finalize();
  return map;
}

// CSV export: i,j,x,y,best_cell,second_best_cell,dist_m,bearing_deg,rsrp_best_dbm
inline void write_radio_map_csv(const RadioMap& map, const std::string& path) {
  auto f = csv::open_out(path);
  f << "i,j,x,y,best_cell,second_best_cell,dist_m,bearing_deg,rsrp_best_dbm\n";
  const PixelGrid& g = map.grid();
  for (int j = 0; j < g.height; ++j) {
    for (int i = 0; i < g.width; ++i) {
      const std::size_t p = g.index(i, j);
      const Point c = g.center(i, j);
      f << i << ',' << j << ',' << csv::fmt(c.x) << ',' << csv::fmt(c.y) << ','
        << map.best(p) << ',' << map.second_best(p) << ','
        << csv::fmt(map.dist(p)) << ',' << csv::fmt(map.bearing(p)) << ','
        << csv::fmt(map.rsrp_by_id(p, map.best(p))) << '\n';
    }
  }
}

}  // namespace hotloc
