#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "hotloc/csv.hpp"
#include "hotloc/geometry.hpp"
#include "hotloc/kpi.hpp"
#include "hotloc/radio_map.hpp"

namespace hotloc {

using WeightMap = Raster<double>;

inline double map_sum(const WeightMap& w) {
  double s = 0.0;
  for (double v : w) s += v;
  return s;
}

// Scales the map to total mass 1; an all-zero map stays zero.
inline void normalize(WeightMap& w) {
  const double s = map_sum(w);
  if (s <= 0.0) return;
  for (double& v : w) v /= s;
}

enum class EdgeWeightVariant {
  kLiteral,   // edge pixels take D when D < theta
  kInverse,   // edge pixels take 1 - D when D < theta
};

struct FusionConfig {
  // order: TA, AoA, neighbor, load, throughput-gap
  std::array<double, 5> alpha{0.3, 0.3, 0.2, 0.1, 0.1};
  double lambda_m = 50.0;            // smoothing length
  double load_tolerance = 0.15;      // epsilon, Step 4
  double candidate_margin_db = 6.0;  // delta, Step 4
  double throughput_threshold = 0.5; // theta, Step 5
  double normalizing_constant = 0.0; // C, Step 5; <= 0 means auto (run max)
  double edge_fraction = 0.6;        // rho, Step 5 edge/center boundary
  bool use_load_correlation = false; // multi-period Pearson gate, Step 4
  double load_correlation_threshold = 0.7;
  EdgeWeightVariant edge_variant = EdgeWeightVariant::kLiteral;

  void validate() const {
    double asum = 0.0;
    for (double a : alpha) {
      if (a < 0.0)
        throw std::invalid_argument("fusion.alpha entries must be >= 0");
      asum += a;
    }
    if (asum <= 0.0)
      throw std::invalid_argument("fusion.alpha must not be all zero");
    if (lambda_m < 0.0)
      throw std::invalid_argument("fusion.lambda must be >= 0");
    if (load_tolerance < 0.0 || load_tolerance > 1.0)
      throw std::invalid_argument("fusion.load_tolerance must be in [0,1]");
    if (candidate_margin_db < 0.0)
      throw std::invalid_argument("fusion.candidate_margin must be >= 0");
    if (edge_fraction <= 0.0 || edge_fraction >= 1.0)
      throw std::invalid_argument("fusion.edge_fraction must be in (0,1)");
  }
};

// KPI records pooled per cell across reporting periods, session-weighted.
struct CellKpis {
  int cell_id = 0;
  double ta_bin_width_m = 0.0;
  double aoa_bin_width_deg = 0.0;
  std::vector<double> ta_mass;         // n_sessions-weighted histogram mass
  std::vector<double> aoa_mass;
  std::map<int, double> neighbor_mass;
  double total_sessions = 0.0;
  double load_time = 0.0;              // mean over periods
  std::vector<double> load_series;     // per period, for the correlation gate
  double amt_bps = 0.0;                // session-weighted means
  double hmt_bps = 0.0;
  bool throughput_defined = false;
};

inline std::map<int, CellKpis> pool_kpis(std::vector<KpiRecord> kpis) {
  // canonical order so pooling is independent of input record order
  std::sort(kpis.begin(), kpis.end(),
            [](const KpiRecord& a, const KpiRecord& b) {
              return std::tie(a.cell_id, a.period) <
                     std::tie(b.cell_id, b.period);
            });
  std::map<int, CellKpis> pooled;
  std::map<int, double> load_sum, load_n, thr_w, amt_sum, hmt_sum;
  for (const KpiRecord& r : kpis) {
    CellKpis& c = pooled[r.cell_id];
    c.cell_id = r.cell_id;
    if (c.ta_bin_width_m == 0.0) {
      c.ta_bin_width_m = r.ta_bin_width_m;
      c.aoa_bin_width_deg = r.aoa_bin_width_deg;
    } else if (c.ta_bin_width_m != r.ta_bin_width_m ||
               c.aoa_bin_width_deg != r.aoa_bin_width_deg) {
      throw std::invalid_argument("inconsistent bin widths for cell " +
                                  std::to_string(r.cell_id));
    }
    if (r.ta_hist.size() > c.ta_mass.size()) c.ta_mass.resize(r.ta_hist.size());
    if (r.aoa_hist.size() > c.aoa_mass.size())
      c.aoa_mass.resize(r.aoa_hist.size());
    const double n = static_cast<double>(r.n_sessions);
    for (std::size_t b = 0; b < r.ta_hist.size(); ++b)
      c.ta_mass[b] += n * r.ta_hist[b];
    for (std::size_t b = 0; b < r.aoa_hist.size(); ++b)
      c.aoa_mass[b] += n * r.aoa_hist[b];
    for (const auto& [id, frac] : r.neighbor_dist)
      c.neighbor_mass[id] += n * frac;
    c.total_sessions += n;
    load_sum[r.cell_id] += r.load_time;
    load_n[r.cell_id] += 1.0;
    c.load_series.push_back(r.load_time);
    if (r.n_sessions > 0) {
      thr_w[r.cell_id] += n;
      amt_sum[r.cell_id] += n * r.amt_bps;
      hmt_sum[r.cell_id] += n * r.hmt_bps;
    }
  }
  for (auto& [id, c] : pooled) {
    c.load_time = load_sum[id] / load_n[id];
    if (thr_w[id] > 0.0) {
      c.amt_bps = amt_sum[id] / thr_w[id];
      c.hmt_bps = hmt_sum[id] / thr_w[id];
      c.throughput_defined = true;
    }
  }
  return pooled;
}

struct StepDiagnostics {
  std::int64_t pixels_beyond_histogram = 0;  // pixel bin past histogram end
  double dropped_mass = 0.0;                 // bin mass with no pixels
};

// Step 1: spread each TA ring's session mass uniformly over the ring's
// pixels within the cell's best-server area.
inline WeightMap weight_ta(const std::map<int, CellKpis>& kpis,
                           const RadioMap& radio,
                           StepDiagnostics* diag = nullptr) {
  const PixelGrid& grid = radio.grid();
  WeightMap w(grid);
  // pixel counts per (cell, ta bin)
  std::map<int, std::map<std::size_t, double>> bin_pixels;
  std::vector<std::size_t> pixel_bin(grid.n_pixels());
  for (std::size_t p = 0; p < grid.n_pixels(); ++p) {
    const int c = radio.best(p);
    auto it = kpis.find(c);
    if (it == kpis.end()) continue;
    const std::size_t b = ta_bin(radio.dist(p), it->second.ta_bin_width_m);
    pixel_bin[p] = b;
    bin_pixels[c][b] += 1.0;
  }
  for (std::size_t p = 0; p < grid.n_pixels(); ++p) {
    const int c = radio.best(p);
    auto it = kpis.find(c);
    if (it == kpis.end()) continue;
    const CellKpis& ck = it->second;
    const std::size_t b = pixel_bin[p];
    if (b >= ck.ta_mass.size()) {
      if (diag) ++diag->pixels_beyond_histogram;
      continue;
    }
    w[p] = ck.ta_mass[b] / bin_pixels[c][b];
  }
  if (diag) {
    for (const auto& [cid, ck] : kpis)
      for (std::size_t b = 0; b < ck.ta_mass.size(); ++b)
        if (ck.ta_mass[b] > 0.0 && bin_pixels[cid][b] == 0.0)
          diag->dropped_mass += ck.ta_mass[b];
  }
  normalize(w);
  return w;
}

// Step 2: same spreading over angular wedges of the serving cell.
inline WeightMap weight_aoa(const std::map<int, CellKpis>& kpis,
                            const RadioMap& radio,
                            StepDiagnostics* diag = nullptr) {
  const PixelGrid& grid = radio.grid();
  WeightMap w(grid);
  std::map<int, std::map<std::size_t, double>> bin_pixels;
  std::vector<std::size_t> pixel_bin(grid.n_pixels());
  for (std::size_t p = 0; p < grid.n_pixels(); ++p) {
    const int c = radio.best(p);
    auto it = kpis.find(c);
    if (it == kpis.end()) continue;
    const std::size_t b =
        aoa_bin(radio.bearing(p), it->second.aoa_bin_width_deg);
    pixel_bin[p] = b;
    bin_pixels[c][b] += 1.0;
  }
  for (std::size_t p = 0; p < grid.n_pixels(); ++p) {
    const int c = radio.best(p);
    auto it = kpis.find(c);
    if (it == kpis.end()) continue;
    const CellKpis& ck = it->second;
    const std::size_t b = pixel_bin[p];
    if (b >= ck.aoa_mass.size()) {
      if (diag) ++diag->pixels_beyond_histogram;
      continue;
    }
    w[p] = ck.aoa_mass[b] / bin_pixels[c][b];
  }
  normalize(w);
  return w;
}

// Step 3: mass of the (serving, reported-neighbor) pair lands on the
// pixels whose best/second-best fingerprint matches that pair.
inline WeightMap weight_neighbor(const std::map<int, CellKpis>& kpis,
                                 const RadioMap& radio) {
  const PixelGrid& grid = radio.grid();
  WeightMap w(grid);
  std::map<std::pair<int, int>, double> pair_pixels;
  for (std::size_t p = 0; p < grid.n_pixels(); ++p)
    pair_pixels[{radio.best(p), radio.second_best(p)}] += 1.0;
  for (std::size_t p = 0; p < grid.n_pixels(); ++p) {
    const int c = radio.best(p);
    auto it = kpis.find(c);
    if (it == kpis.end()) continue;
    const int s = radio.second_best(p);
    auto nit = it->second.neighbor_mass.find(s);
    if (nit == it->second.neighbor_mass.end()) continue;  // truncated list
    w[p] = nit->second / pair_pixels[{c, s}];
  }
  normalize(w);
  return w;
}

namespace detail {
inline double pearson(const std::vector<double>& a,
                      const std::vector<double>& b) {
  const std::size_t n = std::min(a.size(), b.size());
  if (n < 2) return 0.0;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) { ma += a[i]; mb += b[i]; }
  ma /= n; mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}
}  // namespace detail

// Step 4: per pixel, average the load of the candidate serving cells
// whose load is near the best server's load.
inline WeightMap weight_load(const std::map<int, CellKpis>& kpis,
                             const RadioMap& radio,
                             const FusionConfig& cfg) {
  const PixelGrid& grid = radio.grid();
  WeightMap w(grid);
  const auto& cells = radio.cells();
  for (std::size_t p = 0; p < grid.n_pixels(); ++p) {
    const int b = radio.best(p);
    auto bit = kpis.find(b);
    if (bit == kpis.end()) continue;
    const CellKpis& bk = bit->second;
    const double best_rsrp = radio.rsrp_by_id(p, b);
    double sum = 0.0;
    int count = 0;
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const int id = cells[k].id;
      auto it = kpis.find(id);
      if (it == kpis.end()) continue;
      const CellKpis& ck = it->second;
      if (id != b) {
        if (radio.rsrp(p, k) < best_rsrp - cfg.candidate_margin_db) continue;
        if (std::abs(ck.load_time - bk.load_time) > cfg.load_tolerance)
          continue;
        if (cfg.use_load_correlation &&
            detail::pearson(ck.load_series, bk.load_series) <
                cfg.load_correlation_threshold)
          continue;
      }
      sum += ck.load_time;
      ++count;
    }
    w[p] = count > 0 ? sum / count : 0.0;
  }
  normalize(w);
  return w;
}

// 95th percentile of best-server distance; robust cell radius.
inline std::map<int, double> cell_radii(const RadioMap& radio) {
  std::map<int, std::vector<double>> dists;
  for (std::size_t p = 0; p < radio.grid().n_pixels(); ++p)
    dists[radio.best(p)].push_back(radio.dist(p));
  std::map<int, double> out;
  for (auto& [id, d] : dists) {
    std::sort(d.begin(), d.end());
    const std::size_t idx = static_cast<std::size_t>(0.95 * (d.size() - 1));
    out[id] = d[idx];
  }
  return out;
}

// Step 5: normalized AMT-HMT gap D, routed to center pixels when D >= theta
// and to edge pixels when D < theta.
inline WeightMap weight_throughput_gap(const std::map<int, CellKpis>& kpis,
                                       const RadioMap& radio,
                                       const FusionConfig& cfg) {
  const PixelGrid& grid = radio.grid();
  WeightMap w(grid);
  double norm_c = cfg.normalizing_constant;
  if (norm_c <= 0.0) {
    for (const auto& [id, ck] : kpis)
      if (ck.throughput_defined)
        norm_c = std::max(norm_c, ck.amt_bps - ck.hmt_bps);
    if (norm_c <= 0.0) return w;  // no cell has a gap; map stays zero
  }
  const auto radii = cell_radii(radio);
  for (std::size_t p = 0; p < grid.n_pixels(); ++p) {
    const int c = radio.best(p);
    auto it = kpis.find(c);
    if (it == kpis.end() || !it->second.throughput_defined) continue;
    const CellKpis& ck = it->second;
    const double d = std::clamp((ck.amt_bps - ck.hmt_bps) / norm_c, 0.0, 1.0);
    const bool edge = radio.dist(p) > cfg.edge_fraction * radii.at(c);
    if (edge) {
      if (d < cfg.throughput_threshold)
        w[p] = cfg.edge_variant == EdgeWeightVariant::kLiteral ? d : 1.0 - d;
    } else {
      if (d >= cfg.throughput_threshold) w[p] = d;
    }
  }
  normalize(w);
  return w;
}

// Step 6 fusion: convex combination of the normalized step maps.
inline WeightMap fuse(const std::array<WeightMap, 5>& maps,
                      const FusionConfig& cfg) {
  cfg.validate();
  const PixelGrid& grid = maps[0].grid();
  for (const WeightMap& m : maps)
    if (!(m.grid() == grid))
      throw std::invalid_argument("fuse: weight maps on different grids");
  // single active coefficient: exact projection onto that map
  int active = -1;
  int n_active = 0;
  for (int k = 0; k < 5; ++k)
    if (cfg.alpha[k] != 0.0) {
      active = k;
      ++n_active;
    }
  if (n_active == 1) return maps[active];
  WeightMap out(grid);
  for (std::size_t k = 0; k < 5; ++k) {
    if (cfg.alpha[k] == 0.0) continue;
    for (std::size_t p = 0; p < out.size(); ++p)
      out[p] += cfg.alpha[k] * maps[k][p];
  }
  normalize(out);
  return out;
}

// Distance-decay smoother: normalized exponential-kernel average,
// rescaled to preserve the input's total mass. lambda = 0 is identity.
inline WeightMap smooth(const WeightMap& w, double lambda_m) {
  if (lambda_m < 0.0) throw std::invalid_argument("smooth: lambda must be >= 0");
  const PixelGrid& grid = w.grid();
  if (lambda_m == 0.0) return w;
  const int radius = std::max(
      1, static_cast<int>(std::ceil(4.0 * lambda_m / grid.resolution)));
  // kernel values on the pixel offset window
  std::vector<double> kernel((2 * radius + 1) * (2 * radius + 1));
  for (int dj = -radius; dj <= radius; ++dj)
    for (int di = -radius; di <= radius; ++di) {
      const double d = std::hypot(di, dj) * grid.resolution;
      kernel[(dj + radius) * (2 * radius + 1) + (di + radius)] =
          d <= 4.0 * lambda_m ? std::exp(-d / lambda_m) : 0.0;
    }
  WeightMap out(grid);
  for (int j = 0; j < grid.height; ++j) {
    for (int i = 0; i < grid.width; ++i) {
      double num = 0.0, den = 0.0;
      const int j0 = std::max(0, j - radius), j1 = std::min(grid.height - 1, j + radius);
      const int i0 = std::max(0, i - radius), i1 = std::min(grid.width - 1, i + radius);
      for (int q = j0; q <= j1; ++q)
        for (int r = i0; r <= i1; ++r) {
          const double k =
              kernel[(q - j + radius) * (2 * radius + 1) + (r - i + radius)];
          num += k * w.at(r, q);
          den += k;
        }
      out.at(i, j) = den > 0.0 ? num / den : 0.0;
    }
  }
  const double in_mass = map_sum(w);
  const double out_mass = map_sum(out);
  if (out_mass > 0.0) {
    const double scale = in_mass / out_mass;
    for (double& v : out) v *= scale;
  }
  return out;
}

struct LocalizeResult {
  std::array<WeightMap, 5> steps;  // TA, AoA, neighbor, load, throughput gap
  WeightMap fused;
  WeightMap smoothed;
  StepDiagnostics diagnostics;
};

inline LocalizeResult localize(const std::vector<KpiRecord>& kpis,
                               const RadioMap& radio,
                               const FusionConfig& cfg) {
  cfg.validate();
  for (const KpiRecord& r : kpis)
    if (!radio.has_cell(r.cell_id))
      throw std::invalid_argument("KPI record references unknown cell " +
                                  std::to_string(r.cell_id));
  const auto pooled = pool_kpis(kpis);
  LocalizeResult res;
  res.steps[0] = weight_ta(pooled, radio, &res.diagnostics);
  res.steps[1] = weight_aoa(pooled, radio, &res.diagnostics);
  res.steps[2] = weight_neighbor(pooled, radio);
  res.steps[3] = weight_load(pooled, radio, cfg);
  res.steps[4] = weight_throughput_gap(pooled, radio, cfg);
  res.fused = fuse(res.steps, cfg);
  res.smoothed = smooth(res.fused, cfg.lambda_m);
  return res;
}

// Weight-map CSV: i,j,x,y,w1,w2,w3,w4,w5,fused,smoothed
inline void write_weights_csv(const LocalizeResult& res,
                              const std::string& path) {
  auto f = csv::open_out(path);
  f << "i,j,x,y,w1,w2,w3,w4,w5,fused,smoothed\n";
  const PixelGrid& g = res.fused.grid();
  for (int j = 0; j < g.height; ++j)
    for (int i = 0; i < g.width; ++i) {
      const Point c = g.center(i, j);
      f << i << ',' << j << ',' << csv::fmt(c.x) << ',' << csv::fmt(c.y);
      for (const WeightMap& m : res.steps) f << ',' << csv::fmt(m.at(i, j));
      f << ',' << csv::fmt(res.fused.at(i, j)) << ','
        << csv::fmt(res.smoothed.at(i, j)) << '\n';
    }
}

inline LocalizeResult read_weights_csv(const std::string& path,
                                       const PixelGrid& grid) {
  auto f = csv::open_in(path);
  std::string line;
  if (!std::getline(f, line) || line != "i,j,x,y,w1,w2,w3,w4,w5,fused,smoothed")
    throw csv::ParseError("bad or missing weight-map header in " + path);
  LocalizeResult res;
  for (WeightMap& m : res.steps) m = WeightMap(grid);
  res.fused = WeightMap(grid);
  res.smoothed = WeightMap(grid);
  std::size_t row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (line.empty()) continue;
    auto fields = csv::split(line, ',');
    if (fields.size() != 11)
      throw csv::ParseError("row " + std::to_string(row) +
                            ": expected 11 fields");
    const int i = static_cast<int>(csv::parse_int(fields[0], "i"));
    const int j = static_cast<int>(csv::parse_int(fields[1], "j"));
    if (i < 0 || i >= grid.width || j < 0 || j >= grid.height)
      throw csv::ParseError("row " + std::to_string(row) +
                            ": pixel out of grid");
    for (std::size_t k = 0; k < 5; ++k)
      res.steps[k].at(i, j) =
          csv::parse_double(fields[4 + k], "w" + std::to_string(k + 1));
    res.fused.at(i, j) = csv::parse_double(fields[9], "fused");
    res.smoothed.at(i, j) = csv::parse_double(fields[10], "smoothed");
  }
  return res;
}

}  // namespace hotloc
