#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "hotloc/geometry.hpp"
#include "hotloc/kpi.hpp"
#include "hotloc/radio_map.hpp"
#include "hotloc/scenario.hpp"

namespace hotloc {

// Per-pixel ground truth: sessions generated and bits actually served.
struct GroundTruth {
  Raster<double> access;
  Raster<double> elapsed;
};

inline void write_ground_truth_csv(const GroundTruth& gt,
                                   const std::string& path) {
  auto f = csv::open_out(path);
  f << "i,j,access_count,elapsed_bits\n";
  const PixelGrid& g = gt.access.grid();
  for (int j = 0; j < g.height; ++j)
    for (int i = 0; i < g.width; ++i)
      f << i << ',' << j << ',' << csv::fmt(gt.access.at(i, j)) << ','
        << csv::fmt(gt.elapsed.at(i, j)) << '\n';
}

inline GroundTruth read_ground_truth_csv(const std::string& path,
                                         const PixelGrid& grid) {
  auto f = csv::open_in(path);
  std::string line;
  if (!std::getline(f, line) || line != "i,j,access_count,elapsed_bits")
    throw csv::ParseError("bad or missing ground-truth header in " + path);
  GroundTruth gt{Raster<double>(grid), Raster<double>(grid)};
  std::size_t row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (line.empty()) continue;
    auto fields = csv::split(line, ',');
    if (fields.size() != 4)
      throw csv::ParseError("row " + std::to_string(row) +
                            ": expected 4 fields");
    const int i = static_cast<int>(csv::parse_int(fields[0], "i"));
    const int j = static_cast<int>(csv::parse_int(fields[1], "j"));
    if (i < 0 || i >= grid.width || j < 0 || j >= grid.height)
      throw csv::ParseError("row " + std::to_string(row) +
                            ": pixel out of grid");
    gt.access.at(i, j) = csv::parse_double(fields[2], "access_count");
    gt.elapsed.at(i, j) = csv::parse_double(fields[3], "elapsed_bits");
  }
  return gt;
}

// Round-robin share of the cell bandwidth with a spectral-efficiency cap.
inline double per_tick_throughput(std::int64_t n_attached, double bandwidth_hz,
                                  double sinr_db) {
  constexpr double kSeMax = 6.0;  // bits/s/Hz
  const double se = std::min(std::log2(1.0 + db_to_linear(sinr_db)), kSeMax);
  return bandwidth_hz / static_cast<double>(n_attached) * se;
}

struct Session {
  std::int64_t id = 0;
  std::size_t birth_pixel = 0;
  Point pos;
  double remaining_bits = 0.0;
  int serving_cell = -1;
  bool mobile = false;
  double heading_rad = 0.0;
};

// Switch only if the best cell beats the serving cell by strictly more
// than the hysteresis.
inline int handover_check(const Session& session, const RadioMap& radio,
                          double hysteresis_db) {
  const std::size_t p = radio.grid().pixel_of(session.pos);
  const int best = radio.best(p);
  if (best == session.serving_cell) return session.serving_cell;
  const double serving = radio.rsrp_by_id(p, session.serving_cell);
  const double candidate = radio.rsrp_by_id(p, best);
  return candidate > serving + hysteresis_db ? best : session.serving_cell;
}

// Accumulates one cell's events over one reporting period and produces
// its KpiRecord.
class CellPeriodAccumulator {
 public:
  CellPeriodAccumulator() = default;
  CellPeriodAccumulator(int cell_id, std::size_t n_ta_bins,
                        std::size_t n_aoa_bins)
      : cell_id_(cell_id), ta_counts_(n_ta_bins, 0.0),
        aoa_counts_(n_aoa_bins, 0.0) {}

  void add_sample(std::int64_t session_id, double dist_m, double bearing_deg,
                  int second_best_cell, double ta_bin_width_m,
                  double aoa_bin_width_deg) {
    std::size_t tb = ta_bin(dist_m, ta_bin_width_m);
    if (tb >= ta_counts_.size()) tb = ta_counts_.size() - 1;
    ta_counts_[tb] += 1.0;
    aoa_counts_[aoa_bin(bearing_deg, aoa_bin_width_deg)] += 1.0;
    neighbor_counts_[second_best_cell] += 1.0;
    auto& st = sessions_[session_id];
    st.ticks += 1;
    ++n_samples_;
  }

  void add_served_bits(std::int64_t session_id, double bits) {
    sessions_[session_id].bits += bits;
  }

  void add_tick(bool busy) {
    ++total_ticks_;
    if (busy) ++busy_ticks_;
  }

  std::int64_t session_ticks() const { return n_samples_; }

  KpiRecord finalize(double ta_bin_width_m, double aoa_bin_width_deg,
                     std::int64_t period) const {
    KpiRecord r;
    r.cell_id = cell_id_;
    r.period = period;
    r.ta_bin_width_m = ta_bin_width_m;
    r.aoa_bin_width_deg = aoa_bin_width_deg;
    r.ta_hist.assign(ta_counts_.size(), 0.0);
    r.aoa_hist.assign(aoa_counts_.size(), 0.0);
    r.n_sessions = static_cast<std::int64_t>(sessions_.size());
    r.load_time = total_ticks_ > 0
                      ? static_cast<double>(busy_ticks_) / total_ticks_
                      : 0.0;
    if (n_samples_ > 0) {
      for (std::size_t b = 0; b < ta_counts_.size(); ++b)
        r.ta_hist[b] = ta_counts_[b] / n_samples_;
      for (std::size_t b = 0; b < aoa_counts_.size(); ++b)
        r.aoa_hist[b] = aoa_counts_[b] / n_samples_;
      for (const auto& [id, cnt] : neighbor_counts_)
        r.neighbor_dist[id] = cnt / n_samples_;
    }
    // Sessions with zero served bits are excluded from both means.
    double sum_rate = 0.0, sum_inv = 0.0;
    std::int64_t n_rated = 0;
    for (const auto& [id, st] : sessions_) {
      if (st.bits <= 0.0 || st.ticks == 0) continue;
      const double rate = st.bits / st.ticks;
      sum_rate += rate;
      sum_inv += 1.0 / rate;
      ++n_rated;
    }
    if (n_rated > 0) {
      r.amt_bps = sum_rate / n_rated;
      r.hmt_bps = n_rated / sum_inv;
    }
    return r;
  }

 private:
  struct SessionStats {
    double bits = 0.0;
    std::int64_t ticks = 0;
  };

  int cell_id_ = 0;
  std::vector<double> ta_counts_;
  std::vector<double> aoa_counts_;
  std::map<int, double> neighbor_counts_;
  std::map<std::int64_t, SessionStats> sessions_;
  std::int64_t busy_ticks_ = 0;
  std::int64_t total_ticks_ = 0;
  std::int64_t n_samples_ = 0;
};

struct SimStats {
  std::int64_t sessions_generated = 0;
  std::int64_t sessions_blocked = 0;
  std::int64_t session_ticks = 0;       // accumulated per cell
  std::int64_t attached_tick_sum = 0;   // accumulated per tick
  double bits_served = 0.0;
};

struct SimResult {
  GroundTruth truth;
  std::vector<KpiRecord> kpis;  // ordered by (period, cell id)
  SimStats stats;
};

// Advances time in 1 s ticks. Per tick: Poisson arrivals placed by the
// intensity map, mobile sessions move with border reflection, handover
// with hysteresis, round-robin service, KPI sampling. Deterministic for
// a fixed scenario seed.
inline SimResult run_simulation(const Scenario& sc, const RadioMap& radio) {
  sc.validate();
  if (!(radio.grid() == sc.grid))
    throw std::invalid_argument("radio map grid does not match scenario grid");
  for (const Cell& c : sc.cells)
    if (!radio.has_cell(c.id))
      throw std::invalid_argument("radio map missing scenario cell " +
                                  std::to_string(c.id));

  const PixelGrid& grid = sc.grid;
  const std::size_t n_cells = radio.n_cells();
  const double noise_dbm = -174.0 + 10.0 * std::log10(sc.bandwidth_hz) +
                           sc.noise_figure_db;
  const double noise_mw = db_to_linear(noise_dbm);

  std::mt19937_64 rng(sc.seed);
  std::discrete_distribution<std::size_t> place(sc.intensity.begin(),
                                                sc.intensity.end());
  std::poisson_distribution<int> arrivals(sc.arrival_rate_per_s);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // never sampled when the configured stddev is 0 (keeps the random stream,
  // and so every other output, unchanged); 1.0 avoids a zero-stddev object
  std::normal_distribution<double> aoa_noise(
      0.0, sc.aoa_noise_deg > 0.0 ? sc.aoa_noise_deg : 1.0);

  SimResult result;
  result.truth.access = Raster<double>(grid);
  result.truth.elapsed = Raster<double>(grid);

  std::vector<Session> sessions;
  std::int64_t next_id = 0;

  // cell index -> attached session positions in `sessions`
  std::vector<std::vector<std::size_t>> attached(n_cells);
  std::vector<CellPeriodAccumulator> acc;

  auto reset_accumulators = [&] {
    acc.clear();
    for (std::size_t k = 0; k < n_cells; ++k)
      acc.emplace_back(radio.cells()[k].id, sc.n_ta_bins(), sc.n_aoa_bins());
  };
  reset_accumulators();

  const std::int64_t total_ticks =
      static_cast<std::int64_t>(sc.n_periods * sc.period_s);
  const std::int64_t ticks_per_period =
      static_cast<std::int64_t>(sc.period_s);

  for (std::int64_t t = 0; t < total_ticks; ++t) {
    // arrivals
    const int n_new = sc.arrival_rate_per_s > 0.0 ? arrivals(rng) : 0;
    for (int a = 0; a < n_new; ++a) {
      const std::size_t px = place(rng);
      Session s;
      s.id = next_id++;
      s.birth_pixel = px;
      const Point base = grid.center(px);
      s.pos = {base.x + (unit(rng) - 0.5) * grid.resolution,
               base.y + (unit(rng) - 0.5) * grid.resolution};
      s.remaining_bits = sc.file_size_bits;
      s.mobile = unit(rng) < sc.mobile_fraction;
      s.heading_rad = unit(rng) * 2.0 * M_PI;
      s.serving_cell = radio.best(px);
      ++result.stats.sessions_generated;
      result.truth.access[px] += 1.0;
      const std::size_t ci = radio.cell_index(s.serving_cell);
      if (sc.max_attached > 0 &&
          static_cast<std::int64_t>(attached[ci].size()) >= sc.max_attached) {
        ++result.stats.sessions_blocked;
        continue;  // not admitted; demand still counted in access truth
      }
      attached[ci].push_back(sessions.size());
      sessions.push_back(s);
    }

    // movement + handover
    for (std::size_t si = 0; si < sessions.size(); ++si) {
      Session& s = sessions[si];
      if (s.mobile) {
        double nx = s.pos.x + sc.speed_mps * std::cos(s.heading_rad);
        double ny = s.pos.y + sc.speed_mps * std::sin(s.heading_rad);
        const double x0 = grid.origin.x, x1 = grid.origin.x + grid.width * grid.resolution;
        const double y0 = grid.origin.y, y1 = grid.origin.y + grid.height * grid.resolution;
        double hx = std::cos(s.heading_rad), hy = std::sin(s.heading_rad);
        if (nx < x0 || nx >= x1) {
          nx = nx < x0 ? 2.0 * x0 - nx : 2.0 * x1 - nx;
          hx = -hx;
        }
        if (ny < y0 || ny >= y1) {
          ny = ny < y0 ? 2.0 * y0 - ny : 2.0 * y1 - ny;
          hy = -hy;
        }
        // nudge inward if reflection landed exactly on the border
        nx = std::clamp(nx, x0, std::nextafter(x1, x0));
        ny = std::clamp(ny, y0, std::nextafter(y1, y0));
        s.pos = {nx, ny};
        s.heading_rad = std::atan2(hy, hx);
      }
      const int target = handover_check(s, radio, sc.hysteresis_db);
      if (target != s.serving_cell) {
        auto& from = attached[radio.cell_index(s.serving_cell)];
        from.erase(std::find(from.begin(), from.end(), si));
        attached[radio.cell_index(target)].push_back(si);
        s.serving_cell = target;
      }
    }

    // round-robin service + KPI sampling
    std::vector<std::size_t> finished;
    for (std::size_t k = 0; k < n_cells; ++k) {
      const auto& list = attached[k];
      acc[k].add_tick(!list.empty());
      if (list.empty()) continue;
      result.stats.attached_tick_sum +=
          static_cast<std::int64_t>(list.size());
      const Cell& cell = radio.cells()[k];
      for (std::size_t si : list) {
        Session& s = sessions[si];
        const std::size_t px = grid.pixel_of(s.pos);
        const double sig = db_to_linear(radio.rsrp(px, k));
        const double interf = radio.total_rx_linear(px) - sig;
        const double sinr_db = linear_to_db(sig / (interf + noise_mw));
        const double rate = per_tick_throughput(
            static_cast<std::int64_t>(list.size()), sc.bandwidth_hz, sinr_db);
        const double served = std::min(rate * 1.0, s.remaining_bits);
        s.remaining_bits -= served;
        result.truth.elapsed[px] += served;
        result.stats.bits_served += served;

        const double d = distance(cell.site, s.pos);
        double brg = bearing_from_north(cell.site, s.pos);
        if (sc.aoa_noise_deg > 0.0)
          brg = wrap360(brg + aoa_noise(rng));
        acc[k].add_sample(s.id, d, brg, radio.second_best(px),
                          sc.ta_bin_width_m, sc.aoa_bin_width_deg);
        acc[k].add_served_bits(s.id, served);
        if (s.remaining_bits <= 0.0) finished.push_back(si);
      }
    }

    // drop completed sessions, preserving order
    if (!finished.empty()) {
      std::sort(finished.begin(), finished.end());
      std::vector<std::size_t> remap(sessions.size());
      std::vector<Session> kept;
      kept.reserve(sessions.size() - finished.size());
      std::size_t fi = 0;
      for (std::size_t si = 0; si < sessions.size(); ++si) {
        if (fi < finished.size() && finished[fi] == si) {
          remap[si] = static_cast<std::size_t>(-1);
          ++fi;
        } else {
          remap[si] = kept.size();
          kept.push_back(sessions[si]);
        }
      }
      sessions = std::move(kept);
      for (auto& list : attached) {
        std::vector<std::size_t> nl;
        nl.reserve(list.size());
        for (std::size_t si : list)
          if (remap[si] != static_cast<std::size_t>(-1))
            nl.push_back(remap[si]);
        list = std::move(nl);
      }
    }

    // period boundary: emit KPI records
    if ((t + 1) % ticks_per_period == 0) {
      const std::int64_t period = (t + 1) / ticks_per_period - 1;
      for (std::size_t k = 0; k < n_cells; ++k) {
        result.stats.session_ticks += acc[k].session_ticks();
        result.kpis.push_back(
            acc[k].finalize(sc.ta_bin_width_m, sc.aoa_bin_width_deg, period));
      }
      reset_accumulators();
    }
  }
  return result;
}

}  // namespace hotloc
