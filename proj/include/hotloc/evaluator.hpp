#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hotloc/csv.hpp"
#include "hotloc/localizer.hpp"
#include "hotloc/simulator.hpp"

namespace hotloc {

// Total-variation distance between two normalized maps: the fraction of
// misplaced traffic mass, in [0,1].
inline double l1_error(const WeightMap& est, const WeightMap& truth) {
  if (!(est.grid() == truth.grid()))
    throw std::invalid_argument("l1_error: grid mismatch");
  WeightMap e = est, t = truth;
  normalize(e);
  normalize(t);
  double acc = 0.0;
  for (std::size_t p = 0; p < e.size(); ++p) acc += std::abs(e[p] - t[p]);
  return 0.5 * acc;
}

struct CdfPoint {
  double value = 0.0;
  double cum_fraction = 0.0;
};

// Empirical CDF of per-pixel weight values at n quantile points. With
// `mass_weighted`, the cumulative axis is traffic mass instead of pixels.
inline std::vector<CdfPoint> weight_cdf(const WeightMap& map,
                                        std::size_t n_points,
                                        bool mass_weighted = false) {
  if (n_points < 2) throw std::invalid_argument("weight_cdf: n_points < 2");
  WeightMap w = map;
  normalize(w);
  std::vector<double> vals(w.begin(), w.end());
  std::sort(vals.begin(), vals.end());
  const double total_mass = std::accumulate(vals.begin(), vals.end(), 0.0);
  std::vector<CdfPoint> out;
  out.reserve(n_points);
  double mass = 0.0;
  std::size_t vi = 0;
  for (std::size_t k = 0; k < n_points; ++k) {
    const double frac = static_cast<double>(k + 1) / n_points;
    const std::size_t target = static_cast<std::size_t>(
        std::ceil(frac * vals.size()));
    while (vi < target && vi < vals.size()) mass += vals[vi++];
    const double value = vals[std::min(vi, vals.size()) - 1];
    const double cum = mass_weighted && total_mass > 0.0
                           ? mass / total_mass
                           : static_cast<double>(vi) / vals.size();
    out.push_back({value, cum});
  }
  return out;
}

struct DetectionRow {
  double q_percent = 0.0;
  double detected_all = 0.0;  // percent of grid in both top-q sets
  double detected_ta = 0.0;
};

inline const std::vector<double>& default_detection_thresholds() {
  static const std::vector<double> t{0.5, 1, 2, 5, 10, 20, 50, 70};
  return t;
}

// Pixel indices of the top-q% of the map by weight; boundary ties broken
// by pixel index.
inline std::vector<std::size_t> top_q_pixels(const WeightMap& map, double q) {
  if (q <= 0.0 || q > 100.0)
    throw std::invalid_argument("detection threshold q must be in (0,100]");
  const std::size_t n = map.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (map[a] != map[b]) return map[a] > map[b];
    return a < b;
  });
  const std::size_t k =
      std::max<std::size_t>(1, static_cast<std::size_t>(q / 100.0 * n));
  order.resize(k);
  return order;
}

// Overlap of top-q% sets as a percentage of all pixels.
inline double top_q_overlap_percent(const WeightMap& est,
                                    const WeightMap& truth, double q) {
  if (!(est.grid() == truth.grid()))
    throw std::invalid_argument("detection_table: grid mismatch");
  auto te = top_q_pixels(est, q);
  auto tt = top_q_pixels(truth, q);
  std::sort(te.begin(), te.end());
  std::sort(tt.begin(), tt.end());
  std::vector<std::size_t> inter;
  std::set_intersection(te.begin(), te.end(), tt.begin(), tt.end(),
                        std::back_inserter(inter));
  return 100.0 * static_cast<double>(inter.size()) /
         static_cast<double>(est.size());
}

inline std::vector<DetectionRow> detection_table(
    const WeightMap& est_all, const WeightMap& est_ta, const WeightMap& truth,
    const std::vector<double>& thresholds = default_detection_thresholds()) {
  std::vector<DetectionRow> rows;
  for (double q : thresholds)
    rows.push_back({q, top_q_overlap_percent(est_all, truth, q),
                    top_q_overlap_percent(est_ta, truth, q)});
  return rows;
}

// KPI subset for ablation: indices into the alpha vector that stay on.
using KpiSubset = std::vector<std::size_t>;

inline FusionConfig mask_alpha(FusionConfig cfg, const KpiSubset& keep) {
  if (keep.empty()) throw std::invalid_argument("ablate: empty KPI subset");
  std::array<double, 5> a{};
  double total = 0.0;
  for (std::size_t k : keep) {
    if (k >= 5) throw std::invalid_argument("ablate: KPI index out of range");
    a[k] = cfg.alpha[k];
    total += a[k];
  }
  // the headline coefficients may put zero weight on the whole subset (e.g.
  // the TA-only row when alpha starts with 0); equal weights keep the run
  // defined and reduce to the plain single-KPI baseline for singletons
  if (total <= 0.0)
    for (std::size_t k : keep) a[k] = 1.0 / keep.size();
  cfg.alpha = a;
  return cfg;
}

struct AblationRow {
  std::string label;
  KpiSubset subset;
  double l1_access = 0.0;
  double l1_elapsed = 0.0;
};

inline const std::array<const char*, 5>& kpi_names() {
  static const std::array<const char*, 5> n{"ta", "aoa", "neighbor", "load",
                                            "throughput"};
  return n;
}

// Reruns localization per KPI subset and records the L1 error against both
// ground-truth fields.
inline std::vector<AblationRow> ablate(
    const std::vector<KpiRecord>& kpis, const RadioMap& radio,
    const GroundTruth& truth, const FusionConfig& cfg,
    const std::vector<std::pair<std::string, KpiSubset>>& subsets) {
  std::vector<AblationRow> rows;
  for (const auto& [label, subset] : subsets) {
    const FusionConfig sub_cfg = mask_alpha(cfg, subset);
    const LocalizeResult res = localize(kpis, radio, sub_cfg);
    AblationRow row;
    row.label = label;
    row.subset = subset;
    row.l1_access = l1_error(res.smoothed, truth.access);
    row.l1_elapsed = l1_error(res.smoothed, truth.elapsed);
    rows.push_back(std::move(row));
  }
  return rows;
}

// The standard sweep: all KPIs, each leave-one-out, TA only.
inline std::vector<std::pair<std::string, KpiSubset>> standard_subsets() {
  std::vector<std::pair<std::string, KpiSubset>> out;
  out.emplace_back("all", KpiSubset{0, 1, 2, 3, 4});
  for (std::size_t drop = 0; drop < 5; ++drop) {
    KpiSubset s;
    for (std::size_t k = 0; k < 5; ++k)
      if (k != drop) s.push_back(k);
    out.emplace_back(std::string("without_") + kpi_names()[drop], s);
  }
  out.emplace_back("ta_only", KpiSubset{0});
  return out;
}

struct EvalReport {
  double l1_access = 0.0;
  double l1_elapsed = 0.0;
  std::vector<CdfPoint> cdf_real_access, cdf_est_access;
  std::vector<CdfPoint> cdf_real_elapsed, cdf_est_elapsed;
  std::vector<DetectionRow> detection_access;
  std::vector<DetectionRow> detection_elapsed;
};

inline EvalReport evaluate(const WeightMap& est_all, const WeightMap& est_ta,
                           const GroundTruth& truth,
                           std::size_t cdf_points = 100,
                           bool mass_weighted_cdf = false) {
  EvalReport rep;
  rep.l1_access = l1_error(est_all, truth.access);
  rep.l1_elapsed = l1_error(est_all, truth.elapsed);
  rep.cdf_real_access = weight_cdf(truth.access, cdf_points, mass_weighted_cdf);
  rep.cdf_est_access = weight_cdf(est_all, cdf_points, mass_weighted_cdf);
  rep.cdf_real_elapsed =
      weight_cdf(truth.elapsed, cdf_points, mass_weighted_cdf);
  rep.cdf_est_elapsed = weight_cdf(est_all, cdf_points, mass_weighted_cdf);
  rep.detection_access = detection_table(est_all, est_ta, truth.access);
  rep.detection_elapsed = detection_table(est_all, est_ta, truth.elapsed);
  return rep;
}

inline void write_cdf_csv(const std::vector<CdfPoint>& cdf,
                          const std::string& path) {
  auto f = csv::open_out(path);
  f << "value,cum_fraction\n";
  for (const CdfPoint& p : cdf)
    f << csv::fmt(p.value) << ',' << csv::fmt(p.cum_fraction) << '\n';
}

inline void write_detection_csv(const std::vector<DetectionRow>& rows,
                                const std::string& path) {
  auto f = csv::open_out(path);
  f << "q_percent,detected_all_kpis,detected_ta_only\n";
  for (const DetectionRow& r : rows)
    f << csv::fmt(r.q_percent) << ',' << csv::fmt(r.detected_all) << ','
      << csv::fmt(r.detected_ta) << '\n';
}

inline void write_ablation_csv(const std::vector<AblationRow>& rows,
                               const std::string& path) {
  auto f = csv::open_out(path);
  f << "subset,l1_access,l1_elapsed\n";
  for (const AblationRow& r : rows)
    f << r.label << ',' << csv::fmt(r.l1_access) << ','
      << csv::fmt(r.l1_elapsed) << '\n';
}

inline void write_report_text(const EvalReport& rep, std::ostream& out) {
  out << "== L1 estimation error (total variation) ==\n";
  out << "access:  " << csv::fmt(rep.l1_access) << '\n';
  out << "elapsed: " << csv::fmt(rep.l1_elapsed) << '\n';
  out << "\n== Detected hotspots, access truth (percent of grid) ==\n";
  out << "q%  all_kpis  ta_only\n";
  for (const DetectionRow& r : rep.detection_access)
    out << csv::fmt(r.q_percent) << "  " << csv::fmt(r.detected_all) << "  "
        << csv::fmt(r.detected_ta) << '\n';
  out << "\n== Detected hotspots, elapsed truth (percent of grid) ==\n";
  out << "q%  all_kpis  ta_only\n";
  for (const DetectionRow& r : rep.detection_elapsed)
    out << csv::fmt(r.q_percent) << "  " << csv::fmt(r.detected_all) << "  "
        << csv::fmt(r.detected_ta) << '\n';
}

}  // namespace hotloc
