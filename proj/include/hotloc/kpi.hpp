#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "hotloc/csv.hpp"

namespace hotloc {

// TA distance granularity in LTE.
inline constexpr double kDefaultTaBinWidthM = 78.125;

// Key used in neighbor_dist for residual mass with no neighbor reported.
inline constexpr int kNoNeighbor = -1;

/// Left-closed right-open distance bin.
inline std::size_t ta_bin(double distance_m, double bin_width_m) {
  return static_cast<std::size_t>(distance_m / bin_width_m);
}

/// Angular bin, indexed from geographic north anticlockwise.
inline std::size_t aoa_bin(double bearing_deg, double bin_width_deg) {
  const double bins = 360.0 / bin_width_deg;
  if (std::abs(bins - std::round(bins)) > 1e-9)
    throw std::invalid_argument("aoa bin width must divide 360");
  std::size_t b = static_cast<std::size_t>(bearing_deg / bin_width_deg);
  const std::size_t n = static_cast<std::size_t>(std::round(bins));
  return b >= n ? n - 1 : b;
}

// One cell x one reporting period of OMC KPIs.
struct KpiRecord {
  int cell_id = 0;
  std::int64_t period = 0;
  double ta_bin_width_m = kDefaultTaBinWidthM;
  std::vector<double> ta_hist;
  double aoa_bin_width_deg = 10.0;
  std::vector<double> aoa_hist;
  std::map<int, double> neighbor_dist;
  double load_time = 0.0;
  double amt_bps = 0.0;   // arithmetic mean of per-session rates
  double hmt_bps = 0.0;   // harmonic mean of the same rates
  std::int64_t n_sessions = 0;

  bool operator==(const KpiRecord&) const = default;
};

namespace detail {
inline double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}
}  // namespace detail

// Throws with the offending field name on any invariant violation.
inline void validate_kpi_record(const KpiRecord& r,
                                const std::string& where = {}) {
  auto fail = [&](const std::string& field, const std::string& msg) {
    throw csv::ParseError(where + (where.empty() ? "" : ": ") + "field '" +
                          field + "': " + msg);
  };
  if (r.ta_bin_width_m <= 0.0) fail("ta_bin_width_m", "must be > 0");
  if (r.aoa_bin_width_deg <= 0.0) fail("aoa_bin_width_deg", "must be > 0");
  if (r.load_time < 0.0 || r.load_time > 1.0)
    fail("load_time", "must be in [0,1]");
  if (r.n_sessions < 0) fail("n_sessions", "must be >= 0");
  for (double v : r.ta_hist)
    if (v < 0.0) fail("ta_hist", "negative entry");
  for (double v : r.aoa_hist)
    if (v < 0.0) fail("aoa_hist", "negative entry");
  for (const auto& [id, v] : r.neighbor_dist)
    if (v < 0.0) fail("neighbor_dist", "negative entry");
  if (r.n_sessions > 0) {
    constexpr double kTol = 1e-9;
    double nsum = 0.0;
    for (const auto& [id, v] : r.neighbor_dist) nsum += v;
    if (std::abs(detail::sum(r.ta_hist) - 1.0) > kTol)
      fail("ta_hist", "histogram does not sum to 1");
    if (std::abs(detail::sum(r.aoa_hist) - 1.0) > kTol)
      fail("aoa_hist", "histogram does not sum to 1");
    if (std::abs(nsum - 1.0) > kTol)
      fail("neighbor_dist", "distribution does not sum to 1");
    if (r.hmt_bps > r.amt_bps * (1.0 + 1e-12))
      fail("hmt_bps", "harmonic mean exceeds arithmetic mean");
  }
}

namespace detail {

inline std::string join_hist(const std::vector<double>& h) {
  std::string out;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (i) out += '|';
    out += csv::fmt(h[i]);
  }
  return out;
}

inline std::vector<double> parse_hist(const std::string& s,
                                      const std::string& field) {
  std::vector<double> out;
  if (s.empty()) return out;
  for (const auto& tok : csv::split(s, '|'))
    out.push_back(csv::parse_double(tok, field));
  return out;
}

inline std::string join_neighbors(const std::map<int, double>& nd) {
  std::string out;
  bool first = true;
  for (const auto& [id, frac] : nd) {
    if (!first) out += '|';
    first = false;
    out += std::to_string(id);
    out += ':';
    out += csv::fmt(frac);
  }
  return out;
}

inline std::map<int, double> parse_neighbors(const std::string& s,
                                             const std::string& field) {
  std::map<int, double> out;
  if (s.empty()) return out;
  for (const auto& tok : csv::split(s, '|')) {
    auto pos = tok.find(':');
    if (pos == std::string::npos)
      throw csv::ParseError("field '" + field + "': missing ':' in '" + tok +
                            "'");
    const int id =
        static_cast<int>(csv::parse_int(tok.substr(0, pos), field));
    out[id] = csv::parse_double(tok.substr(pos + 1), field);
  }
  return out;
}

}  // namespace detail

inline constexpr const char* kKpiCsvHeader =
    "cell_id,period,ta_bin_width_m,ta_hist,aoa_bin_width_deg,aoa_hist,"
    "neighbor_dist,load_time,amt_bps,hmt_bps,n_sessions";

inline void write_kpis(const std::vector<KpiRecord>& records,
                       std::ostream& out) {
  out << kKpiCsvHeader << '\n';
  for (const KpiRecord& r : records) {
    validate_kpi_record(r, "record cell " + std::to_string(r.cell_id) +
                               " period " + std::to_string(r.period));
    out << r.cell_id << ',' << r.period << ',' << csv::fmt(r.ta_bin_width_m)
        << ',' << detail::join_hist(r.ta_hist) << ','
        << csv::fmt(r.aoa_bin_width_deg) << ','
        << detail::join_hist(r.aoa_hist) << ','
        << detail::join_neighbors(r.neighbor_dist) << ','
        << csv::fmt(r.load_time) << ',' << csv::fmt(r.amt_bps) << ','
        << csv::fmt(r.hmt_bps) << ',' << r.n_sessions << '\n';
  }
}

inline void write_kpis(const std::vector<KpiRecord>& records,
                       const std::string& path) {
  auto f = csv::open_out(path);
  write_kpis(records, f);
}

inline std::vector<KpiRecord> read_kpis(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kKpiCsvHeader)
    throw csv::ParseError("bad or missing KPI header");
  std::vector<KpiRecord> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const std::string where = "row " + std::to_string(row);
    auto fields = csv::split(line, ',');
    if (fields.size() != 11)
      throw csv::ParseError(where + ": expected 11 fields, got " +
                            std::to_string(fields.size()));
    KpiRecord r;
    r.cell_id = static_cast<int>(csv::parse_int(fields[0], "cell_id"));
    r.period = csv::parse_int(fields[1], "period");
    r.ta_bin_width_m = csv::parse_double(fields[2], "ta_bin_width_m");
    r.ta_hist = detail::parse_hist(fields[3], "ta_hist");
    r.aoa_bin_width_deg = csv::parse_double(fields[4], "aoa_bin_width_deg");
    r.aoa_hist = detail::parse_hist(fields[5], "aoa_hist");
    r.neighbor_dist = detail::parse_neighbors(fields[6], "neighbor_dist");
    r.load_time = csv::parse_double(fields[7], "load_time");
    r.amt_bps = csv::parse_double(fields[8], "amt_bps");
    r.hmt_bps = csv::parse_double(fields[9], "hmt_bps");
    r.n_sessions = csv::parse_int(fields[10], "n_sessions");
    validate_kpi_record(r, where);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<KpiRecord> read_kpis(const std::string& path) {
  auto f = csv::open_in(path);
  return read_kpis(f);
}

}  // namespace hotloc
