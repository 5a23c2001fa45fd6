#include <doctest.h>

#include <algorithm>
#include <random>

#include "hotloc/localizer.hpp"
#include "hotloc/scenario.hpp"

using namespace hotloc;

namespace {

RadioMap two_cell_radio(PixelGrid g = PixelGrid{{-500, -500}, 40, 40, 25.0}) {
  std::vector<Cell> cells;
  for (int k = 0; k < 2; ++k) {
    Cell c;
    c.id = k;
    c.site = {k == 0 ? -200.0 : 200.0, 0.0};
    c.azimuth_deg = k == 0 ? 90.0 : 270.0;
    c.max_backoff_db = 0.0;  // isotropic, each cell covers its half-plane
    cells.push_back(c);
  }
  return build_radio_map(g, cells);
}

KpiRecord base_record(int cell, std::size_t n_ta, std::size_t n_aoa) {
  KpiRecord r;
  r.cell_id = cell;
  r.ta_bin_width_m = kDefaultTaBinWidthM;
  r.aoa_bin_width_deg = 10.0;
  r.ta_hist.assign(n_ta, 0.0);
  r.aoa_hist.assign(n_aoa, 0.0);
  return r;
}

double support_mass_outside_cell(const WeightMap& w, const RadioMap& radio,
                                 int cell) {
  double outside = 0.0;
  for (std::size_t p = 0; p < w.size(); ++p)
    if (radio.best(p) != cell) outside += w[p];
  return outside;
}

}  // namespace

TEST_CASE("weight_ta: point-mass histogram lands on one ring") {
  RadioMap radio = two_cell_radio();
  const std::size_t n_ta = ta_bin(radio.grid().diagonal(), kDefaultTaBinWidthM) + 1;
  KpiRecord r = base_record(0, n_ta, 36);
  r.n_sessions = 10;
  const std::size_t k = 3;
  r.ta_hist[k] = 1.0;
  std::fill(r.aoa_hist.begin(), r.aoa_hist.end(), 1.0 / 36);
  r.neighbor_dist[1] = 1.0;
  auto pooled = pool_kpis({r});
  WeightMap w = weight_ta(pooled, radio);
  CHECK(map_sum(w) == doctest::Approx(1.0));
  for (std::size_t p = 0; p < w.size(); ++p) {
    if (w[p] <= 0.0) continue;
    CHECK(radio.best(p) == 0);
    CHECK(ta_bin(radio.dist(p), kDefaultTaBinWidthM) == k);
  }
}

TEST_CASE("weight_ta: ring weights proportional to histogram mass") {
  RadioMap radio = two_cell_radio();
  const std::size_t n_ta = ta_bin(radio.grid().diagonal(), kDefaultTaBinWidthM) + 1;
  KpiRecord r = base_record(0, n_ta, 36);
  r.n_sessions = 100;
  r.ta_hist[0] = 0.30;
  r.ta_hist[1] = 0.20;
  r.ta_hist[2] = 0.40;
  r.ta_hist[3] = 0.10;
  std::fill(r.aoa_hist.begin(), r.aoa_hist.end(), 1.0 / 36);
  r.neighbor_dist[1] = 1.0;
  auto pooled = pool_kpis({r});
  WeightMap w = weight_ta(pooled, radio);
  // total mass per ring recovers the histogram
  std::vector<double> ring_mass(n_ta, 0.0);
  for (std::size_t p = 0; p < w.size(); ++p)
    if (radio.best(p) == 0)
      ring_mass[ta_bin(radio.dist(p), kDefaultTaBinWidthM)] += w[p];
  CHECK(ring_mass[0] == doctest::Approx(0.30));
  CHECK(ring_mass[1] == doctest::Approx(0.20));
  CHECK(ring_mass[2] == doctest::Approx(0.40));
  CHECK(ring_mass[3] == doctest::Approx(0.10));
  // pixels inside one ring share the ring mass uniformly
  std::vector<double> vals;
  for (std::size_t p = 0; p < w.size(); ++p)
    if (radio.best(p) == 0 &&
        ta_bin(radio.dist(p), kDefaultTaBinWidthM) == 2 && w[p] > 0.0)
      vals.push_back(w[p]);
  REQUIRE(!vals.empty());
  for (double v : vals) CHECK(v == doctest::Approx(vals.front()));
}

TEST_CASE("weight_aoa: point-mass bin confines weight to one wedge") {
  RadioMap radio = two_cell_radio();
  const std::size_t n_ta = ta_bin(radio.grid().diagonal(), kDefaultTaBinWidthM) + 1;
  KpiRecord r = base_record(0, n_ta, 36);
  r.n_sessions = 10;
  std::fill(r.ta_hist.begin(), r.ta_hist.end(), 1.0 / double(n_ta));
  r.aoa_hist[9] = 1.0;  // bearings [90,100): due west-ish of the site
  r.neighbor_dist[1] = 1.0;
  auto pooled = pool_kpis({r});
  WeightMap w = weight_aoa(pooled, radio);
  CHECK(map_sum(w) == doctest::Approx(1.0));
  for (std::size_t p = 0; p < w.size(); ++p) {
    if (w[p] <= 0.0) continue;
    CHECK(radio.best(p) == 0);
    CHECK(aoa_bin(radio.bearing(p), 10.0) == 9);
  }
}

TEST_CASE("weight_aoa: worked 30/40/30 wedge shares") {
  RadioMap radio = two_cell_radio();
  const std::size_t n_ta = ta_bin(radio.grid().diagonal(), kDefaultTaBinWidthM) + 1;
  KpiRecord r = base_record(0, n_ta, 36);
  r.aoa_bin_width_deg = 120.0;
  r.aoa_hist.assign(3, 0.0);
  r.aoa_hist = {0.30, 0.40, 0.30};
  r.n_sessions = 100;
  std::fill(r.ta_hist.begin(), r.ta_hist.end(), 1.0 / double(n_ta));
  r.neighbor_dist[1] = 1.0;
  auto pooled = pool_kpis({r});
  WeightMap w = weight_aoa(pooled, radio);
  std::vector<double> wedge_mass(3, 0.0);
  for (std::size_t p = 0; p < w.size(); ++p)
    if (radio.best(p) == 0) wedge_mass[aoa_bin(radio.bearing(p), 120.0)] += w[p];
  CHECK(wedge_mass[0] == doctest::Approx(0.30));
  CHECK(wedge_mass[1] == doctest::Approx(0.40));
  CHECK(wedge_mass[2] == doctest::Approx(0.30));
}

TEST_CASE("weight_neighbor: two-cell network reduces to session shares") {
  RadioMap radio = two_cell_radio();
  const std::size_t n_ta = ta_bin(radio.grid().diagonal(), kDefaultTaBinWidthM) + 1;
  std::vector<KpiRecord> recs;
  for (int c = 0; c < 2; ++c) {
    KpiRecord r = base_record(c, n_ta, 36);
    r.n_sessions = c == 0 ? 30 : 70;
    std::fill(r.ta_hist.begin(), r.ta_hist.end(), 1.0 / double(n_ta));
    std::fill(r.aoa_hist.begin(), r.aoa_hist.end(), 1.0 / 36);
    r.neighbor_dist[1 - c] = 1.0;  // the only possible neighbor
    recs.push_back(r);
  }
  auto pooled = pool_kpis(recs);
  WeightMap w = weight_neighbor(pooled, radio);
  double mass0 = 0.0, mass1 = 0.0;
  for (std::size_t p = 0; p < w.size(); ++p)
    (radio.best(p) == 0 ? mass0 : mass1) += w[p];
  CHECK(mass0 == doctest::Approx(0.30));
  CHECK(mass1 == doctest::Approx(0.70));
  // spread uniformly within each cell
  std::vector<double> vals;
  for (std::size_t p = 0; p < w.size(); ++p)
    if (radio.best(p) == 0) vals.push_back(w[p]);
  for (double v : vals) CHECK(v == doctest::Approx(vals.front()));
}

TEST_CASE("weight_neighbor: unreported second-best gets zero weight") {
  RadioMap radio = two_cell_radio();
  const std::size_t n_ta = ta_bin(radio.grid().diagonal(), kDefaultTaBinWidthM) + 1;
  KpiRecord r = base_record(0, n_ta, 36);
  r.n_sessions = 10;
  std::fill(r.ta_hist.begin(), r.ta_hist.end(), 1.0 / double(n_ta));
  std::fill(r.aoa_hist.begin(), r.aoa_hist.end(), 1.0 / 36);
  r.neighbor_dist[kNoNeighbor] = 1.0;  // truncated neighbor list
  auto pooled = pool_kpis({r});
  WeightMap w = weight_neighbor(pooled, radio);
  CHECK(map_sum(w) == 0.0);
}

TEST_CASE("weight_load: equal loads give a flat map") {
  RadioMap radio = two_cell_radio();
  const std::size_t n_ta = ta_bin(radio.grid().diagonal(), kDefaultTaBinWidthM) + 1;
  std::vector<KpiRecord> recs;
  for (int c = 0; c < 2; ++c) {
    KpiRecord r = base_record(c, n_ta, 36);
    r.n_sessions = 0;
    r.load_time = 0.6;
    recs.push_back(r);
  }
  FusionConfig cfg;
  WeightMap w = weight_load(pool_kpis(recs), radio, cfg);
  // after normalization a constant map is uniform
  const double expect = 1.0 / double(w.size());
  for (std::size_t p = 0; p < w.size(); ++p)
    CHECK(w[p] == doctest::Approx(expect));
}

TEST_CASE("weight_load: three-cell line oracle") {
  // cells on a line; center cell congested, outer cells idle
  PixelGrid g{{-750, -125}, 60, 10, 25.0};
  std::vector<Cell> cells;
  for (int k = 0; k < 3; ++k) {
    Cell c;
    c.id = k;
    c.site = {-500.0 + 500.0 * k, 0.0};
    c.azimuth_deg = 90.0;
    c.beamwidth_deg = 360.0;  // near-isotropic for a clean 1-D oracle
    cells.push_back(c);
  }
  RadioMap radio = build_radio_map(g, cells);
  std::vector<KpiRecord> recs;
  const double loads[3] = {0.05, 0.9, 0.05};
  const std::size_t n_ta = ta_bin(g.diagonal(), kDefaultTaBinWidthM) + 1;
  for (int c = 0; c < 3; ++c) {
    KpiRecord r = base_record(c, n_ta, 36);
    r.load_time = loads[c];
    recs.push_back(r);
  }
  FusionConfig cfg;  // delta 6 dB, epsilon 0.15
  auto pooled = pool_kpis(recs);
  WeightMap w = weight_load(pooled, radio, cfg);

  // hand-computed candidate sets on probe pixels:
  // interior of cell 1 (site at 0): only cell 1 within 6 dB -> load 0.9
  // deep interior of cell 0: only cell 0 -> load 0.05
  // cell 0/1 border: both cells within 6 dB but |0.05-0.9| > 0.15, so the
  // neighbor is filtered and the value stays the best server's own load.
  const double total = [&] {
    WeightMap raw(g);
    const auto& cs = radio.cells();
    double s = 0.0;
    for (std::size_t p = 0; p < g.n_pixels(); ++p) {
      double sum = 0.0;
      int cnt = 0;
      const int b = radio.best(p);
      const double br = radio.rsrp_by_id(p, b);
      for (std::size_t k = 0; k < cs.size(); ++k) {
        const int id = cs[k].id;
        if (id != b) {
          if (radio.rsrp(p, k) < br - cfg.candidate_margin_db) continue;
          if (std::abs(loads[id] - loads[b]) > cfg.load_tolerance) continue;
        }
        sum += loads[id];
        ++cnt;
      }
      s += sum / cnt;
    }
    return s;
  }();

  auto probe = [&](double x) {
    const std::size_t p = g.pixel_of({x, 0.0});
    return w[p] * total;  // undo network normalization
  };
  CHECK(probe(0.0) == doctest::Approx(0.9));
  CHECK(probe(-480.0) == doctest::Approx(0.05));
  CHECK(probe(-250.0) == doctest::Approx(radio.best(g.pixel_of({-250.0, 0.0})) == 1 ? 0.9 : 0.05));
  CHECK(probe(200.0) == doctest::Approx(0.9));
  CHECK(probe(480.0) == doctest::Approx(0.05));
}

TEST_CASE("weight_load: two congested neighbors average on the border") {
  PixelGrid g{{-750, -125}, 60, 10, 25.0};
  std::vector<Cell> cells;
  for (int k = 0; k < 3; ++k) {
    Cell c;
    c.id = k;
    c.site = {-500.0 + 500.0 * k, 0.0};
    c.azimuth_deg = 90.0;
    c.beamwidth_deg = 360.0;
    cells.push_back(c);
  }
  RadioMap radio = build_radio_map(g, cells);
  std::vector<KpiRecord> recs;
  const double loads[3] = {0.8, 0.9, 0.05};
  const std::size_t n_ta = ta_bin(g.diagonal(), kDefaultTaBinWidthM) + 1;
  for (int c = 0; c < 3; ++c) {
    KpiRecord r = base_record(c, n_ta, 36);
    r.load_time = loads[c];
    recs.push_back(r);
  }
  FusionConfig cfg;
  WeightMap w = weight_load(pool_kpis(recs), radio, cfg);
  // border pixel between cells 0 and 1: both candidates pass the 0.15
  // tolerance -> averaged load (0.8+0.9)/2
  const std::size_t border = g.pixel_of({-250.0, 0.0});
  const std::size_t interior = g.pixel_of({-480.0, 0.0});
  CHECK(w[border] / w[interior] == doctest::Approx(0.85 / 0.8));
}

TEST_CASE("weight_throughput_gap: equal rates give a zero map") {
  RadioMap radio = two_cell_radio();
  const std::size_t n_ta = ta_bin(radio.grid().diagonal(), kDefaultTaBinWidthM) + 1;
  std::vector<KpiRecord> recs;
  for (int c = 0; c < 2; ++c) {
    KpiRecord r = base_record(c, n_ta, 36);
    r.n_sessions = 5;
    std::fill(r.ta_hist.begin(), r.ta_hist.end(), 1.0 / double(n_ta));
    std::fill(r.aoa_hist.begin(), r.aoa_hist.end(), 1.0 / 36);
    r.neighbor_dist[1 - c] = 1.0;
    r.amt_bps = r.hmt_bps = 1e6;  // AM == HM
    recs.push_back(r);
  }
  FusionConfig cfg;
  WeightMap w = weight_throughput_gap(pool_kpis(recs), radio, cfg);
  CHECK(map_sum(w) == 0.0);
}

TEST_CASE("weight_throughput_gap: D at the threshold goes to center pixels") {
  RadioMap radio = two_cell_radio();
  const std::size_t n_ta = ta_bin(radio.grid().diagonal(), kDefaultTaBinWidthM) + 1;
  std::vector<KpiRecord> recs;
  for (int c = 0; c < 2; ++c) {
    KpiRecord r = base_record(c, n_ta, 36);
    r.n_sessions = 5;
    std::fill(r.ta_hist.begin(), r.ta_hist.end(), 1.0 / double(n_ta));
    std::fill(r.aoa_hist.begin(), r.aoa_hist.end(), 1.0 / 36);
    r.neighbor_dist[1 - c] = 1.0;
    r.hmt_bps = 1e6;
    r.amt_bps = c == 0 ? 2e6 : 3e6;  // gaps 1e6 and 2e6; C = 2e6
    recs.push_back(r);
  }
  FusionConfig cfg;  // theta = 0.5 -> cell 0 has D exactly at the threshold
  WeightMap w = weight_throughput_gap(pool_kpis(recs), radio, cfg);
  const auto radii = cell_radii(radio);
  for (std::size_t p = 0; p < w.size(); ++p) {
    const int c = radio.best(p);
    const bool edge = radio.dist(p) > cfg.edge_fraction * radii.at(c);
    if (edge) {
      CHECK(w[p] == 0.0);  // both cells have D >= theta
    } else {
      CHECK(w[p] > 0.0);
    }
  }
}

TEST_CASE("fuse: alpha projection, convexity and homogeneity") {
  RadioMap radio = two_cell_radio();
  const PixelGrid& g = radio.grid();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::array<WeightMap, 5> maps;
  for (auto& m : maps) {
    m = WeightMap(g);
    for (double& v : m) v = unit(rng);
    normalize(m);
  }
  FusionConfig cfg;
  SUBCASE("projection on one alpha") {
    cfg.alpha = {1, 0, 0, 0, 0};
    WeightMap f = fuse(maps, cfg);
    for (std::size_t p = 0; p < f.size(); ++p)
      CHECK(f[p] == doctest::Approx(maps[0][p]));
  }
  SUBCASE("identical maps are a fixed point") {
    for (int k = 1; k < 5; ++k) maps[k] = maps[0];
    cfg.alpha = {0.4, 0.3, 0.1, 0.1, 0.1};
    WeightMap f = fuse(maps, cfg);
    for (std::size_t p = 0; p < f.size(); ++p)
      CHECK(f[p] == doctest::Approx(maps[0][p]));
  }
  SUBCASE("positively homogeneous in alpha") {
    cfg.alpha = {0.3, 0.3, 0.2, 0.1, 0.1};
    WeightMap a = fuse(maps, cfg);
    for (double& v : cfg.alpha) v *= 7.5;
    WeightMap b = fuse(maps, cfg);
    for (std::size_t p = 0; p < a.size(); ++p)
      CHECK(a[p] == doctest::Approx(b[p]));
  }
  SUBCASE("disjoint supports split per alpha") {
    // map k supported on column k only
    for (int k = 0; k < 5; ++k) {
      maps[k] = WeightMap(g);
      for (int j = 0; j < g.height; ++j) maps[k].at(k, j) = 1.0;
      normalize(maps[k]);
    }
    cfg.alpha = {0.2, 0.2, 0.2, 0.2, 0.2};
    WeightMap f = fuse(maps, cfg);
    for (int k = 0; k < 5; ++k) {
      double col = 0.0;
      for (int j = 0; j < g.height; ++j) col += f.at(k, j);
      CHECK(col == doctest::Approx(0.2));
    }
  }
  SUBCASE("all-zero alpha is rejected") {
    cfg.alpha = {0, 0, 0, 0, 0};
    CHECK_THROWS_AS(fuse(maps, cfg), std::invalid_argument);
  }
}

TEST_CASE("smooth: identity at lambda 0, mass preservation, max decay") {
  PixelGrid g{{0, 0}, 30, 30, 25.0};
  WeightMap w(g);
  w.at(14, 15) = 1.0;
  SUBCASE("lambda 0 is the identity") {
    WeightMap s = smooth(w, 0.0);
    CHECK(s.data() == w.data());
  }
  SUBCASE("point mass becomes a radially monotone blob") {
    WeightMap s = smooth(w, 25.0);
    CHECK(map_sum(s) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(s.at(14, 15) < 1.0);
    // monotone decreasing along the +x axis
    double prev = s.at(14, 15);
    for (int i = 15; i < 20; ++i) {
      CHECK(s.at(i, 15) < prev);
      prev = s.at(i, 15);
    }
    // never increases the maximum
    CHECK(*std::max_element(s.begin(), s.end()) <= 1.0);
  }
  SUBCASE("uniform map is unchanged") {
    WeightMap u(g, 1.0 / double(g.n_pixels()));
    WeightMap s = smooth(u, 50.0);
    for (std::size_t p = 0; p < u.size(); ++p)
      CHECK(s[p] == doctest::Approx(u[p]).epsilon(1e-6));
  }
}

TEST_CASE("smooth preserves mass on random maps") {
  PixelGrid g{{0, 0}, 25, 17, 25.0};
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int rep = 0; rep < 5; ++rep) {
    WeightMap w(g);
    for (double& v : w) v = unit(rng) < 0.3 ? unit(rng) : 0.0;
    const double mass = map_sum(w);
    for (double lambda : {12.5, 25.0, 60.0}) {
      WeightMap s = smooth(w, lambda);
      CHECK(map_sum(s) == doctest::Approx(mass).epsilon(1e-6));
      CHECK(*std::max_element(s.begin(), s.end()) <=
            *std::max_element(w.begin(), w.end()) + 1e-12);
    }
  }
}

TEST_CASE("localize: per-step support restriction to the cell's pixels") {
  RadioMap radio = two_cell_radio();
  const std::size_t n_ta = ta_bin(radio.grid().diagonal(), kDefaultTaBinWidthM) + 1;
  KpiRecord r = base_record(0, n_ta, 36);
  r.n_sessions = 10;
  std::fill(r.ta_hist.begin(), r.ta_hist.end(), 1.0 / double(n_ta));
  std::fill(r.aoa_hist.begin(), r.aoa_hist.end(), 1.0 / 36);
  r.neighbor_dist[1] = 1.0;
  r.amt_bps = 2e6;
  r.hmt_bps = 1e6;
  r.load_time = 0.5;
  FusionConfig cfg;
  LocalizeResult res = localize({r}, radio, cfg);
  // steps 1-3 and 5 restricted to cell 0's best-server pixels
  for (std::size_t k : {std::size_t(0), std::size_t(1), std::size_t(2), std::size_t(4)})
    CHECK(support_mass_outside_cell(res.steps[k], radio, 0) == 0.0);
}

TEST_CASE("localize: record order does not matter") {
  RadioMap radio = two_cell_radio();
  const std::size_t n_ta = ta_bin(radio.grid().diagonal(), kDefaultTaBinWidthM) + 1;
  std::vector<KpiRecord> recs;
  for (int c = 0; c < 2; ++c)
    for (int period = 0; period < 3; ++period) {
      KpiRecord r = base_record(c, n_ta, 36);
      r.period = period;
      r.n_sessions = 5 + c + period;
      std::fill(r.ta_hist.begin(), r.ta_hist.end(), 1.0 / double(n_ta));
      std::fill(r.aoa_hist.begin(), r.aoa_hist.end(), 1.0 / 36);
      r.neighbor_dist[1 - c] = 1.0;
      r.amt_bps = 2e6 + 1e5 * period;
      r.hmt_bps = 1e6;
      r.load_time = 0.3 + 0.1 * c;
      recs.push_back(r);
    }
  FusionConfig cfg;
  LocalizeResult a = localize(recs, radio, cfg);
  std::reverse(recs.begin(), recs.end());
  LocalizeResult b = localize(recs, radio, cfg);
  CHECK(a.smoothed.data() == b.smoothed.data());
  CHECK(a.fused.data() == b.fused.data());
}

TEST_CASE("localize rejects KPI records for unknown cells") {
  RadioMap radio = two_cell_radio();
  KpiRecord r = base_record(99, 4, 36);
  CHECK_THROWS_AS(localize({r}, radio, FusionConfig{}),
                  std::invalid_argument);
}

TEST_CASE("every step map is non-negative and normalized or zero") {
  RadioMap radio = two_cell_radio();
  const std::size_t n_ta = ta_bin(radio.grid().diagonal(), kDefaultTaBinWidthM) + 1;
  std::vector<KpiRecord> recs;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int c = 0; c < 2; ++c) {
    KpiRecord r = base_record(c, n_ta, 36);
    r.n_sessions = 20;
    double s = 0.0;
    for (double& v : r.ta_hist) s += (v = unit(rng));
    for (double& v : r.ta_hist) v /= s;
    s = 0.0;
    for (double& v : r.aoa_hist) s += (v = unit(rng));
    for (double& v : r.aoa_hist) v /= s;
    r.neighbor_dist[1 - c] = 1.0;
    r.hmt_bps = 1e6;
    r.amt_bps = 1e6 + unit(rng) * 2e6;
    r.load_time = unit(rng);
    recs.push_back(r);
  }
  LocalizeResult res = localize(recs, radio, FusionConfig{});
  auto check_map = [](const WeightMap& m) {
    for (double v : m) CHECK(v >= 0.0);
    const double s = map_sum(m);
    CHECK((s == 0.0 || std::abs(s - 1.0) < 1e-9));
  };
  for (const auto& m : res.steps) check_map(m);
  check_map(res.fused);
  CHECK(map_sum(res.smoothed) == doctest::Approx(1.0).epsilon(1e-6));
}
