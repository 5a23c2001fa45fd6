// Command-line front end: simulate / localize / evaluate / ablate,
// driven by one JSON config file. Exit codes: 0 success, 1 validation
// error, 2 runtime error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hotloc/config.hpp"
#include "hotloc/evaluator.hpp"
#include "hotloc/localizer.hpp"
#include "hotloc/radio_map.hpp"
#include "hotloc/simulator.hpp"

namespace fs = std::filesystem;
using namespace hotloc;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::optional<std::int64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::vector<double>> alpha;
  std::optional<double> lambda_m;
};

RunConfig load_config(const GlobalOpts& g) {
  RunConfig rc = load_run_config(g.config_path);
  if (g.seed) rc.scenario.seed = static_cast<std::uint64_t>(*g.seed);
  if (g.out_dir) rc.paths.out_dir = *g.out_dir;
  if (g.alpha) {
    if (g.alpha->size() != 5)
      throw ConfigError("--alpha: expected 5 comma-separated values");
    for (std::size_t k = 0; k < 5; ++k) rc.fusion.alpha[k] = (*g.alpha)[k];
    rc.fusion.validate();
  }
  if (g.lambda_m) {
    if (*g.lambda_m < 0.0) throw ConfigError("--lambda: must be >= 0");
    rc.fusion.lambda_m = *g.lambda_m;
  }
  return rc;
}

std::string out_path(const RunConfig& rc, const std::string& file) {
  fs::create_directories(rc.paths.out_dir);
  return (fs::path(rc.paths.out_dir) / file).string();
}

RadioMap build_radio(const RunConfig& rc) {
  std::optional<Shadowing> sh;
  if (rc.scenario.shadowing_sigma_db > 0.0)
    sh = Shadowing{rc.scenario.shadowing_sigma_db, rc.scenario.seed};
  return build_radio_map(rc.scenario.grid, rc.scenario.cells, sh);
}

// Consistency check of a previously exported radio-map file against the
// configured layout: same pixel rows and best/second-best assignment.
void check_radio_file(const RadioMap& radio, const std::string& path) {
  auto f = csv::open_in(path);
  std::string line;
  if (!std::getline(f, line) ||
      line != "i,j,x,y,best_cell,second_best_cell,dist_m,bearing_deg,rsrp_best_dbm")
    throw csv::ParseError("bad or missing radio-map header in " + path);
  const PixelGrid& g = radio.grid();
  std::size_t rows = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto fields = csv::split(line, ',');
    if (fields.size() != 9)
      throw csv::ParseError(path + ": expected 9 fields per row");
    const int i = static_cast<int>(csv::parse_int(fields[0], "i"));
    const int j = static_cast<int>(csv::parse_int(fields[1], "j"));
    if (i < 0 || i >= g.width || j < 0 || j >= g.height)
      throw csv::ParseError(path + ": pixel (" + fields[0] + "," + fields[1] +
                            ") outside the configured grid");
    const int best = static_cast<int>(csv::parse_int(fields[4], "best_cell"));
    if (best != radio.best(g.index(i, j)))
      throw csv::ParseError(path + ": best server mismatch at pixel (" +
                            fields[0] + "," + fields[1] +
                            "); radio file does not match the config");
    ++rows;
  }
  if (rows != g.n_pixels())
    throw csv::ParseError(path + ": row count does not match the grid");
}

int cmd_simulate(const GlobalOpts& g) {
  RunConfig rc = load_config(g);
  const RadioMap radio = build_radio(rc);
  const SimResult sim = run_simulation(rc.scenario, radio);
  write_radio_map_csv(radio, out_path(rc, rc.paths.radio_file));
  write_ground_truth_csv(sim.truth, out_path(rc, rc.paths.truth_file));
  write_kpis(sim.kpis, out_path(rc, rc.paths.kpi_file));
  std::cout << "simulate: cells=" << rc.scenario.cells.size()
            << " periods=" << rc.scenario.n_periods
            << " sessions=" << sim.stats.sessions_generated
            << " blocked=" << sim.stats.sessions_blocked
            << " seed=" << rc.scenario.seed << "\n";
  return 0;
}

int cmd_localize(const GlobalOpts& g, const std::string& kpi_arg,
                 const std::string& radio_arg) {
  RunConfig rc = load_config(g);
  const RadioMap radio = build_radio(rc);
  const std::string kpi_path =
      kpi_arg.empty() ? out_path(rc, rc.paths.kpi_file) : kpi_arg;
  const std::string radio_path =
      radio_arg.empty() ? out_path(rc, rc.paths.radio_file) : radio_arg;
  if (fs::exists(radio_path)) check_radio_file(radio, radio_path);
  const std::vector<KpiRecord> kpis = read_kpis(kpi_path);
  for (const KpiRecord& r : kpis)
    if (!radio.has_cell(r.cell_id))
      throw csv::ParseError(kpi_path + ": unknown cell id " +
                            std::to_string(r.cell_id));
  const LocalizeResult res = localize(kpis, radio, rc.fusion);
  write_weights_csv(res, out_path(rc, rc.paths.weights_file));
  std::cout << "localize: cells=" << rc.scenario.cells.size()
            << " records=" << kpis.size()
            << " lambda=" << rc.fusion.lambda_m << "\n";
  return 0;
}

int cmd_evaluate(const GlobalOpts& g, const std::string& weights_arg,
                 const std::string& truth_arg) {
  RunConfig rc = load_config(g);
  const std::string weights_path =
      weights_arg.empty() ? out_path(rc, rc.paths.weights_file) : weights_arg;
  const std::string truth_path =
      truth_arg.empty() ? out_path(rc, rc.paths.truth_file) : truth_arg;
  const LocalizeResult weights =
      read_weights_csv(weights_path, rc.scenario.grid);
  const GroundTruth truth =
      read_ground_truth_csv(truth_path, rc.scenario.grid);
  // TA-only baseline: the stored Step-1 map through the same smoother.
  const WeightMap est_ta = smooth(weights.steps[0], rc.fusion.lambda_m);
  EvalReport rep =
      evaluate(weights.smoothed, est_ta, truth,
               static_cast<std::size_t>(rc.evaluation.cdf_points),
               rc.evaluation.mass_weighted_cdf);
  rep.detection_access = detection_table(weights.smoothed, est_ta, truth.access,
                                         rc.evaluation.thresholds);
  rep.detection_elapsed = detection_table(weights.smoothed, est_ta,
                                          truth.elapsed,
                                          rc.evaluation.thresholds);
  write_detection_csv(rep.detection_access,
                      out_path(rc, "detection_access.csv"));
  write_detection_csv(rep.detection_elapsed,
                      out_path(rc, "detection_elapsed.csv"));
  write_cdf_csv(rep.cdf_real_access, out_path(rc, "cdf_access_real.csv"));
  write_cdf_csv(rep.cdf_est_access, out_path(rc, "cdf_access_est.csv"));
  write_cdf_csv(rep.cdf_real_elapsed, out_path(rc, "cdf_elapsed_real.csv"));
  write_cdf_csv(rep.cdf_est_elapsed, out_path(rc, "cdf_elapsed_est.csv"));
  {
    auto f = csv::open_out(out_path(rc, "eval_report.txt"));
    write_report_text(rep, f);
  }
  {
    auto f = csv::open_out(out_path(rc, "eval_summary.csv"));
    f << "metric,value\n";
    f << "l1_access," << csv::fmt(rep.l1_access) << '\n';
    f << "l1_elapsed," << csv::fmt(rep.l1_elapsed) << '\n';
  }
  std::cout << "evaluate: l1_access=" << csv::fmt(rep.l1_access)
            << " l1_elapsed=" << csv::fmt(rep.l1_elapsed) << "\n";
  return 0;
}

int cmd_ablate(const GlobalOpts& g) {
  RunConfig rc = load_config(g);
  const RadioMap radio = build_radio(rc);
  const SimResult sim = run_simulation(rc.scenario, radio);
  const auto rows =
      ablate(sim.kpis, radio, sim.truth, rc.fusion, standard_subsets());
  write_ablation_csv(rows, out_path(rc, "ablation.csv"));
  std::cout << "subset,l1_access,l1_elapsed\n";
  for (const AblationRow& r : rows)
    std::cout << r.label << ',' << csv::fmt(r.l1_access) << ','
              << csv::fmt(r.l1_elapsed) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"OMC-KPI traffic hotspot localization pipeline"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "JSON config file")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "override scenario seed");
  app.add_option("--out-dir", g.out_dir, "override output directory");
  app.add_option("--alpha", g.alpha,
                 "override fusion coefficients a,b,c,d,e")
      ->delimiter(',');
  app.add_option("--lambda", g.lambda_m, "override smoothing length (m)");

  auto* sim = app.add_subcommand("simulate",
                                 "run the network simulator, write KPI, "
                                 "truth and radio-map files");
  auto* loc = app.add_subcommand("localize",
                                 "estimate the traffic map from KPI records");
  std::string kpi_arg, radio_arg;
  loc->add_option("--kpis", kpi_arg, "KPI CSV (default: out dir)");
  loc->add_option("--radio", radio_arg, "radio-map CSV (default: out dir)");
  auto* eva = app.add_subcommand("evaluate",
                                 "compare an estimated map with ground truth");
  std::string weights_arg, truth_arg;
  eva->add_option("--weights", weights_arg, "weight-map CSV (default: out dir)");
  eva->add_option("--truth", truth_arg, "ground-truth CSV (default: out dir)");
  auto* abl = app.add_subcommand("ablate",
                                 "simulate once, then evaluate every KPI "
                                 "subset");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(g);
    if (loc->parsed()) return cmd_localize(g, kpi_arg, radio_arg);
    if (eva->parsed()) return cmd_evaluate(g, weights_arg, truth_arg);
    if (abl->parsed()) return cmd_ablate(g);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const csv::ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
