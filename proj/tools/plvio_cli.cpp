// Command-line driver: simulate | montecarlo | replay | obscheck.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "plvio/config.hpp"
#include "plvio/error.hpp"
#include "plvio/evaluation.hpp"
#include "plvio/observability.hpp"
#include "plvio/replay.hpp"

namespace fs = std::filesystem;
using namespace plvio;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

ExperimentConfig load(const std::string& path) {
  if (path.empty()) return parse_config("{}");
  try {
    return load_config(path);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

std::vector<Variant> parse_variants(const std::string& list, const std::vector<Variant>& fallback) {
  if (list.empty()) return fallback;
  std::vector<Variant> out;
  std::stringstream ss(list);
  std::string item;
  try {
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) out.push_back(parse_variant(item));
    }
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (out.empty()) throw UsageError("empty variant list");
  return out;
}

void write_plot_script(const fs::path& dir, const std::vector<Variant>& variants, bool per_run) {
  std::ofstream gp = open_out(dir / "plot.gp");
  gp << "set datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size 1200,800\n";
  gp << "set output 'nees.png'\nset xlabel 't [s]'\nset ylabel 'NEES'\nplot ";
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const std::string v = to_string(variants[i]);
    gp << (i ? ", " : "") << "'nees_" << v << ".csv' using 1:2 with lines title '" << v << "'";
  }
  gp << "\nset output 'rmse.png'\nset ylabel '" << (per_run ? "position error [m]" : "position RMSE [m]")
     << "'\nplot ";
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const std::string v = to_string(variants[i]);
    gp << (i ? ", " : "") << "'rmse_" << v << ".csv' using 1:2 with lines title '" << v << "'";
  }
  gp << "\n";
}

void write_traj(const fs::path& path, const RunResult& run) {
  std::ofstream out = open_out(path);
  out << "t,px,py,pz,qw,qx,qy,qz,px_est,py_est,pz_est,qw_est,qx_est,qy_est,qz_est\n";
  for (const auto& s : run.steps) {
    const Eigen::Quaterniond qt(s.truth.R), qe(s.estimate.R);
    out << fmt(s.t) << ',' << fmt(s.truth.p.x()) << ',' << fmt(s.truth.p.y()) << ',' << fmt(s.truth.p.z()) << ','
        << fmt(qt.w()) << ',' << fmt(qt.x()) << ',' << fmt(qt.y()) << ',' << fmt(qt.z()) << ','
        << fmt(s.estimate.p.x()) << ',' << fmt(s.estimate.p.y()) << ',' << fmt(s.estimate.p.z()) << ','
        << fmt(qe.w()) << ',' << fmt(qe.x()) << ',' << fmt(qe.y()) << ',' << fmt(qe.z()) << '\n';
  }
}

void write_series(const fs::path& dir, const VariantAggregate& agg) {
  const std::string v = to_string(agg.variant);
  std::ofstream nees = open_out(dir / ("nees_" + v + ".csv"));
  nees << "t,nees\n";
  for (std::size_t k = 0; k < agg.rmse.t.size(); ++k) nees << fmt(agg.rmse.t[k]) << ',' << fmt(agg.mean_nees[k]) << '\n';
  std::ofstream rmse = open_out(dir / ("rmse_" + v + ".csv"));
  rmse << "t,pos_rmse,rot_rmse\n";
  for (std::size_t k = 0; k < agg.rmse.t.size(); ++k) {
    rmse << fmt(agg.rmse.t[k]) << ',' << fmt(agg.rmse.pos_rmse[k]) << ',' << fmt(agg.rmse.rot_rmse[k]) << '\n';
  }
}

void write_summary(const fs::path& dir, const std::vector<VariantAggregate>& aggs) {
  std::ofstream out = open_out(dir / "summary.csv");
  out << "variant,anees,mean_pos_rmse,final_pos_rmse,mean_rot_rmse,runs_used,runs_aborted,points_used,lines_used,"
         "vp_rows\n";
  for (const auto& a : aggs) {
    out << to_string(a.variant) << ',' << fmt(a.anees) << ',' << fmt(a.mean_pos_rmse) << ',' << fmt(a.final_pos_rmse)
        << ',' << fmt(a.mean_rot_rmse) << ',' << a.runs_used << ',' << a.aborted.size() << ','
        << a.counters.points_used << ',' << a.counters.lines_used << ',' << a.counters.vp_rows << '\n';
  }
}

void print_summary(const std::vector<VariantAggregate>& aggs) {
  std::printf("%-10s %10s %14s %14s %6s\n", "variant", "ANEES", "mean pos RMSE", "final pos RMSE", "runs");
  for (const auto& a : aggs) {
    std::printf("%-10s %10.4f %14.4f %14.4f %6d\n", to_string(a.variant).c_str(), a.anees, a.mean_pos_rmse,
                a.final_pos_rmse, a.runs_used);
    for (const auto& d : a.aborted) std::fprintf(stderr, "warning: %s aborted (%s)\n", to_string(a.variant).c_str(), d.c_str());
  }
}

int cmd_simulate(const ExperimentConfig& cfg, const fs::path& out, bool dump) {
  fs::create_directories(out);
  const SimData data = generate_data(cfg.sim, cfg.sim.seed);
  if (dump) write_bundle(data, cfg.sim, (out / "bundle").string());
  std::vector<VariantAggregate> aggs;
  bool ok = true;
  for (Variant v : cfg.variants) {
    const RunResult run = run_filter(cfg.sim, data, v);
    if (run.aborted) {
      std::fprintf(stderr, "%s: run aborted: %s\n", to_string(v).c_str(), run.diagnostic.c_str());
      ok = false;
    }
    write_traj(out / ("traj_" + to_string(v) + ".csv"), run);
    VariantAggregate agg = aggregate(v, {run_metrics(run, cfg.nees_full_state)});
    agg.counters = run.counters;
    if (run.aborted) agg.aborted.push_back(run.diagnostic);
    write_series(out, agg);
    aggs.push_back(std::move(agg));
  }
  write_summary(out, aggs);
  write_plot_script(out, cfg.variants, true);
  std::ofstream(out / "config.json") << dump_config(cfg);
  print_summary(aggs);
  return ok ? 0 : 1;
}

int cmd_montecarlo(const ExperimentConfig& cfg, const fs::path& out) {
  fs::create_directories(out);
  MonteCarloOptions opt;
  opt.runs = cfg.sim.runs;
  opt.base_seed = cfg.sim.seed;
  opt.full_state_nees = cfg.nees_full_state;
  opt.threads = cfg.threads;
  const auto aggs = monte_carlo(cfg.sim, cfg.variants, opt);
  for (const auto& a : aggs) write_series(out, a);
  write_summary(out, aggs);
  write_plot_script(out, cfg.variants, false);
  std::ofstream(out / "config.json") << dump_config(cfg);
  print_summary(aggs);
  for (const auto& a : aggs) {
    if (a.runs_used == 0) return 1;
  }
  return 0;
}

int cmd_replay(const ExperimentConfig& cfg, const BundlePaths& paths, Variant variant, const fs::path& out) {
  const ReplayBundle bundle = read_bundle(paths);
  if (!bundle.has_lines && uses_lines(variant)) {
    std::fprintf(stderr, "warning: bundle has no line tracks; %s runs on points only\n", to_string(variant).c_str());
  }
  const RunResult run = run_replay(bundle, estimator_config(cfg.sim, variant), variant, initial_covariance(cfg.sim));
  fs::create_directories(out);
  write_traj(out / ("traj_" + to_string(variant) + ".csv"), run);
  if (run.aborted) {
    std::fprintf(stderr, "replay aborted: %s\n", run.diagnostic.c_str());
    return 1;
  }
  if (!bundle.ground_truth.empty()) {
    VariantAggregate agg = aggregate(variant, {run_metrics(run, cfg.nees_full_state)});
    agg.counters = run.counters;
    write_series(out, agg);
    write_summary(out, {agg});
    print_summary({agg});
  }
  return 0;
}

int cmd_obscheck(const ExperimentConfig& cfg, const fs::path& out) {
  fs::create_directories(out);
  const auto rows = run_observability_checks(cfg.obs);
  std::ofstream csv = open_out(out / "obscheck.csv");
  csv << "direction,residual,relation,threshold,pass\n";
  for (const auto& r : rows) {
    csv << r.label << ',' << fmt(r.value) << ',' << r.relation << ',' << fmt(r.threshold) << ','
        << (r.relation == "info" ? "info" : r.pass ? "pass" : "fail") << '\n';
    std::printf("%-40s %14.6e %-4s %-10s %s\n", r.label.c_str(), r.value, r.relation.c_str(),
                r.relation == "info" ? "" : fmt(r.threshold).c_str(),
                r.relation == "info" ? "" : (r.pass ? "pass" : "fail"));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point/line/vanishing-point visual-inertial filter toolkit"};
  app.require_subcommand(1);
  std::string config_path, out_dir, variants;
  std::uint64_t seed = 0;
  int runs = 0;
  bool dump = false;
  BundlePaths bundle;
  std::string variant_name = "plv-iekf";

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON configuration");
    sub->add_option("--out", out_dir, "output directory");
  };
  CLI::App* sim = app.add_subcommand("simulate", "one seed, every variant");
  common(sim);
  CLI::Option* sim_seed = sim->add_option("--seed", seed, "random seed");
  sim->add_option("--variants", variants, "comma-separated: msckf,iekf,plv-msckf,plv-iekf");
  sim->add_flag("--dump-bundle", dump, "also write the generated data as a replay bundle");

  CLI::App* mc = app.add_subcommand("montecarlo", "paired Monte Carlo comparison");
  common(mc);
  CLI::Option* mc_seed = mc->add_option("--seed", seed, "first seed");
  mc->add_option("--runs", runs, "number of runs")->check(CLI::PositiveNumber);
  mc->add_option("--variants", variants, "comma-separated variant list");

  CLI::App* rp = app.add_subcommand("replay", "run a filter on recorded tracks");
  common(rp);
  rp->add_option("--imu", bundle.imu, "IMU CSV")->required();
  rp->add_option("--points", bundle.points, "point-track CSV")->required();
  rp->add_option("--lines", bundle.lines, "line-track CSV");
  rp->add_option("--gt", bundle.ground_truth, "ground-truth CSV");
  rp->add_option("--init", bundle.init, "initial-state JSON");
  rp->add_option("--variant", variant_name, "filter variant");

  CLI::App* ob = app.add_subcommand("obscheck", "observability diagnostics");
  common(ob);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    ExperimentConfig cfg = load(config_path);
    if (sim_seed->count() > 0 || mc_seed->count() > 0) {
      cfg.sim.seed = seed;
      cfg.obs.seed = seed;
    }
    if (runs > 0) cfg.sim.runs = runs;
    cfg.variants = parse_variants(variants, cfg.variants);
    const fs::path out = out_dir.empty() ? fs::path(cfg.output_dir) : fs::path(out_dir);

    if (sim->parsed()) return cmd_simulate(cfg, out, dump);
    if (mc->parsed()) return cmd_montecarlo(cfg, out);
    if (rp->parsed()) {
      Variant v;
      try {
        v = parse_variant(variant_name);
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
      return cmd_replay(cfg, bundle, v, out);
    }
    if (ob->parsed()) return cmd_obscheck(cfg, out);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
