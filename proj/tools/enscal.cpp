// Command-line front end: synthetic data generation, clustering, EMOS
// calibration, verification, and ensemble diagnostics over the CSV schemas.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "enscal/experiment.hpp"

namespace {

namespace fs = std::filesystem;

struct GlobalFlags {
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 0;
  std::string out;
};

int effective_jobs(const GlobalFlags& g) {
  if (g.jobs > 0) return g.jobs;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

enscal::ExperimentConfig load_experiment_config(const std::string& config_path,
                                                const GlobalFlags& g) {
  auto cfg = enscal::ExperimentConfig::from_ini(enscal::IniFile::parse_file(config_path));
  if (g.seed_set) cfg.seed = g.seed;
  if (!g.out.empty()) cfg.output_dir = g.out;
  return cfg;
}

enscal::Dataset load_data(const enscal::ExperimentConfig& cfg) {
  std::cerr << "loading dataset..." << std::endl;
  auto ds = enscal::load_dataset(cfg.observations_path, cfg.forecasts_path, cfg.stations_path);
  if (cfg.apply_orographic) enscal::apply_orographic_correction(ds);
  std::cerr << "loaded " << ds.stations.size() << " stations, " << ds.observations.size()
            << " observations, " << ds.forecasts.size() << " forecasts" << std::endl;
  return ds;
}

std::string out_path(const std::string& dir, const std::string& name) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory: " + dir);
  return (fs::path(dir) / name).string();
}

int cmd_simulate(const std::string& config_path, const GlobalFlags& g) {
  auto synth = enscal::synth_config_from_ini(enscal::IniFile::parse_file(config_path));
  if (g.seed_set) synth.seed = g.seed;
  const std::string dir = !g.out.empty() ? g.out : "data";
  const auto result = enscal::generate(synth);
  enscal::write_stations_csv(result.dataset, out_path(dir, "stations.csv"));
  enscal::write_observations_csv(result.dataset, out_path(dir, "observations.csv"));
  enscal::write_forecasts_csv(result.dataset, out_path(dir, "forecasts.csv"));
  if (synth.exact_emos_mode) {
    nlohmann::json j;
    j["a"] = result.truth.a;
    j["b"] = result.truth.b;
    j["c"] = result.truth.c;
    j["d"] = result.truth.d;
    std::ofstream out(out_path(dir, "truth.json"));
    out << j.dump(2) << '\n';
  }
  std::cerr << "wrote synthetic dataset to " << dir << std::endl;
  return 0;
}

int cmd_cluster(const std::string& config_path, const GlobalFlags& g) {
  const auto cfg = load_experiment_config(config_path, g);
  const auto ds = load_data(cfg);
  const auto mixture = [&] {
    const std::string ref = cfg.reference_label();
    for (const auto& m : cfg.mixtures) {
      if (m.label() == ref) return m;
    }
    return cfg.mixtures.front();
  }();
  const auto assignment = enscal::experiment_clustering(ds, cfg, mixture, cfg.verify_start);
  enscal::write_assignment_csv(assignment, out_path(cfg.output_dir, "clusters.csv"));
  enscal::write_centroids_csv(assignment, out_path(cfg.output_dir, "centroids.csv"));
  std::cerr << "clustered " << ds.stations.size() << " stations into " << assignment.k
            << " clusters (objective " << assignment.objective << ")" << std::endl;
  return 0;
}

void write_cluster_outputs(const enscal::ExperimentResult& result, const std::string& dir) {
  for (const auto& [key, assignment] : result.clusters) {
    const std::string suffix = key == "shared" ? "" : "_" + key;
    enscal::write_assignment_csv(assignment, out_path(dir, "clusters" + suffix + ".csv"));
    enscal::write_centroids_csv(assignment, out_path(dir, "centroids" + suffix + ".csv"));
  }
}

int cmd_calibrate(const std::string& config_path, const GlobalFlags& g) {
  const auto cfg = load_experiment_config(config_path, g);
  const auto ds = load_data(cfg);
  std::cerr << "fitting parameters..." << std::endl;
  const auto result =
      enscal::run_experiment(ds, cfg, effective_jobs(g), enscal::RunStage::Calibrate);
  enscal::write_parameters_jsonl(result.fits, out_path(cfg.output_dir, "parameters.jsonl"));
  write_cluster_outputs(result, cfg.output_dir);
  std::cerr << "wrote " << result.fits.size() << " parameter records" << std::endl;
  return 0;
}

int cmd_verify(const std::string& config_path, const std::string& params_path,
               const GlobalFlags& g) {
  const auto cfg = load_experiment_config(config_path, g);
  const auto ds = load_data(cfg);
  const auto fits = enscal::read_parameters_jsonl(params_path);
  std::cerr << "scoring with " << fits.size() << " preloaded parameter records..." << std::endl;
  const auto result =
      enscal::run_experiment(ds, cfg, effective_jobs(g), enscal::RunStage::Full, &fits);
  enscal::emit_reports(result, cfg.output_dir);
  std::cerr << "wrote reports to " << cfg.output_dir << std::endl;
  return 0;
}

int cmd_run(const std::string& config_path, const GlobalFlags& g) {
  const auto cfg = load_experiment_config(config_path, g);
  const auto ds = load_data(cfg);
  std::cerr << "running calibrate/verify grid..." << std::endl;
  const auto result = enscal::run_experiment(ds, cfg, effective_jobs(g));
  if (result.dropped_missing_obs > 0) {
    std::cerr << "dropped " << result.dropped_missing_obs
              << " forecast cases lacking a verifying observation" << std::endl;
  }
  enscal::emit_reports(result, cfg.output_dir);
  enscal::write_parameters_jsonl(result.fits, out_path(cfg.output_dir, "parameters.jsonl"));
  write_cluster_outputs(result, cfg.output_dir);
  std::cerr << "wrote reports to " << cfg.output_dir << std::endl;
  return 0;
}

int cmd_diagnose(const std::string& config_path, int lead, int members, const GlobalFlags& g) {
  const auto cfg = load_experiment_config(config_path, g);
  const auto ds = load_data(cfg);
  const auto rows = enscal::station_diagnostics(ds, cfg.high_group, cfg.low_group, members, lead);
  const std::string file = "diagnostics_lead" + std::to_string(lead) + ".csv";
  enscal::write_diagnostics_csv(rows, out_path(cfg.output_dir, file));
  std::cerr << "wrote " << rows.size() << " station diagnostics rows" << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-resolution ensemble calibration and verification toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalFlags g;
  app.add_option("--seed", g.seed, "master seed (overrides the config file)")
      ->each([&](const std::string&) { g.seed_set = true; });
  app.add_option("--jobs", g.jobs, "worker threads (default: hardware concurrency)");
  app.add_option("--out", g.out, "output directory (overrides the config file)");

  std::string config_path;
  std::string params_path;
  int lead = 5;
  int members = 50;

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset");
  simulate->add_option("--config", config_path, "config file with [synth] sections")->required();

  auto* cluster = app.add_subcommand("cluster", "compute the semi-local station clustering");
  cluster->add_option("--config", config_path, "experiment config file")->required();

  auto* calibrate = app.add_subcommand("calibrate", "fit EMOS parameters over the grid");
  calibrate->add_option("--config", config_path, "experiment config file")->required();

  auto* verify = app.add_subcommand("verify", "score forecasts with precomputed parameters");
  verify->add_option("--config", config_path, "experiment config file")->required();
  verify->add_option("--params", params_path, "parameters.jsonl from 'calibrate'")->required();

  auto* run = app.add_subcommand("run", "end-to-end calibrate + verify + reports");
  run->add_option("--config", config_path, "experiment config file")->required();

  auto* diagnose = app.add_subcommand("diagnose", "per-station high/low resolution contrasts");
  diagnose->add_option("--config", config_path, "experiment config file")->required();
  diagnose->add_option("--lead", lead, "lead time in days");
  diagnose->add_option("--members", members, "sub-ensemble size per group");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(config_path, g);
    if (cluster->parsed()) return cmd_cluster(config_path, g);
    if (calibrate->parsed()) return cmd_calibrate(config_path, g);
    if (verify->parsed()) return cmd_verify(config_path, params_path, g);
    if (run->parsed()) return cmd_run(config_path, g);
    if (diagnose->parsed()) return cmd_diagnose(config_path, lead, members, g);
  } catch (const std::exception& e) {
    nlohmann::json err;
    err["error"] = e.what();
    std::cerr << err.dump() << std::endl;
    return 1;
  }
  return 1;
}
