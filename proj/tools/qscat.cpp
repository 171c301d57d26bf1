// Copyright 2026 The qscat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// qscat command-line runner.
//
// Exit codes: 0 success, 1 invalid input (config, flags, output paths),
// 2 numerical failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qscat/experiment.hpp"
#include "qscat/qscat.hpp"

namespace {

namespace fs = std::filesystem;
using namespace qscat;

struct CommonOptions {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> quad_panels;
  std::optional<std::size_t> quad_nodes;
};

void add_common(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--config", opt.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", opt.out, "Output directory")->capture_default_str();
  cmd->add_option("--seed", opt.seed, "Override the config seed");
  cmd->add_option("--quad-panels", opt.quad_panels, "Maximum Gauss-Legendre panels per packet integral");
  cmd->add_option("--quad-nodes", opt.quad_nodes, "Gauss-Legendre nodes per panel");
}

ExperimentConfig load(const CommonOptions& opt) {
  ExperimentConfig cfg = load_config(opt.config);
  if (opt.seed) cfg.seed = cfg.schedule.seed = *opt.seed;
  if (opt.quad_panels) cfg.quadrature.panels = *opt.quad_panels;
  if (opt.quad_nodes) cfg.quadrature.nodes = *opt.quad_nodes;
  if (cfg.quadrature.panels < 2 || cfg.quadrature.nodes < 1)
    throw Error(ErrorKind::Validation, "--quad-panels must be >= 2 and --quad-nodes >= 1");
  return cfg;
}

void report(const fs::path& path) { std::cout << "wrote " << path.string() << "\n"; }

int cmd_smatrix(const CommonOptions& opt, const std::vector<double>& energies) {
  const ExperimentConfig cfg = load(opt);
  if (energies.empty()) throw Error(ErrorKind::Validation, "smatrix: give at least one --energy");
  std::vector<ScatteringMatrixAtE> smats;
  for (double e : energies) {
    smats.push_back(scattering_matrix(cfg.spec, e));
    std::cout << "E = " << format_number(e) << ": open " << smats.back().n_open << ", unitarity residual "
              << smats.back().unitarity_residual() << ", reciprocity residual " << smats.back().reciprocity_residual()
              << "\n";
  }
  const fs::path path = fs::path(opt.out) / "smatrix.csv";
  write_smatrix_csv(path, smats);
  report(path);
  return 0;
}

int cmd_ensemble(const CommonOptions& opt) {
  const ExperimentConfig cfg = load(opt);
  const MomentumEnsemble ens = experiment_ensemble(cfg);
  const fs::path path = fs::path(opt.out) / "ensemble.csv";
  write_ensemble_csv(path, ens);
  report(path);
  std::cout << ens.nodes.size() << " nodes, p_cut " << ens.p_cut << ", total mass " << ens.total_mass() << "\n";
  return 0;
}

int cmd_map(const CommonOptions& opt) {
  const ExperimentConfig cfg = load(opt);
  const BuiltMap built = build_map(cfg);
  const fs::path map_path = fs::path(opt.out) / cfg.outputs.map;
  write_map_csv(map_path, built.map);
  report(map_path);
  nlohmann::json diag = diagnostics_header(cfg, "map");
  diag["map"] = map_diagnostics(cfg, built);
  const fs::path diag_path = fs::path(opt.out) / cfg.outputs.diagnostics;
  write_json(diag_path, diag);
  report(diag_path);
  return 0;
}

/// evolve, thermo and run share the pipeline; they differ in what they write.
int cmd_pipeline(const CommonOptions& opt, const std::string& command) {
  const ExperimentConfig cfg = load(opt);
  const bool all = command == "run";
  const BuiltMap built = build_map(cfg);
  const Trajectory traj = run_trajectory(cfg, built.map);
  nlohmann::json diag = diagnostics_header(cfg, command);
  diag["map"] = map_diagnostics(cfg, built);
  diag["trajectory"] = trajectory_diagnostics(traj);

  if (all) {
    const fs::path p = fs::path(opt.out) / cfg.outputs.map;
    write_map_csv(p, built.map);
    report(p);
  }
  if (all || command == "evolve") {
    const fs::path p = fs::path(opt.out) / cfg.outputs.trajectory;
    write_trajectory_csv(p, cfg, traj);
    report(p);
  }
  if (all || command == "thermo") {
    std::optional<PopulationMap> w;
    try {
      w = population_map(built.map);
    } catch (const Error& e) {
      if (command == "thermo") rethrow_with_context(e, "thermo");
      diag["thermo"] = {{"skipped", e.what()}};
    }
    if (w) {
      const ThermoResult th = run_thermo(cfg, *w, traj);
      diag["thermo"] = {{"entropy_split", th.entropy_split}};
      if (!th.detailed_balance_residual)
        std::cerr << "note: no bath temperature for this source; thermo reports Q and dS only\n";
      else if (!th.entropy_split)
        std::cerr << "note: detailed-balance residual " << *th.detailed_balance_residual
                  << " is too large for the entropy split; thermo reports Q and dS only\n";
      const fs::path p = fs::path(opt.out) / cfg.outputs.thermo;
      write_thermo_csv(p, cfg, th);
      report(p);
    }
  }
  const fs::path diag_path = fs::path(opt.out) / cfg.outputs.diagnostics;
  write_json(diag_path, diag);
  report(diag_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qscat: quantum maps from scattering collisions"};
  app.require_subcommand(1);

  CommonOptions opt;
  std::vector<double> energies;
  auto* smatrix = app.add_subcommand("smatrix", "Scattering matrix blocks at given total energies");
  add_common(smatrix, opt);
  smatrix->add_option("--energy", energies, "Total energy (repeatable)");
  auto* ensemble = app.add_subcommand("ensemble", "Packet-centre quadrature grid of an ensemble source");
  add_common(ensemble, opt);
  auto* map = app.add_subcommand("map", "Build the collision map and its diagnostics");
  add_common(map, opt);
  auto* evolve = app.add_subcommand("evolve", "Iterate collisions and write the trajectory");
  add_common(evolve, opt);
  auto* thermo = app.add_subcommand("thermo", "Per-collision heat and entropy balance");
  add_common(thermo, opt);
  auto* run = app.add_subcommand("run", "Everything: map, trajectory, thermo, diagnostics");
  add_common(run, opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (smatrix->parsed()) return cmd_smatrix(opt, energies);
    if (ensemble->parsed()) return cmd_ensemble(opt);
    if (map->parsed()) return cmd_map(opt);
    if (evolve->parsed()) return cmd_pipeline(opt, "evolve");
    if (thermo->parsed()) return cmd_pipeline(opt, "thermo");
    if (run->parsed()) return cmd_pipeline(opt, "run");
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_validation() ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
