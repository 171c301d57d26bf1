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

// Orchestration behind the CLI: build the map a config describes, run the
// collision sequence, and write CSV / JSON outputs. Output bytes depend only
// on the config and seed.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include "qscat/config.hpp"
#include "qscat/dynamics.hpp"
#include "qscat/errors.hpp"
#include "qscat/scatmap.hpp"
#include "qscat/thermo.hpp"
#include "qscat/wavepacket.hpp"

namespace qscat {

inline constexpr int kCsvSchemaVersion = 1;
inline constexpr const char* kDiagnosticsSchema = "qscat.diagnostics/1";

/// Shortest round-trip decimal form, stable across runs.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";  // no "-0"
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline const char* to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::PurePacket: return "pure_packet";
    case SourceKind::NarrowEnsemble: return "narrow_ensemble";
    case SourceKind::BroadEnsemble: return "broad_ensemble";
  }
  return "unknown";
}

/// Packet-centre grid of an ensemble source; Validation for pure packets.
inline MomentumEnsemble experiment_ensemble(const ExperimentConfig& cfg) {
  const SourceConfig& s = cfg.source;
  if (s.kind == SourceKind::PurePacket)
    throw Error(ErrorKind::Validation, "source: a pure_packet source has no ensemble grid");
  return make_momentum_ensemble(s.distribution, s.beta, cfg.spec, s.kind == SourceKind::BroadEnsemble ? s.sigma : 0.0,
                                s.grid);
}

/// Bath inverse temperature for the thermo split, if one is defined.
inline std::optional<double> experiment_beta(const ExperimentConfig& cfg) {
  if (cfg.thermo_beta) return cfg.thermo_beta;
  if (cfg.source.kind != SourceKind::PurePacket) return cfg.source.beta;
  return std::nullopt;
}

struct BuiltMap {
  Superoperator map;
  std::optional<MomentumEnsemble> ensemble;
  /// Largest s-matrix unitarity residual over the energies the source samples.
  double unitarity_residual = 0.0;
};

inline double sampled_unitarity_residual(const SystemSpec& spec, const std::vector<double>& momenta) {
  double worst = 0.0;
  for (double p : momenta) {
    if (!(p > 0.0)) continue;
    const double kinetic = p * p / (2.0 * spec.mass);
    for (double e : spec.energies)
      worst = std::max(worst, detail::scattering_matrix_off_threshold(spec, kinetic + e).unitarity_residual());
  }
  return worst;
}

inline BuiltMap build_map(const ExperimentConfig& cfg) {
  const SourceConfig& s = cfg.source;
  BuiltMap out;
  try {
    switch (s.kind) {
      case SourceKind::PurePacket: {
        const double mag = std::abs(s.p0);
        const Side side = s.p0 > 0.0 ? Side::Left : Side::Right;
        out.map = s.narrow_limit ? narrow_map(cfg.spec, mag, side)
                                 : pure_packet_map(cfg.spec, GaussianPacket::make(s.p0, s.x0, s.sigma), cfg.quadrature);
        std::vector<double> probe;
        const double lo = std::max(0.0, mag - kPacketHalfWidthSigmas * s.sigma);
        const double hi = mag + kPacketHalfWidthSigmas * s.sigma;
        for (int i = 0; i <= 32; ++i) probe.push_back(lo + (hi - lo) * i / 32.0);
        out.unitarity_residual = sampled_unitarity_residual(cfg.spec, probe);
        break;
      }
      case SourceKind::NarrowEnsemble:
      case SourceKind::BroadEnsemble: {
        out.ensemble = experiment_ensemble(cfg);
        const EnsembleBuilder builder = s.kind == SourceKind::NarrowEnsemble
                                            ? EnsembleBuilder::narrow()
                                            : EnsembleBuilder::full(s.sigma, cfg.quadrature);
        out.map = ensemble_map(cfg.spec, *out.ensemble, builder);
        out.unitarity_residual = sampled_unitarity_residual(cfg.spec, out.ensemble->nodes);
        break;
      }
    }
  } catch (const Error& e) {
    rethrow_with_context(e, "scatmap");
  }
  return out;
}

struct Trajectory {
  std::vector<DensityMatrix> states;
  std::vector<double> times;  // cumulative, times[0] = 0
  double max_trace_drift = 0.0;
};

/// |tr(S rho) - 1| before renormalization.
inline double trace_drift(const Superoperator& s, const DensityMatrix& rho) {
  Complex tr = 0.0;
  for (std::size_t jp = 0; jp < s.dim; ++jp)
    for (std::size_t j = 0; j < s.dim; ++j)
      for (std::size_t k = 0; k < s.dim; ++k) tr += s(jp, jp, j, k) * rho(j, k);
  return std::abs(tr - 1.0);
}

inline Trajectory run_trajectory(const ExperimentConfig& cfg, const Superoperator& s) {
  Trajectory out;
  try {
    out.states = run_collisions(initial_state(cfg), s, cfg.schedule, cfg.spec);
  } catch (const Error& e) {
    rethrow_with_context(e, "dynamics");
  }
  const std::vector<double> taus = cfg.schedule.times();
  out.times.push_back(0.0);
  for (double t : taus) out.times.push_back(out.times.back() + t);
  for (std::size_t i = 0; i + 1 < out.states.size(); ++i)
    out.max_trace_drift = std::max(out.max_trace_drift, trace_drift(s, out.states[i]));
  return out;
}

struct ThermoResult {
  std::vector<ThermoRecord> records;
  bool entropy_split = false;  // false when no beta or detailed balance fails
  std::optional<double> detailed_balance_residual;
};

inline ThermoResult run_thermo(const ExperimentConfig& cfg, const PopulationMap& w, const Trajectory& traj) {
  ThermoResult out;
  const std::optional<double> beta = experiment_beta(cfg);
  if (beta) {
    out.detailed_balance_residual = detailed_balance_residual(w, *beta, cfg.spec.energies);
    out.entropy_split = *out.detailed_balance_residual < kDetailedBalanceThreshold;
  }
  for (std::size_t i = 0; i + 1 < traj.states.size(); ++i) {
    RVector p = traj.states[i].population_vector();
    p = p.cwiseMax(0.0);
    p /= p.sum();
    ThermoRecord rec;
    try {
      rec = out.entropy_split ? entropy_production(w, p, *beta, cfg.spec.energies)
                              : energy_entropy_change(w, p, cfg.spec.energies);
    } catch (const Error& e) {
      rethrow_with_context(e, "thermo step " + std::to_string(i + 1));
    }
    rec.step = i + 1;
    out.records.push_back(rec);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Writers.

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Validation, "cannot write " + path.string());
  return out;
}

inline void write_map_csv(const std::filesystem::path& path, const Superoperator& s) {
  std::ofstream out = open_output(path);
  out << "# qscat map v" << kCsvSchemaVersion << "\n";
  out << "jp,kp,j,k,re,im\n";
  for (std::size_t jp = 0; jp < s.dim; ++jp)
    for (std::size_t kp = 0; kp < s.dim; ++kp)
      for (std::size_t j = 0; j < s.dim; ++j)
        for (std::size_t k = 0; k < s.dim; ++k) {
          const Complex v = s(jp, kp, j, k);
          out << jp << ',' << kp << ',' << j << ',' << k << ',' << format_number(v.real()) << ','
              << format_number(v.imag()) << "\n";
        }
}

inline void write_ensemble_csv(const std::filesystem::path& path, const MomentumEnsemble& ens) {
  std::ofstream out = open_output(path);
  out << "# qscat ensemble v" << kCsvSchemaVersion << " kind=" << to_string(ens.kind) << "\n";
  out << "p,weight,density\n";
  for (std::size_t i = 0; i < ens.nodes.size(); ++i)
    out << format_number(ens.nodes[i]) << ',' << format_number(ens.weights[i]) << ','
        << format_number(ens.density[i]) << "\n";
}

inline void write_smatrix_csv(const std::filesystem::path& path, const std::vector<ScatteringMatrixAtE>& smats) {
  std::ofstream out = open_output(path);
  out << "# qscat smatrix v" << kCsvSchemaVersion << "\n";
  out << "energy,block,row,col,re,im\n";
  for (const auto& s : smats) {
    for (const auto& [name, block] : {std::pair{"rL", &s.r_left}, std::pair{"tL", &s.t_left},
                                      std::pair{"rR", &s.r_right}, std::pair{"tR", &s.t_right}})
      for (Eigen::Index r = 0; r < block->rows(); ++r)
        for (Eigen::Index c = 0; c < block->cols(); ++c)
          out << format_number(s.energy) << ',' << name << ',' << r << ',' << c << ','
              << format_number((*block)(r, c).real()) << ',' << format_number((*block)(r, c).imag()) << "\n";
  }
}

/// step, time, rho entries (upper triangle, re/im), Bloch vector for N = 2,
/// then B_jk for j > k; undefined estimators are left empty.
inline void write_trajectory_csv(const std::filesystem::path& path, const ExperimentConfig& cfg,
                                 const Trajectory& traj) {
  const std::size_t n = cfg.spec.dim();
  std::ofstream out = open_output(path);
  out << "# qscat trajectory v" << kCsvSchemaVersion << " name=" << cfg.name << "\n";
  out << "step,time";
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = j; k < n; ++k) out << ",rho_" << j << k << "_re,rho_" << j << k << "_im";
  if (n == 2) out << ",Px,Py,Pz";
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < j; ++k) out << ",B_" << j << k;
  out << "\n";
  const std::size_t last = traj.states.size() - 1;
  for (std::size_t step = 0; step <= last; ++step) {
    if (step % cfg.outputs.thinning != 0 && step != last) continue;
    const DensityMatrix& rho = traj.states[step];
    out << step << ',' << format_number(traj.times[step]);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = j; k < n; ++k)
        out << ',' << format_number(rho(j, k).real()) << ',' << format_number(rho(j, k).imag());
    if (n == 2) {
      const auto p = bloch_vector(rho);
      out << ',' << format_number(p[0]) << ',' << format_number(p[1]) << ',' << format_number(p[2]);
    }
    const InverseTemperatureEstimates b = inverse_temperature_estimators(rho, cfg.spec, UnderflowPolicy::MarkUndefined);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < j; ++k) {
        out << ',';
        if (b(j, k)) out << format_number(*b(j, k));
      }
    out << "\n";
  }
}

inline void write_thermo_csv(const std::filesystem::path& path, const ExperimentConfig& cfg, const ThermoResult& th) {
  std::ofstream out = open_output(path);
  out << "# qscat thermo v" << kCsvSchemaVersion << " name=" << cfg.name
      << " entropy_split=" << (th.entropy_split ? "true" : "false") << "\n";
  out << "step,Q,dS,flow,Sigma\n";
  for (const auto& r : th.records) {
    out << r.step << ',' << format_number(r.heat) << ',' << format_number(r.entropy_change) << ',';
    if (th.entropy_split) out << format_number(r.entropy_flow) << ',' << format_number(r.entropy_production);
    else out << ',';
    out << "\n";
  }
}

inline nlohmann::json matrix_json(const RMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline nlohmann::json vector_json(const RVector& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

/// Non-finite numbers become null so the document stays valid JSON.
inline nlohmann::json number_json(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); }

inline nlohmann::json map_diagnostics(const ExperimentConfig& cfg, const BuiltMap& built) {
  const Superoperator& s = built.map;
  nlohmann::json d;
  d["trace_residual"] = s.trace_residual();
  d["hermiticity_residual"] = s.hermiticity_residual();
  d["choi_min_eigenvalue"] = choi_min_eigenvalue(s);
  d["max_entry_magnitude"] = s.max_entry_magnitude();
  d["quadrature_error"] = s.quadrature_error;
  d["population_coherence_coupling"] = s.population_coherence_coupling();
  d["smatrix_unitarity_residual"] = built.unitarity_residual;
  try {
    const PopulationMap w = population_map(s);
    d["population_map"] = matrix_json(w.w);
    d["stationary_populations"] = vector_json(stationary_distribution(w));
    if (const auto beta = experiment_beta(cfg))
      d["detailed_balance_residual"] = number_json(detailed_balance_residual(w, *beta, cfg.spec.energies));
  } catch (const Error& e) {
    d["population_map_error"] = e.what();
  }
  if (built.ensemble) {
    d["ensemble"] = {{"kind", to_string(built.ensemble->kind)},
                     {"nodes", built.ensemble->nodes.size()},
                     {"p_cut", built.ensemble->p_cut},
                     {"total_mass", built.ensemble->total_mass()}};
  }
  return d;
}

inline nlohmann::json diagnostics_header(const ExperimentConfig& cfg, const std::string& command) {
  return {{"schema", kDiagnosticsSchema}, {"name", cfg.name},         {"command", command},
          {"seed", cfg.seed},             {"source", to_string(cfg.source.kind)},
          {"dim", cfg.spec.dim()},        {"steps", cfg.steps}};
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out = open_output(path);
  out << doc.dump(2) << "\n";
}

/// Trajectory summary for diagnostics.
inline nlohmann::json trajectory_diagnostics(const Trajectory& traj) {
  double min_eig = 1.0;
  double max_purity = 0.0;
  for (const auto& rho : traj.states) {
    min_eig = std::min(min_eig, rho.min_eigenvalue());
    max_purity = std::max(max_purity, rho.purity());
  }
  return {{"max_trace_drift", traj.max_trace_drift},
          {"min_state_eigenvalue", min_eig},
          {"max_purity", max_purity},
          {"final_populations", vector_json(traj.states.back().population_vector())}};
}

}  // namespace qscat
