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

// Experiment configuration: one JSON document per run. Unknown keys are
// rejected and every problem is reported with its field path, all at once.

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>
#include "qscat/dynamics.hpp"
#include "qscat/errors.hpp"
#include "qscat/linalg.hpp"
#include "qscat/scatmap.hpp"
#include "qscat/scatterer.hpp"
#include "qscat/wavepacket.hpp"

namespace qscat {

enum class SourceKind { PurePacket, NarrowEnsemble, BroadEnsemble };

struct SourceConfig {
  SourceKind kind = SourceKind::PurePacket;
  // pure_packet
  double p0 = 0.0;
  double x0 = 0.0;
  double sigma = 0.0;
  bool narrow_limit = false;  // "map": "narrow" instead of "exact"
  // ensembles
  EnsembleKind distribution = EnsembleKind::Effusion;
  double beta = 0.0;
  EnsembleGridConfig grid{};
};

enum class InitialKind { Diagonal, Gibbs, MaximallyMixed, Matrix };

struct InitialStateConfig {
  InitialKind kind = InitialKind::MaximallyMixed;
  std::vector<double> populations;
  double beta = 0.0;
  CMatrix matrix;
};

struct OutputConfig {
  std::size_t thinning = 1;
  std::string trajectory = "trajectory.csv";
  std::string thermo = "thermo.csv";
  std::string diagnostics = "diagnostics.json";
  std::string map = "map.csv";
};

struct ExperimentConfig {
  std::string name = "experiment";
  SystemSpec spec;
  SourceConfig source;
  InitialStateConfig initial;
  CollisionSchedule schedule;
  std::size_t steps = 0;
  std::uint64_t seed = 0;
  QuadratureConfig quadrature{};
  OutputConfig outputs{};
  /// Bath inverse temperature for the thermo split; defaults to the source beta.
  std::optional<double> thermo_beta;
};

namespace detail {

using nlohmann::json;

/// Walks a JSON object, recording problems with their paths.
class FieldReader {
 public:
  FieldReader(const json& node, std::string path, std::vector<std::string>& problems)
      : node_(node), path_(std::move(path)), problems_(problems) {
    if (!node_.is_object()) problem("", "must be an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  void problem(const std::string& key, const std::string& what) const {
    problems_.push_back((key.empty() ? (path_.empty() ? std::string("<root>") : path_) : at(key)) + ": " + what);
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return node_.is_object() && node_.contains(key);
  }
  const json& get(const std::string& key) const { return node_.at(key); }

  template <class T>
  std::optional<T> optional(const std::string& key) {
    if (!has(key)) return std::nullopt;
    if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
      const json& v = node_.at(key);
      if (!(v.is_number_unsigned() || (v.is_number_integer() && v.template get<std::int64_t>() >= 0))) {
        problem(key, "must be a nonnegative integer");
        return std::nullopt;
      }
    }
    try {
      return node_.at(key).get<T>();
    } catch (const json::exception&) {
      problem(key, "has the wrong type");
      return std::nullopt;
    }
  }

  template <class T>
  T required(const std::string& key, T fallback = T{}) {
    if (!has(key)) {
      problem(key, "is required");
      return fallback;
    }
    return optional<T>(key).value_or(fallback);
  }

  double positive(const std::string& key) {
    const double v = required<double>(key, 1.0);
    if (!(v > 0.0) || !std::isfinite(v)) problem(key, "must be positive and finite");
    return v;
  }

  /// Call after all reads; flags keys nobody asked for.
  void reject_unknown() const {
    if (!node_.is_object()) return;
    for (const auto& item : node_.items())
      if (!seen_.count(item.key())) problem(item.key(), "unknown key");
  }

 private:
  const json& node_;
  std::string path_;
  std::vector<std::string>& problems_;
  std::set<std::string> seen_;
};

inline RMatrix read_real_matrix(const json& node, const std::string& path, std::vector<std::string>& problems) {
  if (!node.is_array() || node.empty()) {
    problems.push_back(path + ": must be a non-empty array of rows");
    return {};
  }
  const std::size_t rows = node.size();
  const std::size_t cols = node.front().is_array() ? node.front().size() : 0;
  RMatrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!node[r].is_array() || node[r].size() != cols) {
      problems.push_back(path + "[" + std::to_string(r) + "]: rows must all have " + std::to_string(cols) + " entries");
      return {};
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!node[r][c].is_number()) {
        problems.push_back(path + "[" + std::to_string(r) + "][" + std::to_string(c) + "]: must be a number");
        return {};
      }
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = node[r][c].get<double>();
    }
  }
  return out;
}

inline void read_spec(FieldReader& root, ExperimentConfig& cfg, std::vector<std::string>& problems) {
  if (!root.has("spec")) {
    root.problem("spec", "is required");
    return;
  }
  FieldReader r(root.get("spec"), root.at("spec"), problems);
  cfg.spec.energies = r.required<std::vector<double>>("energies");
  if (r.has("coupling_matrix"))
    cfg.spec.coupling = read_real_matrix(r.get("coupling_matrix"), r.at("coupling_matrix"), problems);
  else
    r.problem("coupling_matrix", "is required");
  cfg.spec.g = r.required<double>("g", 1.0);
  cfg.spec.mass = r.positive("mass");
  cfg.spec.hbar = r.optional<double>("hbar").value_or(1.0);
  if (!(cfg.spec.hbar > 0.0)) r.problem("hbar", "must be positive");
  r.reject_unknown();
  if (problems.empty()) {
    try {
      cfg.spec.validate();
    } catch (const Error& e) {
      problems.push_back(root.at("spec") + ": " + e.what());
    }
  }
}

inline void read_grid(FieldReader& r, EnsembleGridConfig& grid) {
  if (auto n = r.optional<std::size_t>("nodes_per_segment")) {
    grid.nodes_per_segment = *n;
    if (*n < 2) r.problem("nodes_per_segment", "must be at least 2");
  }
  if (auto t = r.optional<double>("tail_mass")) {
    grid.tail_mass = *t;
    if (!(*t > 0.0 && *t < 1.0)) r.problem("tail_mass", "must lie in (0, 1)");
  }
}

inline void read_source(FieldReader& root, ExperimentConfig& cfg, std::vector<std::string>& problems) {
  if (!root.has("source")) {
    root.problem("source", "is required");
    return;
  }
  FieldReader r(root.get("source"), root.at("source"), problems);
  SourceConfig& s = cfg.source;
  const std::string kind = r.required<std::string>("kind");
  if (kind == "pure_packet") {
    s.kind = SourceKind::PurePacket;
    s.p0 = r.required<double>("p0");
    s.x0 = r.optional<double>("x0").value_or(0.0);
    s.sigma = r.positive("sigma");
    const std::string map = r.optional<std::string>("map").value_or("exact");
    if (map == "narrow") s.narrow_limit = true;
    else if (map != "exact") r.problem("map", "must be \"exact\" or \"narrow\"");
    if (!s.narrow_limit) {
      try {
        (void)GaussianPacket::make(s.p0, s.x0, s.sigma);
      } catch (const Error& e) {
        r.problem("p0", e.what());
      }
    } else if (s.p0 == 0.0) {
      r.problem("p0", "must be nonzero");
    }
  } else if (kind == "narrow_ensemble") {
    s.kind = SourceKind::NarrowEnsemble;
    const std::string dist = r.required<std::string>("distribution");
    if (dist == "effusion") s.distribution = EnsembleKind::Effusion;
    else if (dist == "maxwell_boltzmann") s.distribution = EnsembleKind::MaxwellBoltzmann;
    else r.problem("distribution", "must be \"effusion\" or \"maxwell_boltzmann\"");
    s.beta = r.positive("beta");
    read_grid(r, s.grid);
  } else if (kind == "broad_ensemble") {
    s.kind = SourceKind::BroadEnsemble;
    s.distribution = EnsembleKind::BroadEffusionMixture;
    s.beta = r.positive("beta");
    s.sigma = r.positive("sigma");
    read_grid(r, s.grid);
  } else if (r.has("kind")) {
    r.problem("kind", "must be one of pure_packet, narrow_ensemble, broad_ensemble");
  }
  r.reject_unknown();
}

inline void read_initial(FieldReader& root, ExperimentConfig& cfg, std::vector<std::string>& problems) {
  if (!root.has("initial_state")) {
    root.problem("initial_state", "is required");
    return;
  }
  FieldReader r(root.get("initial_state"), root.at("initial_state"), problems);
  InitialStateConfig& init = cfg.initial;
  const std::string kind = r.required<std::string>("kind");
  if (kind == "diagonal") {
    init.kind = InitialKind::Diagonal;
    init.populations = r.required<std::vector<double>>("populations");
  } else if (kind == "gibbs") {
    init.kind = InitialKind::Gibbs;
    init.beta = r.required<double>("beta");
  } else if (kind == "maximally_mixed") {
    init.kind = InitialKind::MaximallyMixed;
  } else if (kind == "matrix") {
    init.kind = InitialKind::Matrix;
    RMatrix re, im;
    if (r.has("re")) re = read_real_matrix(r.get("re"), r.at("re"), problems);
    else r.problem("re", "is required");
    if (r.has("im")) im = read_real_matrix(r.get("im"), r.at("im"), problems);
    else im = RMatrix::Zero(re.rows(), re.cols());
    if (re.rows() == im.rows() && re.cols() == im.cols()) {
      init.matrix = re.cast<Complex>() + kI * im.cast<Complex>();
    } else {
      r.problem("im", "must match the shape of re");
    }
  } else if (r.has("kind")) {
    r.problem("kind", "must be one of diagonal, gibbs, maximally_mixed, matrix");
  }
  r.reject_unknown();
}

inline void read_schedule(FieldReader& root, ExperimentConfig& cfg, std::vector<std::string>& problems) {
  if (!root.has("schedule")) return;  // zero intervals
  FieldReader r(root.get("schedule"), root.at("schedule"), problems);
  const std::string kind = r.required<std::string>("kind");
  if (kind == "zero") cfg.schedule.kind = CollisionSchedule::Kind::Zero;
  else if (kind == "fixed") cfg.schedule.kind = CollisionSchedule::Kind::Fixed;
  else if (kind == "poissonian") cfg.schedule.kind = CollisionSchedule::Kind::Poissonian;
  else if (r.has("kind")) r.problem("kind", "must be one of zero, fixed, poissonian");
  cfg.schedule.tau = r.optional<double>("tau").value_or(1.0);
  if (!(cfg.schedule.tau >= 0.0)) r.problem("tau", "must be nonnegative");
  if (cfg.schedule.kind == CollisionSchedule::Kind::Poissonian && !(cfg.schedule.tau > 0.0))
    r.problem("tau", "Poissonian mean interval must be positive");
  r.reject_unknown();
}

inline void read_quadrature(FieldReader& root, ExperimentConfig& cfg, std::vector<std::string>& problems) {
  if (!root.has("quadrature")) return;
  FieldReader r(root.get("quadrature"), root.at("quadrature"), problems);
  if (auto v = r.optional<std::size_t>("panels")) cfg.quadrature.panels = *v;
  if (auto v = r.optional<std::size_t>("nodes")) cfg.quadrature.nodes = *v;
  if (auto v = r.optional<double>("tol")) cfg.quadrature.tol = *v;
  if (cfg.quadrature.panels < 2) r.problem("panels", "must be at least 2");
  if (cfg.quadrature.nodes < 1) r.problem("nodes", "must be at least 1");
  if (!(cfg.quadrature.tol > 0.0)) r.problem("tol", "must be positive");
  r.reject_unknown();
}

inline void read_outputs(FieldReader& root, ExperimentConfig& cfg, std::vector<std::string>& problems) {
  if (!root.has("outputs")) return;
  FieldReader r(root.get("outputs"), root.at("outputs"), problems);
  OutputConfig& o = cfg.outputs;
  if (auto v = r.optional<std::size_t>("thinning")) o.thinning = *v;
  if (o.thinning < 1) r.problem("thinning", "must be at least 1");
  for (auto [key, field] : {std::pair{"trajectory", &o.trajectory}, std::pair{"thermo", &o.thermo},
                            std::pair{"diagnostics", &o.diagnostics}, std::pair{"map", &o.map}}) {
    if (auto v = r.optional<std::string>(key)) {
      *field = *v;
      if (v->empty()) r.problem(key, "must be a non-empty file name");
    }
  }
  r.reject_unknown();
}

}  // namespace detail

/// Parses and validates a configuration document. Throws Validation with
/// one "path: problem" entry per line.
inline ExperimentConfig parse_config(const nlohmann::json& doc) {
  std::vector<std::string> problems;
  ExperimentConfig cfg;
  detail::FieldReader root(doc, "", problems);
  if (doc.is_object()) {
    cfg.name = root.optional<std::string>("name").value_or("experiment");
    detail::read_spec(root, cfg, problems);
    detail::read_source(root, cfg, problems);
    detail::read_initial(root, cfg, problems);
    detail::read_schedule(root, cfg, problems);
    detail::read_quadrature(root, cfg, problems);
    detail::read_outputs(root, cfg, problems);
    cfg.steps = root.required<std::size_t>("steps");
    cfg.seed = root.optional<std::uint64_t>("seed").value_or(0);
    if (cfg.schedule.kind == CollisionSchedule::Kind::Poissonian && !root.has("seed"))
      root.problem("seed", "is required for a poissonian schedule");
    if (root.has("thermo")) {
      detail::FieldReader t(root.get("thermo"), "thermo", problems);
      cfg.thermo_beta = t.optional<double>("beta");
      if (cfg.thermo_beta && !(*cfg.thermo_beta > 0.0)) t.problem("beta", "must be positive");
      t.reject_unknown();
    }
    root.reject_unknown();
  }

  // Cross-field checks once the blocks parsed.
  if (problems.empty()) {
    const std::size_t n = cfg.spec.dim();
    if (cfg.initial.kind == InitialKind::Diagonal && cfg.initial.populations.size() != n)
      problems.push_back("initial_state.populations: expected " + std::to_string(n) + " entries");
    if (cfg.initial.kind == InitialKind::Matrix && static_cast<std::size_t>(cfg.initial.matrix.rows()) != n)
      problems.push_back("initial_state.re: expected a " + std::to_string(n) + "x" + std::to_string(n) + " matrix");
  }
  if (!problems.empty()) {
    std::string msg = "invalid config:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw Error(ErrorKind::Validation, msg);
  }
  cfg.schedule.count = cfg.steps;
  cfg.schedule.seed = cfg.seed;
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Validation, "cannot open config file " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Validation, "config " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

inline DensityMatrix initial_state(const ExperimentConfig& cfg) {
  try {
    switch (cfg.initial.kind) {
      case InitialKind::Diagonal: return DensityMatrix::diagonal(cfg.initial.populations);
      case InitialKind::Gibbs: return DensityMatrix::gibbs(cfg.spec.energies, cfg.initial.beta);
      case InitialKind::MaximallyMixed: return DensityMatrix::maximally_mixed(cfg.spec.dim());
      case InitialKind::Matrix: return DensityMatrix::from_matrix(cfg.initial.matrix);
    }
  } catch (const Error& e) {
    rethrow_with_context(e, "initial_state");
  }
  throw Error(ErrorKind::Validation, "initial_state: unknown kind");
}

}  // namespace qscat
