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

// Per-collision heat and entropy balance on the population sector,
// p' = W p. Entropies are in nats.

#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <vector>

#include "qscat/errors.hpp"
#include "qscat/linalg.hpp"
#include "qscat/scatmap.hpp"

namespace qscat {

struct ThermoRecord {
  std::size_t step = 0;
  double heat = 0.0;                // Q
  double entropy_change = 0.0;      // S(p') - S(p)
  double entropy_flow = 0.0;        // beta Q
  double entropy_production = 0.0;  // Sigma = dS - beta Q; +inf when a reverse transition is forbidden
};

/// -sum p ln p with 0 ln 0 = 0.
inline double shannon_entropy(const RVector& p) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < p.size(); ++j)
    if (p(j) > 0.0) s -= p(j) * std::log(p(j));
  return s;
}

inline void check_probability_vector(const RVector& p, std::size_t n) {
  if (static_cast<std::size_t>(p.size()) != n)
    throw Error(ErrorKind::DimensionMismatch, "population vector does not match W");
  if ((p.array() < -1e-12).any() || std::abs(p.sum() - 1.0) > 1e-9)
    throw Error(ErrorKind::Validation, "populations must be a probability vector");
}

/// Q = sum_jk e_j (W_jk - delta_jk) p_k.
inline double heat(const PopulationMap& w, const RVector& p, const std::vector<double>& energies) {
  check_probability_vector(p, w.dim);
  const RVector next = w.apply(p);
  double q = 0.0;
  for (std::size_t j = 0; j < w.dim; ++j) q += energies[j] * (next(static_cast<Eigen::Index>(j)) - p(static_cast<Eigen::Index>(j)));
  return q;
}

inline constexpr double kDetailedBalanceThreshold = 1e-4;

/// Q and dS only, for maps where the entropy-flow identification fails.
inline ThermoRecord energy_entropy_change(const PopulationMap& w, const RVector& p,
                                          const std::vector<double>& energies) {
  ThermoRecord rec;
  rec.heat = heat(w, p, energies);
  rec.entropy_change = shannon_entropy(w.apply(p)) - shannon_entropy(p);
  rec.entropy_flow = std::numeric_limits<double>::quiet_NaN();
  rec.entropy_production = std::numeric_limits<double>::quiet_NaN();
  return rec;
}

/// Splits dS = beta Q + Sigma. Requires W to satisfy detailed balance at beta
/// so that ln(W_jk / W_kj) = -beta (e_j - e_k); otherwise throws
/// DetailedBalanceViolated.
inline ThermoRecord entropy_production(const PopulationMap& w, const RVector& p, double beta,
                                       const std::vector<double>& energies,
                                       double db_threshold = kDetailedBalanceThreshold) {
  const double residual = detailed_balance_residual(w, beta, energies);
  if (!(residual < db_threshold)) {
    std::ostringstream os;
    os << "detailed-balance residual " << residual << " exceeds " << db_threshold;
    throw Error(ErrorKind::DetailedBalanceViolated, os.str());
  }
  ThermoRecord rec = energy_entropy_change(w, p, energies);
  rec.entropy_flow = beta * rec.heat;
  rec.entropy_production = rec.entropy_change - rec.entropy_flow;

  // A forward jump with no reverse path makes Sigma infinite.
  const RVector next = w.apply(p);
  for (std::size_t j = 0; j < w.dim; ++j)
    for (std::size_t k = 0; k < w.dim; ++k) {
      const auto jj = static_cast<Eigen::Index>(j);
      const auto kk = static_cast<Eigen::Index>(k);
      if (w.w(jj, kk) * p(kk) > 0.0 && w.w(kk, jj) * next(jj) == 0.0)
        rec.entropy_production = std::numeric_limits<double>::infinity();
    }
  return rec;
}

/// One record per consecutive pair of population vectors.
inline std::vector<ThermoRecord> thermo_trajectory(const PopulationMap& w, const std::vector<RVector>& pops,
                                                   double beta, const std::vector<double>& energies,
                                                   double db_threshold = kDetailedBalanceThreshold) {
  std::vector<ThermoRecord> out;
  for (std::size_t i = 0; i + 1 < pops.size(); ++i) {
    ThermoRecord rec = entropy_production(w, pops[i], beta, energies, db_threshold);
    rec.step = i + 1;
    out.push_back(rec);
  }
  return out;
}

}  // namespace qscat
