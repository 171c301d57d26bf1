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

// Repeated collisions interleaved with free evolution of Y.

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qscat/errors.hpp"
#include "qscat/linalg.hpp"
#include "qscat/scatmap.hpp"
#include "qscat/scatterer.hpp"

namespace qscat {

/// Hermitian, unit-trace, positive semidefinite state of Y in the energy basis.
class DensityMatrix {
 public:
  static constexpr double kHermitianTolerance = 1e-12;
  static constexpr double kTraceTolerance = 1e-10;
  static constexpr double kPositivityTolerance = 1e-9;

  /// Validates every invariant; throws Validation otherwise.
  static DensityMatrix from_matrix(const CMatrix& rho) {
    if (rho.rows() != rho.cols() || rho.rows() == 0)
      throw Error(ErrorKind::Validation, "density matrix must be square and non-empty");
    const double scale = std::max(1.0, rho.cwiseAbs().maxCoeff());
    if (hermiticity_residual(rho) > kHermitianTolerance * scale)
      throw Error(ErrorKind::Validation, "density matrix is not Hermitian");
    if (std::abs(rho.trace() - 1.0) > kTraceTolerance)
      throw Error(ErrorKind::Validation, "density matrix trace differs from 1");
    if (min_hermitian_eigenvalue(rho) < -kPositivityTolerance)
      throw Error(ErrorKind::Validation, "density matrix has a negative eigenvalue");
    return DensityMatrix(hermitian_part(rho));
  }

  static DensityMatrix diagonal(const std::vector<double>& populations) {
    CMatrix rho = CMatrix::Zero(static_cast<Eigen::Index>(populations.size()),
                                static_cast<Eigen::Index>(populations.size()));
    for (std::size_t j = 0; j < populations.size(); ++j)
      rho(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = populations[j];
    return from_matrix(rho);
  }

  static DensityMatrix maximally_mixed(std::size_t n) {
    return diagonal(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  /// e^{-beta H_Y} / Z.
  static DensityMatrix gibbs(const std::vector<double>& energies, double beta) {
    std::vector<double> w(energies.size());
    double z = 0.0;
    for (std::size_t j = 0; j < energies.size(); ++j) {
      w[j] = std::exp(-beta * (energies[j] - energies.front()));
      z += w[j];
    }
    for (double& x : w) x /= z;
    return diagonal(w);
  }

  std::size_t dim() const { return static_cast<std::size_t>(rho_.rows()); }
  const CMatrix& matrix() const { return rho_; }
  Complex operator()(std::size_t j, std::size_t k) const {
    return rho_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
  }

  std::vector<double> populations() const {
    std::vector<double> out(dim());
    for (std::size_t j = 0; j < dim(); ++j) out[j] = (*this)(j, j).real();
    return out;
  }
  RVector population_vector() const { return rho_.diagonal().real(); }

  double purity() const { return (rho_ * rho_).trace().real(); }
  double min_eigenvalue() const { return min_hermitian_eigenvalue(rho_); }

  /// (1/2) sum |eigenvalues of (rho - other)|
  double trace_distance(const DensityMatrix& other) const {
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(hermitian_part(rho_ - other.rho_), Eigen::EigenvaluesOnly);
    return 0.5 * solver.eigenvalues().cwiseAbs().sum();
  }

 private:
  explicit DensityMatrix(CMatrix rho) : rho_(std::move(rho)) {}
  friend DensityMatrix apply_map(const Superoperator&, const DensityMatrix&);
  friend DensityMatrix free_evolution(const DensityMatrix&, const SystemSpec&, double);

  CMatrix rho_;
};

inline constexpr double kTraceDriftTolerance = 1e-6;

/// rho' = S rho, re-Hermitized and renormalized. Throws TraceDrift if the
/// map moved the trace by more than 1e-6.
inline DensityMatrix apply_map(const Superoperator& s, const DensityMatrix& rho) {
  const std::size_t n = rho.dim();
  if (s.dim != n) {
    std::ostringstream os;
    os << "map acts on dimension " << s.dim << " but state has dimension " << n;
    throw Error(ErrorKind::DimensionMismatch, os.str());
  }
  // Row-major vectorization matches index j*N + k.
  CVector v(static_cast<Eigen::Index>(n * n));
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k) v(static_cast<Eigen::Index>(j * n + k)) = rho(j, k);
  const CVector out = s.matrix * v;
  CMatrix next(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k)
      next(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = out(static_cast<Eigen::Index>(j * n + k));
  next = hermitian_part(next);
  const double trace = next.trace().real();
  if (std::abs(trace - 1.0) > kTraceDriftTolerance) {
    std::ostringstream os;
    os << "trace after collision is " << trace;
    throw Error(ErrorKind::TraceDrift, os.str());
  }
  next /= trace;
  return DensityMatrix(std::move(next));
}

/// rho_jk -> exp(-i (e_j - e_k) tau / hbar) rho_jk.
inline DensityMatrix free_evolution(const DensityMatrix& rho, const SystemSpec& spec, double tau) {
  if (!(tau >= 0.0)) throw Error(ErrorKind::Validation, "free evolution time must be nonnegative");
  const std::size_t n = rho.dim();
  if (spec.dim() != n) throw Error(ErrorKind::DimensionMismatch, "spec and state dimensions differ");
  CMatrix next = rho.matrix();
  if (tau == 0.0) return rho;
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k)
      if (j != k)
        next(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) *=
            std::exp(Complex(0.0, -spec.gap(j, k) * tau / spec.hbar));
  return DensityMatrix(std::move(next));
}

struct CollisionSchedule {
  enum class Kind { Zero, Fixed, Poissonian };
  Kind kind = Kind::Zero;
  std::size_t count = 0;
  /// Fixed interval, or mean interval for Poissonian arrivals.
  double tau = 1.0;
  std::uint64_t seed = 0;

  /// Inter-collision times tau_1..tau_count. Deterministic given the seed.
  std::vector<double> times() const {
    if (!(tau >= 0.0)) throw Error(ErrorKind::Validation, "schedule tau must be nonnegative");
    std::vector<double> out(count, 0.0);
    switch (kind) {
      case Kind::Zero: break;
      case Kind::Fixed: std::fill(out.begin(), out.end(), tau); break;
      case Kind::Poissonian: {
        if (!(tau > 0.0)) throw Error(ErrorKind::Validation, "Poissonian schedule needs mean tau > 0");
        std::mt19937_64 rng(seed);
        std::exponential_distribution<double> dist(1.0 / tau);
        for (double& t : out) t = dist(rng);
        break;
      }
    }
    return out;
  }
};

/// rho^(n) = E_{tau_n} o S o ... o E_{tau_1} o S rho^(0); the result starts with rho^(0).
inline std::vector<DensityMatrix> run_collisions(const DensityMatrix& rho0, const Superoperator& s,
                                                 const CollisionSchedule& schedule, const SystemSpec& spec) {
  const std::vector<double> taus = schedule.times();
  std::vector<DensityMatrix> traj;
  traj.reserve(taus.size() + 1);
  traj.push_back(rho0);
  for (std::size_t step = 0; step < taus.size(); ++step) {
    try {
      traj.push_back(free_evolution(apply_map(s, traj.back()), spec, taus[step]));
    } catch (const Error& e) {
      rethrow_with_context(e, "collision " + std::to_string(step + 1));
    }
  }
  return traj;
}

/// (Px, Py, Pz) with rho = (I + P.sigma)/2 and level 0 the +z state.
inline std::array<double, 3> bloch_vector(const DensityMatrix& rho) {
  if (rho.dim() != 2) throw Error(ErrorKind::DimensionMismatch, "Bloch vector needs a two-level state");
  const Complex c = rho(0, 1);
  return {2.0 * c.real(), -2.0 * c.imag(), rho(0, 0).real() - rho(1, 1).real()};
}

inline constexpr double kPopulationFloor = 1e-12;

/// B_jk = -ln(rho_jj / rho_kk) / (e_j - e_k) for j > k. Each entry equals beta
/// when the populations are Gibbs at beta.
struct InverseTemperatureEstimates {
  std::size_t dim = 0;
  /// Row-major over (j, k); only j > k with e_j != e_k is filled.
  std::vector<std::optional<double>> values;
  /// Pairs skipped because a population fell below the floor.
  std::vector<std::pair<std::size_t, std::size_t>> underflow;

  const std::optional<double>& operator()(std::size_t j, std::size_t k) const { return values[j * dim + k]; }
};

enum class UnderflowPolicy { Throw, MarkUndefined };

inline InverseTemperatureEstimates inverse_temperature_estimators(const DensityMatrix& rho, const SystemSpec& spec,
                                                                  UnderflowPolicy policy = UnderflowPolicy::Throw,
                                                                  double floor = kPopulationFloor) {
  const std::size_t n = rho.dim();
  if (spec.dim() != n) throw Error(ErrorKind::DimensionMismatch, "spec and state dimensions differ");
  InverseTemperatureEstimates out{n, std::vector<std::optional<double>>(n * n), {}};
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < j; ++k) {
      if (spec.energies[j] == spec.energies[k]) continue;
      const double pj = rho(j, j).real();
      const double pk = rho(k, k).real();
      if (pj <= floor || pk <= floor) {
        out.underflow.emplace_back(j, k);
        continue;
      }
      out.values[j * n + k] = -std::log(pj / pk) / spec.gap(j, k);
    }
  if (policy == UnderflowPolicy::Throw && !out.underflow.empty()) {
    std::ostringstream os;
    os << "populations below " << floor << " for pairs";
    for (const auto& [j, k] : out.underflow) os << " (" << j << "," << k << ")";
    throw Error(ErrorKind::PopulationUnderflow, os.str());
  }
  return out;
}

}  // namespace qscat
