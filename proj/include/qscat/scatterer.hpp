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

// The fixed N-level scatterer and the exact multichannel scattering matrix of
// the contact interaction g*delta(x) (x) nu.
//
// Conventions:
//   * levels are 0-based and sorted, e_0 <= ... <= e_{N-1};
//   * channel j is open at total energy E when e_j <= E, with momentum
//     p_j = sqrt(2m(E - e_j)); closed channels carry p_j = i sqrt(2m(e_j - E));
//   * since levels are sorted, the open channels at any E are 0..n_open-1, so
//     block indices coincide with level indices.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "qscat/errors.hpp"
#include "qscat/linalg.hpp"

namespace qscat {

enum class Side { Left, Right };

inline const char* to_string(Side side) { return side == Side::Left ? "left" : "right"; }

/// Energies, coupling matrix and units of the scatterer Y.
struct SystemSpec {
  std::vector<double> energies;
  RMatrix coupling;
  double g = 1.0;
  double mass = 1.0;
  double hbar = 1.0;

  std::size_t dim() const { return energies.size(); }

  /// Bohr gap e_j - e_k.
  double gap(std::size_t j, std::size_t k) const { return energies[j] - energies[k]; }

  /// Largest |e_j - e_k|.
  double max_gap() const { return energies.empty() ? 0.0 : energies.back() - energies.front(); }

  /// True when the coupling is diagonal, i.e. [H_Y, nu] = 0 and the
  /// collisions cannot thermalize Y.
  bool coupling_commutes_with_hamiltonian() const {
    for (Eigen::Index r = 0; r < coupling.rows(); ++r)
      for (Eigen::Index c = 0; c < coupling.cols(); ++c)
        if (r != c && coupling(r, c) != 0.0) return false;
    return true;
  }

  /// Throws Validation listing every violated invariant.
  void validate() const {
    std::vector<std::string> problems;
    const auto n = static_cast<Eigen::Index>(energies.size());
    if (energies.empty()) problems.emplace_back("energies: at least one level is required");
    if (!std::is_sorted(energies.begin(), energies.end()))
      problems.emplace_back("energies: must be sorted ascending");
    for (double e : energies)
      if (!std::isfinite(e)) problems.emplace_back("energies: non-finite value");
    if (coupling.rows() != n || coupling.cols() != n) {
      std::ostringstream os;
      os << "coupling_matrix: expected " << n << "x" << n << ", got " << coupling.rows() << "x"
         << coupling.cols();
      problems.push_back(os.str());
    } else if (n > 0) {
      const double scale = std::max(1.0, coupling.cwiseAbs().maxCoeff());
      if ((coupling - coupling.transpose()).cwiseAbs().maxCoeff() > 1e-14 * scale)
        problems.emplace_back("coupling_matrix: must be symmetric");
    }
    if (!std::isfinite(g)) problems.emplace_back("g: must be finite");
    if (!(mass > 0.0)) problems.emplace_back("mass: must be positive");
    if (!(hbar > 0.0)) problems.emplace_back("hbar: must be positive");
    if (!problems.empty()) {
      std::string msg = "invalid system spec";
      for (const auto& p : problems) msg += "; " + p;
      throw Error(ErrorKind::Validation, msg);
    }
  }
};

/// Indices j with e_j <= E, in order.
inline std::vector<std::size_t> open_channels(const SystemSpec& spec, double energy) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < spec.dim(); ++j)
    if (spec.energies[j] <= energy) out.push_back(j);
  return out;
}

inline std::size_t count_open_channels(const SystemSpec& spec, double energy) {
  return static_cast<std::size_t>(
      std::upper_bound(spec.energies.begin(), spec.energies.end(), energy) - spec.energies.begin());
}

/// Channel momenta at total energy E; closed channels get the evanescent branch.
inline CVector channel_momenta(const SystemSpec& spec, double energy) {
  CVector p(static_cast<Eigen::Index>(spec.dim()));
  for (std::size_t j = 0; j < spec.dim(); ++j) {
    const double kinetic = energy - spec.energies[j];
    const double mag = std::sqrt(2.0 * spec.mass * std::abs(kinetic));
    p(static_cast<Eigen::Index>(j)) = kinetic >= 0.0 ? Complex(mag, 0.0) : Complex(0.0, mag);
  }
  return p;
}

/// Full N x N transmission amplitudes t = [I + (i m g / hbar^2) D^{-1} V]^{-1}
/// with D = diag(p_j / hbar). Evaluated as (D + i m g V / hbar^2)^{-1} D, which
/// is the same matrix but stays well conditioned as an open momentum goes to 0.
/// Reflection amplitudes are r = t - I.
inline CMatrix t_matrix(const SystemSpec& spec, double energy) {
  if (spec.dim() == 0 || energy <= spec.energies.front()) {
    std::ostringstream os;
    os << "E = " << energy << " does not exceed the ground level";
    throw Error(ErrorKind::NoOpenChannel, os.str());
  }
  const CVector p = channel_momenta(spec, energy);
  const CMatrix d = (p / spec.hbar).asDiagonal();
  const Complex coupling = kI * spec.mass * spec.g / (spec.hbar * spec.hbar);
  const CMatrix a = d + coupling * spec.coupling.cast<Complex>();
  Eigen::PartialPivLU<CMatrix> lu(a);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-14)) {
    std::ostringstream os;
    os << "channel system at E = " << energy << " is singular (reciprocal condition estimate "
       << rcond << ")";
    throw Error(ErrorKind::SingularMatrix, os.str());
  }
  return lu.solve(d);
}

/// Open-channel blocks of s(E), ordered [[r^L, t^R], [t^L, r^R]].
struct ScatteringMatrixAtE {
  double energy = 0.0;
  std::size_t n_open = 0;
  std::vector<double> momenta;  // open channels only
  CMatrix r_left, t_left, r_right, t_right;

  const CMatrix& transmission(Side side) const { return side == Side::Left ? t_left : t_right; }
  const CMatrix& reflection(Side side) const { return side == Side::Left ? r_left : r_right; }

  /// Transmission amplitude j -> jp, zero when either channel is closed.
  Complex t(Side side, std::size_t jp, std::size_t j) const {
    if (jp >= n_open || j >= n_open) return {};
    return transmission(side)(static_cast<Eigen::Index>(jp), static_cast<Eigen::Index>(j));
  }
  Complex r(Side side, std::size_t jp, std::size_t j) const {
    if (jp >= n_open || j >= n_open) return {};
    return reflection(side)(static_cast<Eigen::Index>(jp), static_cast<Eigen::Index>(j));
  }

  /// The assembled 2 n_open x 2 n_open matrix.
  CMatrix assembled() const {
    const auto n = static_cast<Eigen::Index>(n_open);
    CMatrix s(2 * n, 2 * n);
    s.topLeftCorner(n, n) = r_left;
    s.topRightCorner(n, n) = t_right;
    s.bottomLeftCorner(n, n) = t_left;
    s.bottomRightCorner(n, n) = r_right;
    return s;
  }

  /// max(||s^dag s - I||_F, ||s s^dag - I||_F).
  double unitarity_residual() const {
    const CMatrix s = assembled();
    return std::max(frobenius_distance_to_identity(s.adjoint() * s),
                    frobenius_distance_to_identity(s * s.adjoint()));
  }

  /// max |s - s^T| elementwise.
  double reciprocity_residual() const {
    const CMatrix s = assembled();
    if (s.size() == 0) return 0.0;
    return (s - s.transpose()).cwiseAbs().maxCoeff();
  }
};

/// Above this the scattering matrix is considered broken, not just inaccurate.
inline constexpr double kUnitarityHardTolerance = 1e-8;

inline ScatteringMatrixAtE scattering_matrix(const SystemSpec& spec, double energy) {
  const std::size_t n_open = count_open_channels(spec, energy);
  for (std::size_t j = 0; j < n_open; ++j) {
    if (spec.energies[j] == energy) {
      std::ostringstream os;
      os << "E = " << energy << " sits exactly on the threshold of level " << j;
      throw Error(ErrorKind::ThresholdEnergy, os.str());
    }
  }
  const CMatrix t = t_matrix(spec, energy);

  ScatteringMatrixAtE out;
  out.energy = energy;
  out.n_open = n_open;
  out.momenta.resize(n_open);
  for (std::size_t j = 0; j < n_open; ++j)
    out.momenta[j] = std::sqrt(2.0 * spec.mass * (energy - spec.energies[j]));

  const auto n = static_cast<Eigen::Index>(n_open);
  CMatrix t_hat(n, n);
  CMatrix r_hat(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index jp = 0; jp < n; ++jp) {
      const double scale = std::sqrt(out.momenta[static_cast<std::size_t>(jp)] /
                                     out.momenta[static_cast<std::size_t>(j)]);
      const Complex amp = t(jp, j);
      t_hat(jp, j) = scale * amp;
      r_hat(jp, j) = scale * (amp - (jp == j ? 1.0 : 0.0));
    }
  }
  // g delta(x) is even, so both incidence sides see the same blocks.
  out.t_left = t_hat;
  out.t_right = t_hat;
  out.r_left = r_hat;
  out.r_right = std::move(r_hat);

  const double residual = out.unitarity_residual();
  if (!(residual <= kUnitarityHardTolerance)) {
    std::ostringstream os;
    os << "||s^dag s - I|| = " << residual << " at E = " << energy;
    throw Error(ErrorKind::UnitarityViolation, os.str());
  }
  return out;
}

struct TransitionProbabilities {
  RMatrix left;   // P^L_{j'j} = |t^L_{j'j}|^2 + |r^L_{j'j}|^2
  RMatrix right;  // P^R
  RMatrix mean;   // (P^L + P^R) / 2
};

inline TransitionProbabilities transition_probabilities(const ScatteringMatrixAtE& smat) {
  TransitionProbabilities out;
  out.left = smat.t_left.cwiseAbs2() + smat.r_left.cwiseAbs2();
  out.right = smat.t_right.cwiseAbs2() + smat.r_right.cwiseAbs2();
  out.mean = 0.5 * (out.left + out.right);
  return out;
}

}  // namespace qscat
