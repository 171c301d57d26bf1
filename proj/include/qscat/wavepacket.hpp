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

// Incident particle states: Gaussian packets in momentum space and the
// momentum distributions used to weight packet ensembles.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <set>
#include <sstream>
#include <vector>

#include "qscat/errors.hpp"
#include "qscat/linalg.hpp"
#include "qscat/quadrature.hpp"
#include "qscat/scatterer.hpp"

namespace qscat {

/// Momentum support of a packet is clipped to p0 +/- this many sigma.
inline constexpr double kPacketHalfWidthSigmas = 8.0;
/// Minimum |p0| / sigma for a packet treated as one-sided.
inline constexpr double kOneSidedSigmas = 6.0;

/// phi(p) = (2 pi sigma^2)^(-1/4) exp[-(p - p0)^2 / (4 sigma^2) - i p x0 / hbar].
/// No support restriction; see GaussianPacket for the one-sided variant.
inline Complex gaussian_amplitude(double p0, double x0, double sigma, double p, double hbar = 1.0) {
  const double norm = std::pow(2.0 * std::numbers::pi * sigma * sigma, -0.25);
  const double d = p - p0;
  return norm * std::exp(Complex(-d * d / (4.0 * sigma * sigma), -p * x0 / hbar));
}

struct GaussianPacket {
  double p0 = 0.0;
  double x0 = 0.0;
  double sigma = 1.0;

  /// Throws Validation unless sigma > 0 and |p0| >= 6 sigma.
  static GaussianPacket make(double p0, double x0, double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
      throw Error(ErrorKind::Validation, "packet sigma must be positive");
    if (!(std::abs(p0) >= kOneSidedSigmas * sigma)) {
      std::ostringstream os;
      os << "packet |p0| = " << std::abs(p0) << " is below " << kOneSidedSigmas
         << " sigma = " << kOneSidedSigmas * sigma << "; the wrong-sign momentum tail is not negligible";
      throw Error(ErrorKind::Validation, os.str());
    }
    if (!std::isfinite(x0)) throw Error(ErrorKind::Validation, "packet x0 must be finite");
    return GaussianPacket{p0, x0, sigma};
  }

  Side side() const { return p0 > 0.0 ? Side::Left : Side::Right; }
  double support_low() const { return p0 - kPacketHalfWidthSigmas * sigma; }
  double support_high() const { return p0 + kPacketHalfWidthSigmas * sigma; }
};

inline Complex amplitude(const GaussianPacket& packet, double p, double hbar = 1.0) {
  return gaussian_amplitude(packet.p0, packet.x0, packet.sigma, p, hbar);
}

/// Sorted distinct Bohr gaps e_j - e_k (all signs), merged within `tol`.
inline std::vector<double> bohr_gaps(const SystemSpec& spec, double tol) {
  std::vector<double> gaps;
  for (std::size_t j = 0; j < spec.dim(); ++j)
    for (std::size_t k = 0; k < spec.dim(); ++k) gaps.push_back(spec.gap(j, k));
  std::sort(gaps.begin(), gaps.end());
  std::vector<double> out;
  for (double g : gaps)
    if (out.empty() || g - out.back() > tol) out.push_back(g);
  return out;
}

/// Relative tolerance for treating two Bohr gaps as equal.
inline constexpr double kDefaultGapTolerance = 1e-9;

inline double gap_tolerance(const SystemSpec& spec, double relative = kDefaultGapTolerance) {
  return relative * spec.max_gap();
}

/// Smallest nonzero |Delta_{j'j} - Delta_{k'k}|.
inline double min_gap_difference(const SystemSpec& spec, double relative = kDefaultGapTolerance) {
  const double tol = gap_tolerance(spec, relative);
  const std::vector<double> gaps = bohr_gaps(spec, tol);
  if (gaps.size() < 2)
    throw Error(ErrorKind::AllGapsDegenerate, "every Bohr-gap difference vanishes");
  double best = gaps[1] - gaps[0];
  for (std::size_t i = 1; i < gaps.size(); ++i) best = std::min(best, gaps[i] - gaps[i - 1]);
  return best;
}

/// sigma / [m delta_min / (2 |p0|)]: well below 1 is narrow, 1 and above is broad.
inline double narrowness_ratio(const GaussianPacket& packet, const SystemSpec& spec) {
  const double delta_min = min_gap_difference(spec);
  return packet.sigma / (spec.mass * delta_min / (2.0 * std::abs(packet.p0)));
}

// ---------------------------------------------------------------------------
// Momentum distributions on the half line p >= 0.

inline double effusion_pdf(double beta, double mass, double p) {
  if (p < 0.0) return 0.0;
  return beta * (p / mass) * std::exp(-beta * p * p / (2.0 * mass));
}

/// Maxwell-Boltzmann law folded onto [0, inf) so it integrates to one there.
inline double maxwell_boltzmann_pdf(double beta, double mass, double p) {
  if (p < 0.0) return 0.0;
  return 2.0 * std::sqrt(beta / (2.0 * mass * std::numbers::pi)) * std::exp(-beta * p * p / (2.0 * mass));
}

struct BroadEnsembleParameters {
  double r = 1.0;       // 1 + beta sigma^2 / m
  double beta_c = 0.0;  // beta / r
};

inline BroadEnsembleParameters broad_ensemble_parameters(double beta, double mass, double sigma) {
  BroadEnsembleParameters out;
  out.r = 1.0 + beta * sigma * sigma / mass;
  out.beta_c = beta / out.r;
  return out;
}

/// Momentum diagonal rho_X(p, p) of effusion-weighted Gaussian packets of
/// width sigma arriving symmetrically from both sides. Even in p and
/// normalized over the whole real line.
inline double broad_ensemble_diagonal(double beta, double mass, double sigma, double p) {
  const auto [r, beta_c] = broad_ensemble_parameters(beta, mass, sigma);
  const double gauss = sigma / std::sqrt(2.0 * std::numbers::pi) * std::exp(-p * p / (2.0 * sigma * sigma));
  const double flux = p / (2.0 * std::sqrt(r)) * std::erf(p / (std::sqrt(2.0 * r) * sigma)) *
                      std::exp(-beta_c * p * p / (2.0 * mass));
  return beta_c / mass * (gauss + flux);
}

// ---------------------------------------------------------------------------
// Ensembles.

enum class EnsembleKind { Effusion, MaxwellBoltzmann, BroadEffusionMixture };

inline const char* to_string(EnsembleKind kind) {
  switch (kind) {
    case EnsembleKind::Effusion: return "effusion";
    case EnsembleKind::MaxwellBoltzmann: return "maxwell_boltzmann";
    case EnsembleKind::BroadEffusionMixture: return "broad_effusion";
  }
  return "unknown";
}

struct EnsembleGridConfig {
  std::size_t nodes_per_segment = 129;
  double tail_mass = 1e-10;
};

/// Quadrature nodes over packet centres p0 in (0, p_cut] with the pdf sampled
/// at each node. Segments are split at every channel-opening momentum
/// sqrt(2 m (e_k - e_j)) so that each segment integrand is smooth after the
/// sin^2 substitution.
struct MomentumEnsemble {
  EnsembleKind kind = EnsembleKind::Effusion;
  double beta = 1.0;
  double mass = 1.0;
  double sigma = 0.0;  // packet width, BroadEffusionMixture only
  double p_cut = 0.0;
  std::vector<double> nodes;
  std::vector<double> weights;
  std::vector<double> density;

  /// Density of packet centres. Broad mixtures place their centres with the
  /// effusion law.
  double pdf(double p) const {
    return kind == EnsembleKind::MaxwellBoltzmann ? maxwell_boltzmann_pdf(beta, mass, p)
                                                  : effusion_pdf(beta, mass, p);
  }

  /// sum_i w_i mu(p_i); one up to the truncated tail.
  double total_mass() const {
    double s = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * density[i];
    return s;
  }
};

/// Momentum beyond which the centre distribution carries less than `tail`.
inline double ensemble_tail_momentum(EnsembleKind kind, double beta, double mass, double tail) {
  const double scale = std::sqrt(2.0 * mass / beta);
  if (kind == EnsembleKind::MaxwellBoltzmann) {
    // erfc(p / scale) = tail
    double lo = 0.0;
    double hi = 1.0;
    while (std::erfc(hi) > tail) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (std::erfc(mid) > tail ? lo : hi) = mid;
    }
    return hi * scale;
  }
  // exp(-beta p^2 / 2m) = tail
  return scale * std::sqrt(std::log(1.0 / tail));
}

/// Channel-opening momenta sqrt(2 m (e_k - e_j)) for e_k > e_j, sorted.
inline std::vector<double> threshold_momenta(const SystemSpec& spec) {
  std::set<double> out;
  for (std::size_t j = 0; j < spec.dim(); ++j)
    for (std::size_t k = j + 1; k < spec.dim(); ++k)
      if (spec.energies[k] > spec.energies[j])
        out.insert(std::sqrt(2.0 * spec.mass * (spec.energies[k] - spec.energies[j])));
  return {out.begin(), out.end()};
}

/// Nodes and weights over [0, p_cut] split at the given breakpoints.
inline QuadratureRule segmented_rule(std::vector<double> breakpoints, double p_cut, std::size_t nodes_per_segment) {
  std::vector<double> edges{0.0};
  std::sort(breakpoints.begin(), breakpoints.end());
  for (double b : breakpoints)
    if (b > edges.back() * (1.0 + 1e-12) && b < p_cut) edges.push_back(b);
  edges.push_back(p_cut);
  const QuadratureRule base = gauss_legendre(nodes_per_segment);
  QuadratureRule out;
  for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
    const QuadratureRule seg = sine_squared_rule(edges[s], edges[s + 1], base);
    out.nodes.insert(out.nodes.end(), seg.nodes.begin(), seg.nodes.end());
    out.weights.insert(out.weights.end(), seg.weights.begin(), seg.weights.end());
  }
  return out;
}

/// Builds the centre grid. The cut is raised by the full level span so that
/// every transition j -> j' keeps a tail of at least `tail_mass` above its
/// threshold, whichever level it starts from.
inline MomentumEnsemble make_momentum_ensemble(EnsembleKind kind, double beta, const SystemSpec& spec,
                                               double sigma = 0.0, const EnsembleGridConfig& grid = {}) {
  if (!(beta > 0.0)) throw Error(ErrorKind::Validation, "ensemble beta must be positive");
  if (kind == EnsembleKind::BroadEffusionMixture && !(sigma > 0.0))
    throw Error(ErrorKind::Validation, "broad ensemble requires sigma > 0");
  if (grid.nodes_per_segment == 0) throw Error(ErrorKind::Validation, "ensemble nodes must be positive");
  if (!(grid.tail_mass > 0.0 && grid.tail_mass < 1.0))
    throw Error(ErrorKind::Validation, "ensemble tail_mass must lie in (0, 1)");

  MomentumEnsemble ens;
  ens.kind = kind;
  ens.beta = beta;
  ens.mass = spec.mass;
  ens.sigma = sigma;
  const double p_tail = ensemble_tail_momentum(kind, beta, spec.mass, grid.tail_mass);
  ens.p_cut = std::sqrt(p_tail * p_tail + 2.0 * spec.mass * spec.max_gap());
  QuadratureRule rule = segmented_rule(threshold_momenta(spec), ens.p_cut, grid.nodes_per_segment);
  ens.nodes = std::move(rule.nodes);
  ens.weights = std::move(rule.weights);
  ens.density.reserve(ens.nodes.size());
  for (double p : ens.nodes) ens.density.push_back(ens.pdf(p));
  return ens;
}

}  // namespace qscat
