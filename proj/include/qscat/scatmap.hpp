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

// The collision map S acting on density matrices of Y:
//
//   (rho')_{j'k'} = sum_{jk} S^{jk}_{j'k'} rho_{jk}
//
// stored as a dense N^2 x N^2 matrix with row j'*N + k' and column j*N + k.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>
#include <utility>
#include <vector>

#include "qscat/errors.hpp"
#include "qscat/linalg.hpp"
#include "qscat/quadrature.hpp"
#include "qscat/scatterer.hpp"
#include "qscat/wavepacket.hpp"

namespace qscat {

struct Superoperator {
  std::size_t dim = 0;
  CMatrix matrix;
  /// Worst per-entry quadrature error estimate (0 for closed forms).
  double quadrature_error = 0.0;

  static Superoperator zero(std::size_t n) {
    const auto nn = static_cast<Eigen::Index>(n * n);
    return Superoperator{n, CMatrix::Zero(nn, nn), 0.0};
  }
  static Superoperator identity(std::size_t n) {
    const auto nn = static_cast<Eigen::Index>(n * n);
    return Superoperator{n, CMatrix::Identity(nn, nn), 0.0};
  }

  Eigen::Index index(std::size_t a, std::size_t b) const { return static_cast<Eigen::Index>(a * dim + b); }

  /// S^{jk}_{j'k'}
  Complex operator()(std::size_t jp, std::size_t kp, std::size_t j, std::size_t k) const {
    return matrix(index(jp, kp), index(j, k));
  }
  Complex& operator()(std::size_t jp, std::size_t kp, std::size_t j, std::size_t k) {
    return matrix(index(jp, kp), index(j, k));
  }

  /// max_{jk} |sum_{j'} S^{jk}_{j'j'} - delta_jk|
  double trace_residual() const {
    double worst = 0.0;
    for (std::size_t j = 0; j < dim; ++j)
      for (std::size_t k = 0; k < dim; ++k) {
        Complex s = 0.0;
        for (std::size_t jp = 0; jp < dim; ++jp) s += (*this)(jp, jp, j, k);
        worst = std::max(worst, std::abs(s - (j == k ? 1.0 : 0.0)));
      }
    return worst;
  }

  /// max |S^{jk}_{j'k'} - conj(S^{kj}_{k'j'})|
  double hermiticity_residual() const {
    double worst = 0.0;
    for (std::size_t jp = 0; jp < dim; ++jp)
      for (std::size_t kp = 0; kp < dim; ++kp)
        for (std::size_t j = 0; j < dim; ++j)
          for (std::size_t k = 0; k < dim; ++k)
            worst = std::max(worst, std::abs((*this)(jp, kp, j, k) - std::conj((*this)(kp, jp, k, j))));
    return worst;
  }

  double max_entry_magnitude() const { return matrix.size() == 0 ? 0.0 : matrix.cwiseAbs().maxCoeff(); }

  /// Largest |entry| linking a population to a coherence in either direction.
  double population_coherence_coupling() const {
    double worst = 0.0;
    for (std::size_t jp = 0; jp < dim; ++jp)
      for (std::size_t kp = 0; kp < dim; ++kp)
        for (std::size_t j = 0; j < dim; ++j)
          for (std::size_t k = 0; k < dim; ++k)
            if ((jp == kp) != (j == k)) worst = std::max(worst, std::abs((*this)(jp, kp, j, k)));
    return worst;
  }
};

struct QuadratureConfig {
  std::size_t panels = 64;
  std::size_t nodes = 16;
  /// Per-entry bound on |I(panels) - I(panels / 2)|.
  double tol = 1e-8;
};

namespace detail {

/// Runs body(i) for i in [0, n) across hardware threads. Each index writes
/// only its own slot, so results do not depend on the thread count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// s(E) with E nudged off any level it lands on exactly.
inline ScatteringMatrixAtE scattering_matrix_off_threshold(const SystemSpec& spec, double energy) {
  for (double e : spec.energies) {
    if (e == energy) {
      energy += 1e-12 * std::max(1.0, std::abs(energy));
      break;
    }
  }
  return scattering_matrix(spec, energy);
}

/// One Gaussian branch seen from a fixed incidence side, as a function of the
/// momentum magnitude q > 0: a(q) = N exp[-(q - centre)^2 / (4 sigma^2) - i q x0 / hbar].
struct GaussianBranch {
  double centre = 0.0;
  double x0 = 0.0;
  double sigma = 1.0;
  double hbar = 1.0;

  Complex operator()(double q) const { return gaussian_amplitude(centre, x0, sigma, q, hbar); }
  double low() const { return std::max(0.0, centre - kPacketHalfWidthSigmas * sigma); }
  double high() const { return centre + kPacketHalfWidthSigmas * sigma; }
};

inline constexpr std::size_t kInitialPanels = 8;

struct EntryIntegral {
  Complex value;
  double error = 0.0;
};

/// Integral over p of a(p) conj(a(pi(p))) sqrt(p / pi(p)) sum_{alpha'} s s*, for
/// one entry (j, k) -> (j', k') and one incidence side. Integrated in
/// u = sqrt(p^2 - p_inf^2) so channel openings at the lower limit stay smooth.
inline EntryIntegral one_sided_entry(const SystemSpec& spec, const GaussianBranch& branch, Side side,
                                     std::size_t jp, std::size_t kp, std::size_t j, std::size_t k,
                                     const QuadratureRule& base, std::size_t panels, double tol) {
  const double m = spec.mass;
  const double gap1 = spec.gap(jp, j);
  const double gap2 = spec.gap(kp, k);
  const double shift = 2.0 * m * (gap1 - gap2);  // p^2 - pi^2
  const double p_inf2 = 2.0 * m * std::max({0.0, gap1, gap1 - gap2});
  const double lo = branch.low();
  const double hi = branch.high();
  if (hi <= 0.0) return {};
  // p and pi(p) must both sit inside [lo, hi]
  const double p2_lo = std::max({p_inf2, lo * lo, lo * lo + shift});
  const double p2_hi = std::min(hi * hi, hi * hi + shift);
  if (!(p2_hi > p2_lo)) return {};
  const double u_lo = std::sqrt(p2_lo - p_inf2);
  const double u_hi = std::sqrt(p2_hi - p_inf2);

  // Interior channel openings of either s-matrix are square-root kinks in u;
  // split there and integrate each piece in sin^2 form.
  std::vector<double> cuts{u_lo, u_hi};
  for (std::size_t l = 0; l < spec.dim(); ++l) {
    // s1 sits at E_p + e_j, s2 at E_p - (e_j' - e_j) + e_k'.
    for (const double p2 : {2.0 * m * (spec.energies[l] - spec.energies[j]),
                            2.0 * m * (spec.energies[l] + gap1 - spec.energies[kp])}) {
      if (!(p2 > p_inf2)) continue;
      const double u = std::sqrt(p2 - p_inf2);
      if (u > u_lo && u < u_hi) cuts.push_back(u);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  auto integrate = [&](std::size_t n_panels) {
    QuadratureRule rule;
    const double span = u_hi - u_lo;
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double share = (cuts[c + 1] - cuts[c]) / span;
      const auto pieces = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(share * static_cast<double>(n_panels))));
      const QuadratureRule part = composite_sine_squared(cuts[c], cuts[c + 1], pieces, base);
      rule.nodes.insert(rule.nodes.end(), part.nodes.begin(), part.nodes.end());
      rule.weights.insert(rule.weights.end(), part.weights.begin(), part.weights.end());
    }
    Complex sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const double u = rule.nodes[i];
      const double p2 = p_inf2 + u * u;
      const double p = std::sqrt(p2);
      const double pi2 = p2 - shift;
      if (!(pi2 > 0.0) || !(p > 0.0)) continue;
      const double pi = std::sqrt(pi2);
      const double kinetic = p2 / (2.0 * m);
      const ScatteringMatrixAtE s1 = scattering_matrix_off_threshold(spec, kinetic + spec.energies[j]);
      const ScatteringMatrixAtE s2 = scattering_matrix_off_threshold(spec, kinetic - gap1 + spec.energies[kp]);
      const Complex amps = s1.t(side, jp, j) * std::conj(s2.t(side, kp, k)) +
                           s1.r(side, jp, j) * std::conj(s2.r(side, kp, k));
      if (amps == Complex(0.0)) continue;
      const Complex packet = branch(p) * std::conj(branch(pi));
      sum += rule.weights[i] * packet * std::sqrt(p / pi) * amps * (u / p);
    }
    return sum;
  };

  // Double from a coarse start until successive levels agree; `panels` caps it.
  std::size_t level = std::min<std::size_t>(kInitialPanels, panels);
  Complex coarse = integrate(std::max<std::size_t>(1, level / 2));
  Complex fine = integrate(level);
  while (std::abs(fine - coarse) > tol && level < panels) {
    level = std::min(2 * level, panels);
    coarse = fine;
    fine = integrate(level);
  }
  return {fine, std::abs(fine - coarse)};
}

/// Map from one branch incident from one side; every entry integrated.
inline Superoperator one_sided_map(const SystemSpec& spec, const GaussianBranch& branch, Side side,
                                   const QuadratureConfig& quad) {
  const std::size_t n = spec.dim();
  const QuadratureRule base = gauss_legendre(quad.nodes);
  Superoperator out = Superoperator::zero(n);
  for (std::size_t jp = 0; jp < n; ++jp)
    for (std::size_t kp = 0; kp < n; ++kp)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) {
          const EntryIntegral e = one_sided_entry(spec, branch, side, jp, kp, j, k, base, quad.panels, quad.tol);
          if (e.error > quad.tol) {
            std::ostringstream os;
            os << "entry S^{" << j << k << "}_{" << jp << kp << "} error estimate " << e.error
               << " exceeds tolerance " << quad.tol;
            throw Error(ErrorKind::QuadratureNotConverged, os.str());
          }
          out(jp, kp, j, k) = e.value;
          out.quadrature_error = std::max(out.quadrature_error, e.error);
        }
  return out;
}

inline void validate_quadrature(const QuadratureConfig& quad) {
  if (quad.panels < 2 || quad.nodes < 1 || !(quad.tol > 0.0))
    throw Error(ErrorKind::Validation, "quadrature needs panels >= 2, nodes >= 1 and tol > 0");
}

}  // namespace detail

/// Exact map for a single one-sided Gaussian packet. Packets with p0 > 0 come
/// from the left; p0 < 0 uses the right-incidence blocks on the mirrored packet.
inline Superoperator pure_packet_map(const SystemSpec& spec, const GaussianPacket& packet,
                                     const QuadratureConfig& quad = {}) {
  detail::validate_quadrature(quad);
  const GaussianPacket checked = GaussianPacket::make(packet.p0, packet.x0, packet.sigma);
  const Side side = checked.side();
  // phi(-q) is again a Gaussian, centred at -p0 with position -x0.
  const detail::GaussianBranch branch =
      side == Side::Left ? detail::GaussianBranch{checked.p0, checked.x0, checked.sigma, spec.hbar}
                         : detail::GaussianBranch{-checked.p0, -checked.x0, checked.sigma, spec.hbar};
  return detail::one_sided_map(spec, branch, side, quad);
}

/// Narrow-packet limit at mean momentum |p0|: entries with matching Bohr gaps
/// keep t t* + r r* evaluated at E_p0 + e_j and E_p0 + e_k; all others vanish.
inline Superoperator narrow_map(const SystemSpec& spec, double p0, Side side,
                                double relative_gap_tolerance = kDefaultGapTolerance) {
  if (!(p0 > 0.0) || !std::isfinite(p0)) throw Error(ErrorKind::Validation, "narrow map needs p0 > 0");
  const std::size_t n = spec.dim();
  const double kinetic = p0 * p0 / (2.0 * spec.mass);
  std::vector<ScatteringMatrixAtE> smats;
  smats.reserve(n);
  for (std::size_t j = 0; j < n; ++j)
    smats.push_back(detail::scattering_matrix_off_threshold(spec, kinetic + spec.energies[j]));
  const double tol = gap_tolerance(spec, relative_gap_tolerance);
  Superoperator out = Superoperator::zero(n);
  for (std::size_t jp = 0; jp < n; ++jp)
    for (std::size_t kp = 0; kp < n; ++kp)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) {
          if (std::abs(spec.gap(jp, j) - spec.gap(kp, k)) > tol) continue;
          const auto& sj = smats[j];
          const auto& sk = smats[k];
          out(jp, kp, j, k) = sj.t(side, jp, j) * std::conj(sk.t(side, kp, k)) +
                              sj.r(side, jp, j) * std::conj(sk.r(side, kp, k));
        }
  return out;
}

// ---------------------------------------------------------------------------
// Ensembles.

struct EnsembleBuilder {
  enum class Kind { NarrowLimit, FullQuadrature };
  Kind kind = Kind::NarrowLimit;
  /// Packet width for FullQuadrature; 0 means take it from the ensemble.
  double sigma = 0.0;
  QuadratureConfig quad{};
  double relative_gap_tolerance = kDefaultGapTolerance;

  static EnsembleBuilder narrow() { return {}; }
  static EnsembleBuilder full(double sigma = 0.0, QuadratureConfig quad = {}) {
    return EnsembleBuilder{Kind::FullQuadrature, sigma, quad, kDefaultGapTolerance};
  }
};

/// Member map of the symmetric ensemble at centre momentum p0 > 0:
/// (1/2)[map(phi_{+p0}) + map(phi_{-p0})]. Under FullQuadrature each packet is
/// split into its right- and left-moving parts, each scattered from its own
/// side; interference between the two parts is dropped. For p0 >> sigma this
/// is the one-sided packet map.
inline Superoperator ensemble_member_map(const SystemSpec& spec, const MomentumEnsemble& ens,
                                         const EnsembleBuilder& builder, double p0) {
  if (builder.kind == EnsembleBuilder::Kind::NarrowLimit) {
    Superoperator left = narrow_map(spec, p0, Side::Left, builder.relative_gap_tolerance);
    const Superoperator right = narrow_map(spec, p0, Side::Right, builder.relative_gap_tolerance);
    left.matrix = 0.5 * (left.matrix + right.matrix);
    return left;
  }
  const double sigma = builder.sigma > 0.0 ? builder.sigma : ens.sigma;
  if (!(sigma > 0.0)) throw Error(ErrorKind::Validation, "FullQuadrature builder needs a packet sigma > 0");
  Superoperator out = Superoperator::zero(spec.dim());
  for (double centre : {p0, -p0}) {
    // phi_{centre} restricted to q > 0 enters from the left, its q < 0 part
    // mirrored (centre -> -centre) enters from the right.
    for (const auto& [branch_centre, side] : {std::pair{centre, Side::Left}, std::pair{-centre, Side::Right}}) {
      const detail::GaussianBranch branch{branch_centre, 0.0, sigma, spec.hbar};
      if (branch.high() <= 0.0) continue;
      const Superoperator part = detail::one_sided_map(spec, branch, side, builder.quad);
      out.matrix += 0.5 * part.matrix;
      out.quadrature_error = std::max(out.quadrature_error, part.quadrature_error);
    }
  }
  return out;
}

/// Weighted mixture of member maps over the ensemble grid. Members are built
/// in parallel and summed in grid order.
inline Superoperator ensemble_map(const SystemSpec& spec, const MomentumEnsemble& ens,
                                  const EnsembleBuilder& builder = {}) {
  if (builder.kind == EnsembleBuilder::Kind::FullQuadrature) detail::validate_quadrature(builder.quad);
  std::vector<Superoperator> members(ens.nodes.size());
  detail::parallel_for(ens.nodes.size(), [&](std::size_t i) {
    try {
      members[i] = ensemble_member_map(spec, ens, builder, ens.nodes[i]);
    } catch (const Error& e) {
      std::ostringstream os;
      os << "ensemble member p0 = " << ens.nodes[i];
      rethrow_with_context(e, os.str());
    }
  });
  Superoperator out = Superoperator::zero(spec.dim());
  for (std::size_t i = 0; i < members.size(); ++i) {
    out.matrix += (ens.weights[i] * ens.density[i]) * members[i].matrix;
    out.quadrature_error = std::max(out.quadrature_error, members[i].quadrature_error);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Population sector.

struct PopulationMap {
  std::size_t dim = 0;
  RMatrix w;  // W_{jk} = S^{kk}_{jj}

  static PopulationMap identity(std::size_t n) {
    return {n, RMatrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))};
  }
  RVector apply(const RVector& p) const { return w * p; }
};

inline constexpr double kStochasticTolerance = 1e-6;

/// Throws NotStochastic on negative entries or column sums off by more than tol.
inline void check_stochastic(const RMatrix& w, double tol = kStochasticTolerance) {
  for (Eigen::Index c = 0; c < w.cols(); ++c) {
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      if (w(r, c) < -1e-10) {
        std::ostringstream os;
        os << "W(" << r << "," << c << ") = " << w(r, c) << " is negative";
        throw Error(ErrorKind::NotStochastic, os.str());
      }
    }
    const double sum = w.col(c).sum();
    if (std::abs(sum - 1.0) > tol) {
      std::ostringstream os;
      os << "column " << c << " sums to " << sum;
      throw Error(ErrorKind::NotStochastic, os.str());
    }
  }
}

inline PopulationMap population_map(const Superoperator& s, double tol = kStochasticTolerance) {
  const std::size_t n = s.dim;
  PopulationMap out{n, RMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))};
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k) {
      const Complex v = s(j, j, k, k);
      if (std::abs(v.imag()) > 1e-10) {
        std::ostringstream os;
        os << "population entry W(" << j << "," << k << ") has imaginary part " << v.imag();
        throw Error(ErrorKind::NotStochastic, os.str());
      }
      out.w(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = v.real();
    }
  check_stochastic(out.w, tol);
  return out;
}

/// Population block of the narrow ensemble map computed directly:
/// W_{j'j} = sum_i w_i mu(p_i) P_{j'j}(E_{p_i} + e_j) with P = (P^L + P^R) / 2.
inline PopulationMap narrow_population_map(const SystemSpec& spec, const MomentumEnsemble& ens) {
  const auto n = static_cast<Eigen::Index>(spec.dim());
  RMatrix w = RMatrix::Zero(n, n);
  for (std::size_t i = 0; i < ens.nodes.size(); ++i) {
    const double kinetic = ens.nodes[i] * ens.nodes[i] / (2.0 * spec.mass);
    const double weight = ens.weights[i] * ens.density[i];
    for (Eigen::Index j = 0; j < n; ++j) {
      const ScatteringMatrixAtE smat =
          detail::scattering_matrix_off_threshold(spec, kinetic + spec.energies[static_cast<std::size_t>(j)]);
      const RMatrix p = transition_probabilities(smat).mean;
      const auto open = static_cast<Eigen::Index>(smat.n_open);
      for (Eigen::Index jp = 0; jp < open; ++jp) w(jp, j) += weight * p(jp, j);
    }
  }
  check_stochastic(w);
  return {spec.dim(), w};
}

/// Population map of the broad effusion mixture from the closed-form momentum
/// diagonal: W_{j'j} = int_0^inf dp 2 rho_X(p, p) P_{j'j}(E_p + e_j).
inline PopulationMap broad_population_map(const SystemSpec& spec, double beta, double sigma,
                                          const EnsembleGridConfig& grid = {}) {
  const double p_tail = ensemble_tail_momentum(EnsembleKind::Effusion, beta, spec.mass, grid.tail_mass) +
                        kPacketHalfWidthSigmas * sigma;
  const double p_cut = std::sqrt(p_tail * p_tail + 2.0 * spec.mass * spec.max_gap());
  const QuadratureRule rule = segmented_rule(threshold_momenta(spec), p_cut, grid.nodes_per_segment);
  const auto n = static_cast<Eigen::Index>(spec.dim());
  RMatrix w = RMatrix::Zero(n, n);
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double p = rule.nodes[i];
    const double weight = rule.weights[i] * 2.0 * broad_ensemble_diagonal(beta, spec.mass, sigma, p);
    const double kinetic = p * p / (2.0 * spec.mass);
    for (Eigen::Index j = 0; j < n; ++j) {
      const ScatteringMatrixAtE smat =
          detail::scattering_matrix_off_threshold(spec, kinetic + spec.energies[static_cast<std::size_t>(j)]);
      const RMatrix pm = transition_probabilities(smat).mean;
      const auto open = static_cast<Eigen::Index>(smat.n_open);
      for (Eigen::Index jp = 0; jp < open; ++jp) w(jp, j) += weight * pm(jp, j);
    }
  }
  check_stochastic(w);
  return {spec.dim(), w};
}

/// max_{j != j'} |W_{j'j} e^{-beta e_j} - W_{jj'} e^{-beta e_j'}| / max(W_{j'j} e^{-beta e_j}, eps).
/// Boltzmann factors are taken relative to the ground level.
inline double detailed_balance_residual(const PopulationMap& w, double beta, const std::vector<double>& energies,
                                        double eps = std::numeric_limits<double>::min()) {
  const std::size_t n = w.dim;
  if (energies.size() != n) throw Error(ErrorKind::DimensionMismatch, "energies do not match W");
  double worst = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t jp = 0; jp < n; ++jp) {
      if (j == jp) continue;
      const double fwd = w.w(static_cast<Eigen::Index>(jp), static_cast<Eigen::Index>(j)) *
                         std::exp(-beta * (energies[j] - energies.front()));
      const double bwd = w.w(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(jp)) *
                         std::exp(-beta * (energies[jp] - energies.front()));
      worst = std::max(worst, std::abs(fwd - bwd) / std::max(fwd, eps));
    }
  return worst;
}

/// Stationary vector of a column-stochastic W by state reduction
/// (Grassmann-Taksar-Heyman). Uses only off-diagonal entries and no
/// subtractions, so populations far below machine epsilon keep their relative
/// accuracy. Falls back to a direct solve when W is reducible.
inline RVector stationary_distribution(const PopulationMap& w) {
  const auto n = static_cast<Eigen::Index>(w.dim);
  RMatrix p = w.w.transpose();  // row-stochastic: p(k, j) = prob(k -> j)
  bool reducible = false;
  for (Eigen::Index k = n - 1; k > 0 && !reducible; --k) {
    const double out = p.row(k).head(k).sum();
    if (!(out > 0.0)) {
      reducible = true;
      break;
    }
    p.col(k).head(k) /= out;
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j < k; ++j) p(i, j) += p(i, k) * p(k, j);
  }
  if (!reducible) {
    RVector pi = RVector::Zero(n);
    pi(0) = 1.0;
    for (Eigen::Index k = 1; k < n; ++k) pi(k) = pi.head(k).dot(p.col(k).head(k));
    return pi / pi.sum();
  }
  RMatrix a = w.w - RMatrix::Identity(n, n);
  a.row(n - 1).setOnes();
  RVector b = RVector::Zero(n);
  b(n - 1) = 1.0;
  return a.fullPivLu().solve(b);
}

/// C = sum_{jk} S(|j><k|) (x) |j><k|, i.e. C[(j',j),(k',k)] = S^{jk}_{j'k'}.
inline CMatrix choi_matrix(const Superoperator& s) {
  const std::size_t n = s.dim;
  const auto nn = static_cast<Eigen::Index>(n * n);
  CMatrix c(nn, nn);
  for (std::size_t jp = 0; jp < n; ++jp)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t kp = 0; kp < n; ++kp)
        for (std::size_t k = 0; k < n; ++k)
          c(static_cast<Eigen::Index>(jp * n + j), static_cast<Eigen::Index>(kp * n + k)) = s(jp, kp, j, k);
  return c;
}

inline double choi_min_eigenvalue(const Superoperator& s) { return min_hermitian_eigenvalue(choi_matrix(s)); }

}  // namespace qscat
