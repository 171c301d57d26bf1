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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qscat/dynamics.hpp"
#include "qscat/thermo.hpp"
#include "systems.hpp"

namespace qscat {
namespace {

/// Metropolis chain obeying detailed balance at beta.
PopulationMap metropolis(const std::vector<double>& e, double beta, double rate = 0.2) {
  const auto n = static_cast<Eigen::Index>(e.size());
  RMatrix w = RMatrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = 0; k < n; ++k)
      if (j != k) w(j, k) = rate * std::min(1.0, std::exp(-beta * (e[j] - e[k])));
  for (Eigen::Index k = 0; k < n; ++k) w(k, k) = 1.0 - (w.col(k).sum() - w(k, k));
  return {e.size(), w};
}

/// Sigma = sum_jk W_jk p_k ln(W_jk p_k / (W_kj p'_j)).
double sigma_oracle(const RMatrix& w, const RVector& p) {
  const RVector next = w * p;
  double s = 0.0;
  for (Eigen::Index j = 0; j < w.rows(); ++j)
    for (Eigen::Index k = 0; k < w.cols(); ++k) {
      const double f = w(j, k) * p(k);
      if (f > 0.0) s += f * std::log(f / (w(k, j) * next(j)));
    }
  return s;
}

RVector random_probabilities(std::mt19937_64& rng, std::size_t n) {
  std::exponential_distribution<double> ex(1.0);
  RVector p(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = ex(rng);
  return p / p.sum();
}

TEST(Thermo, ShannonEntropy) {
  EXPECT_EQ(shannon_entropy(RVector::Unit(3, 1)), 0.0);
  EXPECT_NEAR(shannon_entropy(RVector::Constant(4, 0.25)), std::log(4.0), 1e-15);
}

TEST(Thermo, HeatByHand) {
  // One full jump 0 -> 1 on gap 2 absorbs Q = 2.
  RMatrix w(2, 2);
  w << 0.0, 0.0, 1.0, 1.0;
  RVector p(2);
  p << 1.0, 0.0;
  EXPECT_DOUBLE_EQ(heat({2, w}, p, {0.0, 2.0}), 2.0);
  EXPECT_THROW(heat({2, w}, RVector::Constant(2, 0.7), {0.0, 2.0}), Error);
}

TEST(Thermo, EntropyProductionMatchesExplicitSum) {
  std::mt19937_64 rng(11);
  const std::vector<double> e{0.0, 0.4, 1.3, 2.0};
  for (double beta : {0.3, 1.0, 2.5}) {
    const PopulationMap w = metropolis(e, beta);
    for (int i = 0; i < 50; ++i) {
      const RVector p = random_probabilities(rng, 4);
      const ThermoRecord rec = entropy_production(w, p, beta, e);
      EXPECT_NEAR(rec.entropy_production, sigma_oracle(w.w, p), 1e-12);
      EXPECT_GE(rec.entropy_production, -1e-12);
      EXPECT_NEAR(rec.entropy_change, rec.entropy_flow + rec.entropy_production, 1e-10);
      EXPECT_DOUBLE_EQ(rec.entropy_flow, beta * rec.heat);
    }
  }
}

TEST(Thermo, ZeroAtEquilibriumAndForIdentity) {
  const std::vector<double> e{0.0, 0.4, 1.3, 2.0};
  const RVector gibbs = DensityMatrix::gibbs(e, 1.7).population_vector();
  const ThermoRecord eq = entropy_production(metropolis(e, 1.7), gibbs, 1.7, e);
  EXPECT_NEAR(eq.heat, 0.0, 1e-15);
  EXPECT_NEAR(eq.entropy_production, 0.0, 1e-15);
  const ThermoRecord id = entropy_production(PopulationMap::identity(4), RVector::Constant(4, 0.25), 1.0, e);
  EXPECT_EQ(id.heat, 0.0);
  EXPECT_EQ(id.entropy_production, 0.0);
}

TEST(Thermo, ForbiddenReverseIsInfinite) {
  // 1 -> 0 is allowed, 0 -> 1 is not; the residual gate is switched off.
  RMatrix w(2, 2);
  w << 1.0, 0.5, 0.0, 0.5;
  RVector p(2);
  p << 0.5, 0.5;
  const ThermoRecord rec = entropy_production({2, w}, p, 1.0, {0.0, 1.0}, std::numeric_limits<double>::infinity());
  EXPECT_EQ(rec.entropy_production, std::numeric_limits<double>::infinity());
}

TEST(Thermo, DetailedBalanceGate) {
  RMatrix w(2, 2);
  w << 0.5, 0.5, 0.5, 0.5;  // detailed balance only at beta = 0
  RVector p(2);
  p << 0.9, 0.1;
  try {
    entropy_production({2, w}, p, 1.0, {0.0, 1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DetailedBalanceViolated);
  }
  const ThermoRecord rec = energy_entropy_change({2, w}, p, {0.0, 1.0});
  EXPECT_NEAR(rec.heat, 0.4, 1e-15);
  EXPECT_TRUE(std::isnan(rec.entropy_production));
}

TEST(Thermo, EffusionFirstCollisionRegression) {
  const SystemSpec spec = testing::five_level();
  const MomentumEnsemble ens = make_momentum_ensemble(EnsembleKind::Effusion, 3.0, spec);
  const PopulationMap w = narrow_population_map(spec, ens);
  const RVector p = DensityMatrix::gibbs(spec.energies, 1.0).population_vector();
  const ThermoRecord rec = entropy_production(w, p, 3.0, spec.energies);
  // A hot system relaxing toward a colder bath releases heat.
  EXPECT_LT(rec.heat, 0.0);
  EXPECT_NEAR(rec.heat, -0.046555631095181502, 1e-12);
  EXPECT_NEAR(rec.entropy_change, -0.049467199117089772, 1e-12);
  EXPECT_NEAR(rec.entropy_production, sigma_oracle(w.w, p), 1e-9);
  EXPECT_GT(rec.entropy_production, 0.0);
}

TEST(Thermo, TrajectoryRecords) {
  const std::vector<double> e{0.0, 1.0, 3.0};
  const PopulationMap w = metropolis(e, 0.5);
  std::vector<RVector> pops{RVector::Unit(3, 2)};
  for (int i = 0; i < 20; ++i) pops.push_back(w.apply(pops.back()));
  const auto recs = thermo_trajectory(w, pops, 0.5, e);
  ASSERT_EQ(recs.size(), 20u);
  EXPECT_EQ(recs.front().step, 1u);
  double total_q = 0.0;
  for (const auto& r : recs) {
    EXPECT_GE(r.entropy_production, -1e-12);
    total_q += r.heat;
  }
  EXPECT_NEAR(total_q, pops.back().dot(Eigen::Vector3d(0.0, 1.0, 3.0)) - 3.0, 1e-12);
}

}  // namespace
}  // namespace qscat
