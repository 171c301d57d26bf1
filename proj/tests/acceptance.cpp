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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails. A criterion also fails if it exceeds its time
// budget.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "qscat/config.hpp"
#include "qscat/experiment.hpp"
#include "qscat/qscat.hpp"
#include "systems.hpp"

namespace {

using namespace qscat;

struct Outcome {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void criterion(int id, const char* title, double budget_s, const std::function<void(Outcome&)>& body) {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(out);
  } catch (const std::exception& e) {
    out.ok = false;
    out.detail << " [exception: " << e.what() << "]";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.require(secs < budget_s, "time budget " + std::to_string(budget_s) + " s");
  if (!out.ok) ++failures;
  std::printf("%s %2d  %-34s %8.2f s %s\n", out.ok ? "PASS" : "FAIL", id, title, secs, out.detail.str().c_str());
  std::fflush(stdout);
}

double max_abs_diff(const Superoperator& a, const Superoperator& b) { return (a.matrix - b.matrix).cwiseAbs().maxCoeff(); }

double trace_distance_to_mixed(const DensityMatrix& rho) {
  return rho.trace_distance(DensityMatrix::maximally_mixed(rho.dim()));
}

/// B_jk from a population vector; j > k.
double max_b_error(const RVector& p, const std::vector<double>& e, double beta) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < p.size(); ++j)
    for (Eigen::Index k = 0; k < j; ++k)
      worst = std::max(worst, std::abs(-std::log(p(j) / p(k)) / (e[j] - e[k]) - beta));
  return worst;
}

double simpson(const std::function<double(double)>& f, double a, double b, std::size_t intervals) {
  const double h = (b - a) / static_cast<double>(intervals);
  double s = f(a) + f(b);
  for (std::size_t i = 1; i < intervals; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + h * static_cast<double>(i));
  return s * h / 3.0;
}

RVector random_probabilities(std::mt19937_64& rng, std::size_t n) {
  std::exponential_distribution<double> ex(1.0);
  RVector p(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = ex(rng);
  return p / p.sum();
}

}  // namespace

int main() {
  const SystemSpec two = testing::two_level();
  const SystemSpec five = testing::five_level();
  const double fig4_beta = 3.0;

  std::vector<std::pair<SystemSpec, double>> random_cases;
  {
    std::mt19937_64 rng(20260101);
    for (int i = 0; i < 1000; ++i) {
      SystemSpec spec = testing::random_spec(rng);
      const double e = testing::random_energy(rng, spec);
      random_cases.emplace_back(std::move(spec), e);
    }
  }

  criterion(1, "s-matrix unitarity", 5.0, [&](Outcome& o) {
    double worst = 0.0;
    for (const auto& [spec, e] : random_cases) worst = std::max(worst, scattering_matrix(spec, e).unitarity_residual());
    o.detail << "max residual " << worst;
    o.require(worst < 1e-10, "unitarity < 1e-10");
  });

  criterion(2, "reciprocity", 5.0, [&](Outcome& o) {
    double worst = 0.0;
    for (const auto& [spec, e] : random_cases) worst = std::max(worst, scattering_matrix(spec, e).reciprocity_residual());
    o.detail << "max residual " << worst;
    o.require(worst < 1e-10, "s = s^T within 1e-10");
  });

  criterion(3, "single-channel transmission", 1.0, [&](Outcome& o) {
    double worst = 0.0;
    for (double g : {0.3, 1.0, -2.5}) {
      const SystemSpec spec{{0.0}, RMatrix::Ones(1, 1), g, 0.7, 1.3};
      for (double e = 0.01; e < 50.0; e *= 1.1) {
        const double expected = 1.0 / (1.0 + spec.mass * g * g / (2.0 * spec.hbar * spec.hbar * e));
        worst = std::max(worst, std::abs(std::norm(scattering_matrix(spec, e).t_left(0, 0)) - expected));
      }
    }
    o.detail << "max error " << worst;
    o.require(worst < 1e-12, "|t|^2 within 1e-12");
  });

  const MomentumEnsemble effusion = make_momentum_ensemble(EnsembleKind::Effusion, fig4_beta, five);
  const Superoperator effusion_map = ensemble_map(five, effusion);
  const PopulationMap effusion_w = population_map(effusion_map);

  criterion(4, "map validity", 60.0, [&](Outcome& o) {
    const Superoperator narrow = pure_packet_map(two, GaussianPacket::make(10.0, 0.0, 0.01));
    const Superoperator broad = pure_packet_map(two, GaussianPacket::make(10.0, 0.0, 1.0));
    const std::pair<const char*, const Superoperator*> maps[] = {
        {"fig3-narrow", &narrow}, {"fig3-broad", &broad}, {"fig4-effusion", &effusion_map}};
    for (const auto& [name, s] : maps) {
      const double tr = s->trace_residual();
      const double choi = choi_min_eigenvalue(*s);
      const double mag = s->max_entry_magnitude();
      o.detail << name << ": trace " << tr << " choi " << choi << " max " << mag << "; ";
      o.require(tr < 1e-6, std::string(name) + " trace");
      o.require(choi >= -1e-8, std::string(name) + " Choi");
      o.require(mag <= 1.0 + 1e-9, std::string(name) + " magnitude");
    }
  });

  criterion(5, "narrow-limit convergence", 120.0, [&](Outcome& o) {
    const Superoperator narrow = narrow_map(two, 10.0, Side::Left);
    double prev = std::numeric_limits<double>::infinity();
    for (double sigma : {0.04, 0.02, 0.01, 0.005}) {
      const double gap = max_abs_diff(pure_packet_map(two, GaussianPacket::make(10.0, 0.0, sigma)), narrow);
      o.detail << "sigma " << sigma << ": " << gap << "; ";
      o.require(gap < prev, "monotone at sigma " + std::to_string(sigma));
      prev = gap;
    }
    o.require(prev < 5e-3, "gap < 5e-3 at sigma 0.005");
  });

  criterion(6, "decoherence selection rule", 30.0, [&](Outcome& o) {
    const Superoperator s = narrow_map(two, 10.0, Side::Left);
    const auto traj =
        run_collisions(DensityMatrix::diagonal({1.0, 0.0}), s, {CollisionSchedule::Kind::Zero, 200, 0.0, 0}, two);
    double worst = 0.0;
    for (const DensityMatrix& rho : traj) {
      const auto b = bloch_vector(rho);
      worst = std::max({worst, std::abs(b[0]), std::abs(b[1])});
    }
    const double dist = trace_distance_to_mixed(traj.back());
    o.detail << "max |Px|,|Py| " << worst << ", final distance to mixed " << dist;
    o.require(worst < 1e-8, "|Px|, |Py| < 1e-8");
    o.require(dist < 0.05, "within 0.05 of maximally mixed");
  });

  criterion(7, "coherence generation", 60.0, [&](Outcome& o) {
    const Superoperator s = pure_packet_map(two, GaussianPacket::make(10.0, 0.0, 1.0));
    const auto traj =
        run_collisions(DensityMatrix::diagonal({1.0, 0.0}), s, {CollisionSchedule::Kind::Zero, 200, 0.0, 0}, two);
    const double first = std::abs(traj[1](0, 1));
    const double last = std::abs(traj.back()(0, 1));
    // Fixed point of the map: unit-trace kernel vector of S - I.
    const CMatrix kernel =
        Eigen::FullPivLU<CMatrix>(s.matrix - CMatrix::Identity(4, 4)).setThreshold(1e-10).kernel();
    o.require(kernel.cols() == 1, "unique fixed point");
    CMatrix fixed(2, 2);
    fixed << kernel(0, 0), kernel(1, 0), kernel(2, 0), kernel(3, 0);
    fixed /= fixed.trace();
    const DensityMatrix rho_fixed = DensityMatrix::from_matrix(fixed);
    // The map has a slow mode (eigenvalue ~1 - 1e-4): by step 200 the fast
    // transients are gone and the state moves by < 1e-4 per collision, but
    // the exact fixed point is only reached after ~1e5 collisions.
    const double step = traj.back().trace_distance(apply_map(s, traj.back()));
    DensityMatrix rho = traj.back();
    for (int n = 200; n < 200000; ++n) rho = apply_map(s, rho);
    const double dist = rho.trace_distance(rho_fixed);
    o.detail << "|rho01| after 1: " << first << ", after 200: " << last << " (step " << step << "), fixed point "
             << std::abs(rho_fixed(0, 1)) << " (reached to " << dist << ")";
    o.require(first > 1e-3, "first collision coherence");
    o.require(last > 1e-3 && step < 1e-4, "coherent plateau at 200 collisions");
    o.require(std::abs(rho_fixed(0, 1)) > 1e-3 && dist < 1e-6, "fixed point keeps coherence");
  });

  criterion(8, "detailed balance", 120.0, [&](Outcome& o) {
    const double eff = detailed_balance_residual(effusion_w, fig4_beta, five.energies);
    const MomentumEnsemble mb = make_momentum_ensemble(EnsembleKind::MaxwellBoltzmann, fig4_beta, five);
    const double mbr = detailed_balance_residual(population_map(ensemble_map(five, mb)), fig4_beta, five.energies);
    o.detail << "effusion " << eff << ", Maxwell-Boltzmann " << mbr;
    o.require(eff < 1e-6, "effusion residual < 1e-6");
    o.require(mbr > 1e-2, "Maxwell-Boltzmann residual > 1e-2");
  });

  criterion(9, "thermalization", 60.0, [&](Outcome& o) {
    const auto traj = run_collisions(DensityMatrix::gibbs(five.energies, 1.0), effusion_map,
                                     {CollisionSchedule::Kind::Zero, 200, 0.0, 0}, five);
    // The top populations reach ~1e-32, far below the default 1e-12 floor;
    // only a true underflow to subnormals would make B undefined here.
    const double floor = std::numeric_limits<double>::min();
    std::size_t settled = traj.size();
    for (std::size_t n = traj.size(); n-- > 0;) {
      const auto b = inverse_temperature_estimators(traj[n], five, UnderflowPolicy::MarkUndefined, floor);
      bool close = b.underflow.empty();
      for (std::size_t j = 1; j < 5 && close; ++j)
        for (std::size_t k = 0; k < j; ++k) close = close && std::abs(*b(j, k) - fig4_beta) <= 0.01;
      if (!close) break;
      settled = n;
    }
    o.detail << "all B within 0.01 of 3 from step " << settled;
    o.require(settled < traj.size() - 1, "effusion B settle at 3 and stay");

    const MomentumEnsemble mb = make_momentum_ensemble(EnsembleKind::MaxwellBoltzmann, fig4_beta, five);
    const RVector stat = stationary_distribution(population_map(ensemble_map(five, mb)));
    const double dev = max_b_error(stat, five.energies, fig4_beta);
    o.detail << "; Maxwell-Boltzmann max |B - 3| " << dev;
    o.require(dev > 0.05, "Maxwell-Boltzmann stationary state is not thermal");
  });

  criterion(10, "broad-ensemble diagonal", 30.0, [&](Outcome& o) {
    double worst = 0.0;
    for (const auto& [beta, m, sigma] : {std::tuple{3.0, 0.5, 0.31}, std::tuple{1.0, 1.0, 1.0}}) {
      const double scale = std::sqrt(m / beta);
      auto gauss = [&](double x) {
        return std::exp(-x * x / (2.0 * sigma * sigma)) / std::sqrt(2.0 * std::numbers::pi * sigma * sigma);
      };
      for (double t = -10.0; t <= 10.0; t += 0.25) {
        const double p = t * scale;
        const double oracle = simpson(
            [&](double p0) {
              return beta * (p0 / m) * std::exp(-beta * p0 * p0 / (2 * m)) * 0.5 * (gauss(p - p0) + gauss(p + p0));
            },
            0.0, 12.0 * scale, 40000);
        worst = std::max(worst, std::abs(broad_ensemble_diagonal(beta, m, sigma, p) - oracle));
      }
    }
    const double beta_c = broad_ensemble_parameters(3.0, 0.5, 0.31).beta_c;
    o.detail << "max error " << worst << ", beta_C " << beta_c;
    o.require(worst < 1e-8, "pointwise within 1e-8");
    o.require(std::abs(beta_c - 3.0 / (1.0 + 3.0 * 0.31 * 0.31 / 0.5)) < 1e-15 && std::abs(beta_c - 1.9028) < 5e-5,
              "beta_C = 1.9028");
  });

  criterion(11, "broad-ensemble dynamics", 600.0, [&](Outcome& o) {
    const ExperimentConfig cfg = load_config(QSCAT_SOURCE_DIR "/configs/fig5_broad_poisson.cfg");
    const PopulationMap w = broad_population_map(cfg.spec, cfg.source.beta, cfg.source.sigma, cfg.source.grid);
    const RVector stat = stationary_distribution(w);
    const RVector gibbs = DensityMatrix::gibbs(cfg.spec.energies, cfg.source.beta).population_vector();
    const double off_gibbs = (stat - gibbs).cwiseAbs().maxCoeff();

    const BuiltMap built = build_map(cfg);
    const Trajectory traj = run_trajectory(cfg, built.map);
    RVector avg = RVector::Zero(2);
    const std::size_t last = 100;
    for (std::size_t n = traj.states.size() - last; n < traj.states.size(); ++n)
      avg += traj.states[n].population_vector() / static_cast<double>(last);
    const double off_stat = (avg - stat).cwiseAbs().maxCoeff();
    o.detail << "stationary " << stat(0) << " vs Gibbs " << gibbs(0) << " (" << off_gibbs << "), last-100 mean "
             << avg(0) << " (" << off_stat << ")";
    o.require(off_gibbs > 0.02, "stationary differs from Gibbs by > 0.02");
    o.require(off_stat < 0.02, "time average within 0.02 of stationary");
  });

  criterion(12, "entropy production", 10.0, [&](Outcome& o) {
    std::mt19937_64 rng(12);
    double min_sigma = std::numeric_limits<double>::infinity();
    double worst_balance = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const RVector p = random_probabilities(rng, 5);
      const ThermoRecord rec = entropy_production(effusion_w, p, fig4_beta, five.energies);
      min_sigma = std::min(min_sigma, rec.entropy_production);
      worst_balance =
          std::max(worst_balance, std::abs(rec.entropy_change - fig4_beta * rec.heat - rec.entropy_production));
    }
    const RVector gibbs = DensityMatrix::gibbs(five.energies, fig4_beta).population_vector();
    const double at_gibbs = entropy_production(effusion_w, gibbs, fig4_beta, five.energies).entropy_production;
    o.detail << "min Sigma " << min_sigma << ", Sigma at Gibbs " << at_gibbs << ", balance " << worst_balance;
    o.require(min_sigma >= -1e-12, "Sigma >= -1e-12");
    o.require(std::abs(at_gibbs) < 1e-8, "Sigma = 0 at Gibbs");
    o.require(worst_balance < 1e-10, "dS = beta Q + Sigma");
  });

  criterion(13, "schedule independence", 10.0, [&](Outcome& o) {
    CMatrix plus(2, 2);
    plus << 0.5, 0.5, 0.5, 0.5;
    const std::pair<const Superoperator*, DensityMatrix> cases[] = {
        {&effusion_map, DensityMatrix::gibbs(five.energies, 1.0)},
        {nullptr, DensityMatrix::from_matrix(plus)}};
    const Superoperator narrow = narrow_map(two, 10.0, Side::Left);
    double worst = 0.0;
    for (const auto& [map, rho0] : cases) {
      const Superoperator& s = map ? *map : narrow;
      const SystemSpec& spec = map ? five : two;
      using K = CollisionSchedule::Kind;
      const auto zero = run_collisions(rho0, s, {K::Zero, 200, 0.0, 0}, spec);
      for (const CollisionSchedule& sched : {CollisionSchedule{K::Fixed, 200, 0.7, 0}, CollisionSchedule{K::Poissonian, 200, 1.3, 5}}) {
        const auto other = run_collisions(rho0, s, sched, spec);
        for (std::size_t n = 0; n < zero.size(); ++n)
          worst = std::max(worst, (zero[n].population_vector() - other[n].population_vector()).cwiseAbs().maxCoeff());
      }
    }
    o.detail << "max population difference " << worst;
    o.require(worst < 1e-12, "identical within 1e-12");
  });

  std::printf("%s: %d of 13 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
