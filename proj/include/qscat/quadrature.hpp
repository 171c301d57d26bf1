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

#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace qscat {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule on [-1, 1] via Newton iteration on P_n.
inline QuadratureRule gauss_legendre(std::size_t n) {
  if (n == 0) throw std::invalid_argument("gauss_legendre: n must be positive");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const std::size_t half = (n + 1) / 2;
  const double dn = static_cast<double>(n);
  for (std::size_t i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (dn + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double dk = static_cast<double>(k);
        const double p2 = ((2.0 * dk - 1.0) * x * p1 - (dk - 1.0) * p0) / dk;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = dn * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged node
    double p0 = 1.0;
    double p1 = x;
    for (std::size_t k = 2; k <= n; ++k) {
      const double dk = static_cast<double>(k);
      const double p2 = ((2.0 * dk - 1.0) * x * p1 - (dk - 1.0) * p0) / dk;
      p0 = p1;
      p1 = p2;
    }
    dp = dn * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

/// Composite rule: equal panels of an n-point Gauss-Legendre rule on [a, b].
inline QuadratureRule composite_gauss_legendre(double a, double b, std::size_t panels,
                                               const QuadratureRule& base) {
  QuadratureRule out;
  const std::size_t n = base.nodes.size();
  out.nodes.reserve(panels * n);
  out.weights.reserve(panels * n);
  const double h = (b - a) / static_cast<double>(panels);
  for (std::size_t k = 0; k < panels; ++k) {
    const double lo = a + h * static_cast<double>(k);
    const double mid = lo + 0.5 * h;
    for (std::size_t i = 0; i < n; ++i) {
      out.nodes.push_back(mid + 0.5 * h * base.nodes[i]);
      out.weights.push_back(0.5 * h * base.weights[i]);
    }
  }
  return out;
}

/// n-point rule on [a, b] after the substitution p = a + (b - a) sin^2(theta).
/// Integrands with square-root behaviour at either end become smooth in theta.
inline QuadratureRule sine_squared_rule(double a, double b, const QuadratureRule& base) {
  QuadratureRule out;
  const std::size_t n = base.nodes.size();
  out.nodes.resize(n);
  out.weights.resize(n);
  const double quarter_pi = 0.25 * std::numbers::pi;
  for (std::size_t i = 0; i < n; ++i) {
    const double theta = quarter_pi * (base.nodes[i] + 1.0);
    const double s = std::sin(theta);
    out.nodes[i] = a + (b - a) * s * s;
    out.weights[i] = quarter_pi * base.weights[i] * (b - a) * std::sin(2.0 * theta);
  }
  return out;
}

/// Composite Gauss-Legendre in theta over [0, pi/2] mapped by
/// x = a + (b - a) sin^2(theta). Square-root behaviour at either end becomes
/// smooth in theta.
inline QuadratureRule composite_sine_squared(double a, double b, std::size_t panels, const QuadratureRule& base) {
  QuadratureRule theta = composite_gauss_legendre(0.0, 0.5 * std::numbers::pi, panels, base);
  for (std::size_t i = 0; i < theta.nodes.size(); ++i) {
    const double s = std::sin(theta.nodes[i]);
    theta.weights[i] *= (b - a) * std::sin(2.0 * theta.nodes[i]);
    theta.nodes[i] = a + (b - a) * s * s;
  }
  return theta;
}

}  // namespace qscat
