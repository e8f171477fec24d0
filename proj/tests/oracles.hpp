#pragma once

// Independent reference computations shared by the unit and acceptance tests.

#include "dcmg/control.hpp"
#include "dcmg/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace oracle {

/// Componentwise |a - b| / max(|a|, |b|, 1).
inline double max_relative_discrepancy(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1.0});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

/// Uniform state in the [0, 30 V] x [-20, 20 A] box.
inline dcmg::GridState random_state(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> volt(0.0, 30.0);
  std::uniform_real_distribution<double> amp(-20.0, 20.0);
  dcmg::GridState x(n);
  for (std::size_t j = 0; j < n; ++j) {
    x.v(j) = volt(rng);
    x.it(j) = amp(rng);
  }
  x.vb() = volt(rng);
  x.i_f() = amp(rng);
  x.vl() = volt(rng);
  return x;
}

inline dcmg::ControlVector random_input(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> amp(0.0, 40.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  dcmg::ControlVector u;
  for (std::size_t j = 0; j < n; ++j) u.source_current.push_back(amp(rng));
  u.duty = unit(rng);
  return u;
}

struct GridQpResult {
  double u = 0.0;
  bool feasible = false;
  double objective = 0.0;  // (u - u_nom)^2, meaningful when feasible
};

/// Brute-force solution of the scalar CLF-QP: a uniform grid of `points`
/// samples over the box, then two nested grids of the same size around the
/// best sample. The objective is scale * (u - u_nom)^2. Infeasible
/// instances return the least-violation sample, ties broken towards u_nom.
inline GridQpResult grid_qp(const dcmg::ClfQp& qp, int points = 10000, double scale = 1.0) {
  auto g = [&](double u) { return qp.a + qp.b * u + qp.resilience + qp.decay; };
  auto f = [&](double u) { return scale * (u - qp.u_nom) * (u - qp.u_nom); };

  auto search = [&](double lo, double hi, GridQpResult& best, double& best_violation) {
    for (int i = 0; i < points; ++i) {
      const double u = lo + (hi - lo) * i / (points - 1);
      const double viol = std::max(0.0, g(u));
      if (viol <= 0.0) {
        if (!best.feasible || f(u) < best.objective) {
          best = {u, true, f(u)};
          best_violation = 0.0;
        }
      } else if (!best.feasible) {
        const bool better = viol < best_violation ||
                            (viol == best_violation && f(u) < f(best.u));
        if (better) {
          best.u = u;
          best_violation = viol;
        }
      }
    }
  };

  GridQpResult best;
  double best_violation = std::numeric_limits<double>::infinity();
  double lo = qp.u_min;
  double hi = qp.u_max;
  for (int level = 0; level < 3; ++level) {
    search(lo, hi, best, best_violation);
    const double cell = (hi - lo) / (points - 1);
    lo = std::max(qp.u_min, best.u - cell);
    hi = std::min(qp.u_max, best.u + cell);
    if (!(hi > lo)) break;
  }
  return best;
}

}  // namespace oracle
