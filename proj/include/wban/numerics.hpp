#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "wban/error.hpp"

namespace wban::numerics {

// Gaussian tail P[Z > x].
inline double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

// Outcome distribution of up to `max_attempts` independent channel checks that
// each find the channel busy with probability `busy`: entry v < max_attempts
// is busy^v (1 - busy) (free on check v+1), the last entry is busy^max_attempts.
inline std::vector<double> truncated_geometric(double busy, int max_attempts) {
  std::vector<double> mass(static_cast<std::size_t>(max_attempts) + 1);
  double pw = 1.0;
  for (int v = 0; v < max_attempts; ++v) {
    mass[v] = pw * (1.0 - busy);
    pw *= busy;
  }
  mass[max_attempts] = pw;
  return mass;
}

// sum_{k<n} k p^k (1-p)
inline double truncated_geometric_mean(double p, int n) {
  double s = 0.0, pw = 1.0;
  for (int k = 0; k < n; ++k) {
    s += k * pw * (1.0 - p);
    pw *= p;
  }
  return s;
}

inline double geometric_sum(double p, int n) {
  double s = 0.0, pw = 1.0;
  for (int k = 0; k < n; ++k) {
    s += pw;
    pw *= p;
  }
  return s;
}

struct FixedPointProblem {
  std::function<std::vector<double>(const std::vector<double>&)> map;
  // Coordinates clamped to [0, 1 - 1e-12] after every step.
  std::vector<bool> probability_coords;
  double tolerance = 1e-9;
  int max_iters = 10000;
  double damping = 0.5;
  double fallback_damping = 0.1;  // retried once on non-convergence; 0 disables
};

struct FixedPointResult {
  std::vector<double> solution;
  double residual = 0.0;
  int iterations = 0;
};

namespace detail {

constexpr double kProbabilityCeiling = 1.0 - 1e-12;

inline double scaled_residual(const std::vector<double>& x, const std::vector<double>& fx) {
  double diff = 0.0, norm = 1.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    diff = std::max(diff, std::abs(fx[i] - x[i]));
    norm = std::max(norm, std::abs(x[i]));
  }
  return diff / norm;
}

inline void clamp(std::vector<double>& x, const std::vector<bool>& prob) {
  for (std::size_t i = 0; i < x.size() && i < prob.size(); ++i)
    if (prob[i]) x[i] = std::clamp(x[i], 0.0, kProbabilityCeiling);
}

inline void require_finite(const std::vector<double>& x) {
  for (double v : x)
    if (!std::isfinite(v)) throw DivergenceError("fixed-point iterate became non-finite");
}

inline FixedPointResult iterate(const FixedPointProblem& p, std::vector<double> x, double alpha) {
  detail::clamp(x, p.probability_coords);
  double best = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= p.max_iters; ++it) {
    auto fx = p.map(x);
    require_finite(fx);
    detail::clamp(fx, p.probability_coords);
    const double r = scaled_residual(x, fx);
    best = std::min(best, r);
    if (r <= p.tolerance) return {std::move(x), r, it};
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = (1.0 - alpha) * x[i] + alpha * fx[i];
    detail::clamp(x, p.probability_coords);
    require_finite(x);
  }
  throw NonConvergence(best, p.max_iters);
}

}  // namespace detail

// Damped iteration x <- (1 - a) x + a map(x) until the scaled residual
// |map(x) - x|_inf / max(1, |x|_inf) drops below the tolerance.
inline FixedPointResult solve_fixed_point(const FixedPointProblem& problem, std::vector<double> init) {
  if (!(problem.tolerance > 0.0)) throw Error("CONFIG", "fixed-point tolerance must be > 0");
  if (!(problem.damping > 0.0 && problem.damping <= 1.0)) throw Error("CONFIG", "damping must be in (0, 1]");
  try {
    return detail::iterate(problem, init, problem.damping);
  } catch (const NonConvergence&) {
    if (problem.fallback_damping <= 0.0 || problem.fallback_damping >= problem.damping) throw;
    return detail::iterate(problem, std::move(init), problem.fallback_damping);
  }
}

}  // namespace wban::numerics
