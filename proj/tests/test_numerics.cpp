#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "wban/numerics.hpp"

using namespace wban;
using namespace wban::numerics;

namespace {

// Composite Simpson integration of the standard normal density over [a, b].
double normal_tail_quadrature(double a, double b, int panels = 20000) {
  const double h = (b - a) / panels;
  auto f = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); };
  double s = f(a) + f(b);
  for (int i = 1; i < panels; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace

TEST(QFunction, Symmetry) { EXPECT_DOUBLE_EQ(q_function(0.0), 0.5); }

TEST(QFunction, FarTail) { EXPECT_LT(q_function(40.0), 1e-300); }

TEST(QFunction, MatchesQuadratureOracle) {
  const double oracle = normal_tail_quadrature(3.0, 40.0);
  EXPECT_NEAR(oracle, 1.3499e-3, 1e-7);
  EXPECT_NEAR(q_function(3.0), oracle, 1e-12);
  for (double x : {0.5, 1.0, 2.0, 4.0, 6.0, 8.0})
    EXPECT_NEAR(q_function(x), normal_tail_quadrature(x, 40.0), 1e-12) << x;
}

TEST(QFunction, MonotoneAndComplementary) {
  double prev = 1.0;
  for (double x = -8.0; x <= 8.0; x += 0.01) {
    const double q = q_function(x);
    EXPECT_LE(q, prev);
    EXPECT_NEAR(q + q_function(-x), 1.0, 1e-12);
    prev = q;
  }
}

TEST(TruncatedGeometric, MassSumsToOne) {
  for (double p : {0.0, 0.1, 0.37, 0.9, 1.0 - 1e-12})
    for (int m = 1; m <= 10; ++m) {
      const auto mass = truncated_geometric(p, m);
      double s = 0.0;
      for (double v : mass) s += v;
      EXPECT_NEAR(s, 1.0, 1e-15);
    }
}

TEST(FixedPoint, LinearContraction) {
  FixedPointProblem p;
  p.map = [](const std::vector<double>& x) { return std::vector<double>{0.5 * x[0] + 1.0}; };
  const auto r = solve_fixed_point(p, {0.0});
  EXPECT_NEAR(r.solution[0], 2.0, 1e-8);
  EXPECT_LE(r.residual, p.tolerance);
}

TEST(FixedPoint, IdentityReturnsInitInOneIteration) {
  FixedPointProblem p;
  p.map = [](const std::vector<double>& x) { return x; };
  const auto r = solve_fixed_point(p, {0.3, 7.0});
  EXPECT_EQ(r.iterations, 1);
  EXPECT_EQ(r.solution, (std::vector<double>{0.3, 7.0}));
}

TEST(FixedPoint, IndependentOfInitForContractions) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.5, 0.5), c(-5, 5), x0(-100, 100);
  for (int t = 0; t < 50; ++t) {
    const double a = u(rng), b = c(rng);
    FixedPointProblem p;
    p.map = [=](const std::vector<double>& x) { return std::vector<double>{a * x[0] + b}; };
    const auto r1 = solve_fixed_point(p, {x0(rng)});
    const auto r2 = solve_fixed_point(p, {x0(rng)});
    const double scale = std::max(1.0, std::abs(r1.solution[0]));
    EXPECT_LE(std::abs(r1.solution[0] - r2.solution[0]) / scale, 10 * p.tolerance);
  }
}

TEST(FixedPoint, ProbabilityCoordinatesAreClamped) {
  FixedPointProblem p;
  p.probability_coords = {true};
  p.map = [](const std::vector<double>& x) { return std::vector<double>{x[0] + 0.7}; };
  // the map has no fixed point in [0, 1]; the clamp pins the iterate below one
  const auto r = solve_fixed_point(p, {0.5});
  EXPECT_LT(r.solution[0], 1.0);
  EXPECT_GT(r.solution[0], 1.0 - 1e-9);
}

TEST(FixedPoint, NonFiniteIsDivergence) {
  FixedPointProblem p;
  p.map = [](const std::vector<double>& x) { return std::vector<double>{std::log(x[0] - 1.0)}; };
  EXPECT_THROW(solve_fixed_point(p, {0.5}), DivergenceError);
}

TEST(FixedPoint, OscillatingMapConvergesWithDamping) {
  // Raw iteration of x -> 2 - x oscillates forever; damping settles it.
  FixedPointProblem p;
  p.map = [](const std::vector<double>& x) { return std::vector<double>{2.0 - x[0]}; };
  const auto r = solve_fixed_point(p, {0.0});
  EXPECT_NEAR(r.solution[0], 1.0, 1e-9);
}

TEST(FixedPoint, FallbackDampingRescuesStiffMap) {
  // Slope -5: damped with 0.5 the multiplier is -2 (diverges to the clamp
  // bound and stalls); with 0.1 it is 0.4.
  FixedPointProblem p;
  p.max_iters = 500;
  p.map = [](const std::vector<double>& x) { return std::vector<double>{6.0 - 5.0 * x[0]}; };
  p.fallback_damping = 0.0;
  EXPECT_ANY_THROW(solve_fixed_point(p, {0.0}));
  p.fallback_damping = 0.1;
  const auto r = solve_fixed_point(p, {0.0});
  EXPECT_NEAR(r.solution[0], 1.0, 1e-8);
}
