#include <gtest/gtest.h>

#include <sstream>

#include "wban/optimizer.hpp"

using namespace wban;
using namespace wban::opt;

namespace {

RfOptProblem rf_problem(double pi_e, double load, int relays = 2) {
  RfOptProblem p;
  for (int i = 0; i < relays; ++i) p.base.relay_links.push_back(LinkState{i, 0, 0, pi_e, 100});
  p.base.load_direct = load;
  return p;
}

BccOptProblem bcc_problem(double tau, double rf_delay = 3e-3) {
  BccOptProblem p;
  p.base.n_nodes = 6;
  p.base.n_relays = 2;
  p.base.load_forwarded = 20.0;
  p.base.timing.t_pream = 0.0;
  p.rf_delay = rf_delay;
  p.tau = tau;
  return p;
}

// Plain re-enumeration used as the reference argmin.
std::optional<std::pair<int, int>> rf_oracle(const RfOptProblem& p) {
  std::optional<std::pair<int, int>> best;
  double best_e = 0.0;
  for (int m_r = p.m_r.lo; m_r <= p.m_r.hi; ++m_r)
    for (int m_c = p.m_c.lo; m_c <= p.m_c.hi; ++m_c) {
      auto in = p.base;
      in.mac.m_r = m_r;
      in.mac.m_c = m_c;
      rf::RfModelSolution s;
      try {
        s = rf::solve_rf(in);
      } catch (const UnstableSystem&) {
        continue;
      }
      double worst = 0.0;
      for (const auto& l : in.relay_links) {
        const double ok = (1 - std::pow(l.pi_e, m_r)) * (1 - std::pow(s.pi_cca, m_c));
        worst = std::max(worst, 1 - ok);
      }
      if (worst > p.plr_max) continue;
      if (!best || s.mean_energy < best_e) {
        best = {m_r, m_c};
        best_e = s.mean_energy;
      }
    }
  return best;
}

}  // namespace

TEST(LogGrid, EndpointsAndRatio) {
  const auto g = log_grid(1e-4, 1.0, 16);
  ASSERT_EQ(g.size(), 16u);
  EXPECT_DOUBLE_EQ(g.front(), 1e-4);
  EXPECT_NEAR(g.back(), 1.0, 1e-12);
  EXPECT_NEAR(g[1] / g[0], g[15] / g[14], 1e-9);
}

TEST(OptimizeRf, ErasureFreeLinksNeedOneTransmission) {
  for (double load : {5.0, 20.0, 60.0}) {
    const auto r = optimize_rf(rf_problem(0.0, load));
    EXPECT_EQ(r.best_params.m_r, 1) << load;
    EXPECT_EQ(r.evaluated_count, 64);
  }
}

TEST(OptimizeRf, MatchesReEnumeration) {
  for (double e : {0.0, 0.05, 0.1, 0.2, 0.3})
    for (double load : {10.0, 50.0, 100.0})
      for (int relays : {1, 2, 3}) {
        const auto p = rf_problem(e, load, relays);
        const auto oracle = rf_oracle(p);
        try {
          const auto r = optimize_rf(p);
          ASSERT_TRUE(oracle.has_value());
          EXPECT_EQ(r.best_params.m_r, oracle->first);
          EXPECT_EQ(r.best_params.m_c, oracle->second);
          EXPECT_LE(r.best.plr, p.plr_max);
        } catch (const Infeasible&) {
          EXPECT_FALSE(oracle.has_value());
        }
      }
}

TEST(OptimizeRf, ZeroLossBoundWithErasuresIsInfeasible) {
  auto p = rf_problem(0.5, 10.0);
  p.plr_max = 0.0;
  try {
    optimize_rf(p);
    FAIL();
  } catch (const Infeasible& e) {
    EXPECT_EQ(e.code(), "INFEASIBLE");
    EXPECT_EQ(e.diagnostic().feasible_count, 0);
    EXPECT_EQ(e.diagnostic().best_params.m_r, 8);
    EXPECT_GT(e.diagnostic().best.plr, 0.0);
  }
}

TEST(OptimizeRf, SingleCandidateGrid) {
  auto p = rf_problem(0.1, 10.0);
  p.m_c = {3, 3};
  p.m_r = {3, 3};
  const auto r = optimize_rf(p);
  EXPECT_EQ(r.evaluated_count, 1);
  EXPECT_EQ(r.best_params.m_c, 3);
  p.plr_max = 1e-9;
  EXPECT_THROW(optimize_rf(p), Infeasible);
}

TEST(OptimizeRf, RelaxingBoundNeverHurts) {
  double prev = std::numeric_limits<double>::infinity();
  for (double plr : {0.01, 0.05, 0.1, 0.15, 0.3, 1.0}) {
    auto p = rf_problem(0.3, 40.0);
    p.plr_max = plr;
    try {
      const auto r = optimize_rf(p);
      EXPECT_LE(r.best_objective, prev);
      prev = r.best_objective;
    } catch (const Infeasible&) {
      EXPECT_TRUE(std::isinf(prev));
    }
  }
}

TEST(OptimizeRf, RejectsEmptySpace) {
  auto p = rf_problem(0.1, 10.0);
  p.m_c = {3, 2};
  EXPECT_THROW(optimize_rf(p), Error);
}

TEST(OptimizeBcc, UnboundedDelayMatchesGridArgmin) {
  auto p = bcc_problem(std::numeric_limits<double>::infinity());
  p.keep_table = true;
  const auto r = optimize_bcc(p);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : r.table)
    if (c.stable) best = std::min(best, c.energy);
  EXPECT_EQ(r.best_objective, best);
  EXPECT_EQ(r.evaluated_count, 16 * 16 * 8);
}

TEST(OptimizeBcc, DelayBoundBelowFloorIsInfeasible) {
  const auto t = bcc_default_timing();
  // no preamble and no contention: strictly below any candidate
  const double floor = bcc::data_phase_delay(t) + t.t_att + t.t_rtr;
  EXPECT_THROW(optimize_bcc(bcc_problem(3e-3 + floor)), Infeasible);
}

TEST(OptimizeBcc, FeasibleSetNesting) {
  const auto loose = optimize_bcc(bcc_problem(1.0));
  const auto tight = optimize_bcc(bcc_problem(0.05));
  EXPECT_LE(loose.best_objective, tight.best_objective);
  EXPECT_LE(tight.best.delay, 0.05);
  EXPECT_GE(loose.feasible_count, tight.feasible_count);
}

TEST(OptimizeBcc, Deterministic) {
  const auto a = optimize_bcc(bcc_problem(0.05));
  const auto b = optimize_bcc(bcc_problem(0.05));
  EXPECT_EQ(a.best_params.r_s, b.best_params.r_s);
  EXPECT_EQ(a.best_params.r_l, b.best_params.r_l);
  EXPECT_EQ(a.best_params.m_mp, b.best_params.m_mp);
  EXPECT_EQ(a.best_objective, b.best_objective);
}

TEST(OptimizeBcc, NonPositiveTauRejected) { EXPECT_THROW(optimize_bcc(bcc_problem(0.0)), Error); }

TEST(OptimizeDelay, UnlimitedBudgetIsGlobalDelayMinimum) {
  DelayOptProblem p;
  p.rf = rf_problem(0.1, 20.0);
  p.bcc = bcc_problem(1.0);
  p.bcc.r_l_grid = log_grid(1e-4, 1.0, 6);
  p.bcc.r_s_grid = log_grid(1e-4, 1.0, 6);
  p.keep_table = true;
  const auto r = optimize_delay_under_energy(p);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : r.table)
    if (c.stable) best = std::min(best, c.delay);
  EXPECT_EQ(r.best_objective, best);
}

TEST(OptimizeDelay, BudgetBelowCheapestIsInfeasible) {
  DelayOptProblem p;
  p.rf = rf_problem(0.1, 20.0);
  p.bcc = bcc_problem(1.0);
  p.bcc.r_l_grid = log_grid(1e-4, 1.0, 4);
  p.bcc.r_s_grid = log_grid(1e-4, 1.0, 4);
  p.budget_per_packet = 1e-9;
  EXPECT_THROW(optimize_delay_under_energy(p), Infeasible);
}

TEST(OptimizeDelay, ProportionalBudgetIsFeasible) {
  // 100 J shared by 1000 packets.
  DelayOptProblem p;
  p.rf = rf_problem(0.1, 20.0);
  p.bcc = bcc_problem(1.0);
  p.budget_per_packet = 100.0 / 1000.0;
  const auto r = optimize_delay_under_energy(p);
  EXPECT_GT(r.feasible_count, 0);
  EXPECT_LE(r.best.energy, p.budget_per_packet);
}

TEST(TableExport, OneRowPerCandidate) {
  auto p = rf_problem(0.1, 10.0);
  p.keep_table = true;
  const auto r = optimize_rf(p);
  std::ostringstream os;
  write_table_csv(os, r);
  const auto text = os.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 65);
}
