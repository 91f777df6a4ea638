#pragma once

// Exhaustive grid search over MAC parameters: RF energy under a loss bound,
// BCC energy under an end-to-end delay bound, and delay under an energy budget.

#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <tuple>
#include <vector>

#include "wban/bcc_model.hpp"
#include "wban/rf_model.hpp"

namespace wban::opt {

struct IntRange {
  int lo = 1;
  int hi = 8;
};

inline std::vector<double> log_grid(double lo, double hi, int n) {
  if (!(lo > 0.0 && hi >= lo && n >= 1)) throw Error("CONFIG", "log grid needs 0 < lo <= hi and n >= 1");
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i)
    g[i] = n == 1 ? lo : std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (n - 1));
  g.front() = lo;
  if (n > 1) g.back() = hi;
  return g;
}

struct OptParams {
  int m_c = 0;
  int m_r = 0;
  int m_mp = 0;
  double r_s = 0.0;
  double r_l = 0.0;
};

struct Candidate {
  OptParams params;
  double energy = std::numeric_limits<double>::infinity();
  double delay = std::numeric_limits<double>::infinity();
  double plr = 1.0;
  bool stable = false;
  bool feasible = false;
};

struct OptResult {
  OptParams best_params;
  double best_objective = std::numeric_limits<double>::infinity();
  Candidate best;
  int feasible_count = 0;
  int evaluated_count = 0;
  std::vector<Candidate> table;
};

class Infeasible : public Error {
 public:
  Infeasible(const std::string& what, OptResult diag) : Error("INFEASIBLE", what), diag_(std::move(diag)) {}
  // best_params/best hold the closest miss (min PLR, min delay or min energy)
  const OptResult& diagnostic() const { return diag_; }

 private:
  OptResult diag_;
};

struct RfOptProblem {
  rf::RfModelInput base;
  IntRange m_c;
  IntRange m_r;
  double plr_max = 0.15;
  bool keep_table = false;
};

struct BccOptProblem {
  bcc::BccModelInput base;
  std::vector<double> r_l_grid = log_grid(1e-4, 1.0, 16);
  std::vector<double> r_s_grid = log_grid(1e-4, 1.0, 16);
  IntRange m_mp;
  double rf_delay = 0.0;
  double tau = std::numeric_limits<double>::infinity();
  bool keep_table = false;
};

struct DelayOptProblem {
  RfOptProblem rf;
  BccOptProblem bcc;  // tau is ignored
  double budget_per_packet = std::numeric_limits<double>::infinity();
  bool keep_table = false;
};

namespace detail {

inline void check_range(const IntRange& r, const char* name) {
  if (r.lo < 1 || r.hi < r.lo) throw Error("CONFIG", std::string(name) + " search range is empty");
}

inline auto rf_key(const Candidate& c) { return std::make_tuple(c.energy, c.params.m_r, c.params.m_c); }

inline auto bcc_key(const Candidate& c) {
  return std::make_tuple(c.energy, -c.params.r_s, c.params.m_mp, c.params.r_l);
}

inline auto delay_key(const Candidate& c) {
  return std::make_tuple(c.delay, c.params.m_r, c.params.m_c, -c.params.r_s, c.params.m_mp, c.params.r_l);
}

// Argmin over feasible candidates under a total order; `miss` picks the
// diagnostic candidate when nothing is feasible.
template <class Key, class Miss>
OptResult reduce(std::vector<Candidate> cands, bool keep, Key key, Miss miss, const char* what) {
  OptResult r;
  r.evaluated_count = static_cast<int>(cands.size());
  const Candidate* best = nullptr;
  const Candidate* closest = nullptr;
  for (const auto& c : cands) {
    if (c.stable && (!closest || miss(c) < miss(*closest))) closest = &c;
    if (!c.feasible) continue;
    ++r.feasible_count;
    if (!best || key(c) < key(*best)) best = &c;
  }
  if (best) {
    r.best = *best;
    r.best_params = best->params;
  } else if (closest) {
    r.best = *closest;
    r.best_params = closest->params;
  }
  if (keep) r.table = std::move(cands);
  if (!best) throw Infeasible(what, std::move(r));
  return r;
}

inline std::vector<Candidate> rf_candidates(const RfOptProblem& p) {
  check_range(p.m_c, "M_c");
  check_range(p.m_r, "M_r");
  std::vector<Candidate> out;
  for (int m_r = p.m_r.lo; m_r <= p.m_r.hi; ++m_r)
    for (int m_c = p.m_c.lo; m_c <= p.m_c.hi; ++m_c) {
      Candidate c;
      c.params.m_c = m_c;
      c.params.m_r = m_r;
      auto in = p.base;
      in.mac.m_c = m_c;
      in.mac.m_r = m_r;
      try {
        const auto s = rf::solve_rf(in);
        c.stable = true;
        c.energy = s.mean_energy;
        c.delay = s.mean_delay;
        c.plr = 0.0;
        for (const auto& l : in.relay_links)
          c.plr = std::max(c.plr, rf::node_loss(s.pi_cca, l.pi_e, m_r, m_c));
        c.feasible = c.plr <= p.plr_max;
      } catch (const UnstableSystem&) {
      } catch (const NonConvergence&) {
      }
      out.push_back(c);
    }
  return out;
}

inline std::vector<Candidate> bcc_candidates(const BccOptProblem& p) {
  check_range(p.m_mp, "M_mp");
  if (p.r_l_grid.empty() || p.r_s_grid.empty()) throw Error("CONFIG", "duty-cycle grids must be non-empty");
  std::vector<Candidate> out;
  for (int m_mp = p.m_mp.lo; m_mp <= p.m_mp.hi; ++m_mp)
    for (double r_s : p.r_s_grid)
      for (double r_l : p.r_l_grid) {
        Candidate c;
        c.params = {0, 0, m_mp, r_s, r_l};
        auto in = p.base;
        in.mac.m_mp = m_mp;
        in.mac.r_s = r_s;
        in.mac.r_l = r_l;
        try {
          const auto s = bcc::solve_bcc(in);
          c.stable = true;
          c.energy = s.mean_energy;
          c.delay = p.rf_delay + s.mean_delay;
          c.plr = s.pi_loss;
          c.feasible = c.delay <= p.tau;
        } catch (const UnstableSystem&) {
        } catch (const InvalidDutyCycle&) {
        } catch (const NonConvergence&) {
        }
        out.push_back(c);
      }
  return out;
}

}  // namespace detail

inline OptResult optimize_rf(const RfOptProblem& p) {
  auto r = detail::reduce(
      detail::rf_candidates(p), p.keep_table, detail::rf_key, [](const Candidate& c) { return c.plr; },
      "no (M_c, M_r) candidate meets the loss bound");
  r.best_objective = r.best.energy;
  return r;
}

inline OptResult optimize_bcc(const BccOptProblem& p) {
  if (!(p.tau > 0.0)) throw Error("CONFIG", "tau must be > 0");
  auto r = detail::reduce(
      detail::bcc_candidates(p), p.keep_table, detail::bcc_key, [](const Candidate& c) { return c.delay; },
      "no duty-cycle candidate meets the delay bound");
  r.best_objective = r.best.energy;
  return r;
}

inline OptResult optimize_delay_under_energy(const DelayOptProblem& p) {
  if (!(p.budget_per_packet > 0.0)) throw Error("CONFIG", "energy budget must be > 0");
  auto bp = p.bcc;
  bp.rf_delay = 0.0;
  bp.tau = std::numeric_limits<double>::infinity();
  const auto rf_c = detail::rf_candidates(p.rf);
  const auto bcc_c = detail::bcc_candidates(bp);

  std::vector<Candidate> joint;
  joint.reserve(rf_c.size() * bcc_c.size());
  for (const auto& a : rf_c)
    for (const auto& b : bcc_c) {
      Candidate c;
      c.params = {a.params.m_c, a.params.m_r, b.params.m_mp, b.params.r_s, b.params.r_l};
      c.stable = a.stable && b.stable;
      if (c.stable) {
        c.energy = a.energy + b.energy;
        c.delay = a.delay + b.delay;
        c.plr = 1.0 - (1.0 - a.plr) * (1.0 - b.plr);
        c.feasible = c.energy <= p.budget_per_packet;
      }
      joint.push_back(c);
    }
  auto r = detail::reduce(
      std::move(joint), p.keep_table, detail::delay_key, [](const Candidate& c) { return c.energy; },
      "no candidate fits the per-packet energy budget");
  r.best_objective = r.best.delay;
  return r;
}

inline void write_table_csv(std::ostream& os, const OptResult& r) {
  os << "m_c,m_r,m_mp,r_s,r_l,energy_j,delay_s,plr,stable,feasible\n";
  for (const auto& c : r.table)
    os << c.params.m_c << ',' << c.params.m_r << ',' << c.params.m_mp << ',' << c.params.r_s << ',' << c.params.r_l
       << ',' << c.energy << ',' << c.delay << ',' << c.plr << ',' << c.stable << ',' << c.feasible << '\n';
}

}  // namespace wban::opt
