#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "wban/bcc_model.hpp"
#include "wban/rf_model.hpp"
#include "wban/sim/engine.hpp"
#include "wban/sim/scenario.hpp"

using namespace wban;
using namespace wban::sim;

namespace {

Config net(int n, int n_r, double rate) {
  Config c = default_config();
  c.network.n_nodes = n;
  c.network.n_relays = n_r;
  c.network.per_node_rate.assign(n, rate);
  return c;
}

SimOptions budget(long packets) {
  SimOptions o;
  o.packets_per_node = packets;
  return o;
}

}  // namespace

TEST(EventQueue, OrdersByTimeThenInsertion) {
  EventQueue q;
  q.push(2.0, EventKind::TxEnd, 1);
  q.push(1.0, EventKind::TxEnd, 2);
  q.push(1.0, EventKind::TxEnd, 3);
  EXPECT_EQ(q.pop().node, 2);
  EXPECT_EQ(q.pop().node, 3);
  EXPECT_EQ(q.pop().node, 1);
  EXPECT_TRUE(q.empty());
}

TEST(Rng, StreamsAreIndependentAndReproducible) {
  Stream a(7, 0, Purpose::Arrivals), b(7, 0, Purpose::Arrivals), c(7, 1, Purpose::Arrivals);
  int same = 0;
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform();
    EXPECT_EQ(x, b.uniform());
    same += x == c.uniform();
  }
  EXPECT_EQ(same, 0);
}

TEST(Rng, UptoIsUniform) {
  Stream s(1, 0, Purpose::Backoff);
  std::vector<int> hist(8);
  for (int i = 0; i < 80000; ++i) ++hist[s.upto(7)];
  for (int h : hist) EXPECT_NEAR(h, 10000, 400);
}

TEST(RayleighErasure, MatchesMonteCarlo) {
  std::mt19937_64 g(11);
  for (double mean_db : {0.0, 5.0, 12.0}) {
    const double mean = std::pow(10.0, mean_db / 10.0);
    std::exponential_distribution<double> d(1.0 / mean);
    const int n = 200000;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += rf::erasure_from_snr(d(g), 800, 88);
    const double mc = acc / n;
    EXPECT_NEAR(rf::erasure_rayleigh(mean, 800, 88), mc, 5e-3) << mean_db;
  }
  EXPECT_EQ(rf::erasure_rayleigh(0.0, 800, 88), 1.0);
}

TEST(Ledger, ChargesMaxPowerAndSleepFill) {
  sim::detail::RadioLedger l;
  l.present = true;
  l.idle_power = 1.0;
  l.book(1.0, 3.0, 5.0, EnergyCategory::Tx);
  l.book(2.0, 4.0, 2.0, EnergyCategory::Rx);
  const auto e = l.settle(10.0);
  EXPECT_DOUBLE_EQ(e[EnergyCategory::Tx], 10.0);
  EXPECT_DOUBLE_EQ(e[EnergyCategory::Rx], 2.0);
  EXPECT_DOUBLE_EQ(e[EnergyCategory::Sleep], 7.0);
}

TEST(Sim, ZeroLoadIsIdleOnly) {
  auto c = net(4, 1, 0.0);
  SimOptions o;
  o.duration = 10.0;
  const auto d = run(c, fixed_channel(std::vector<double>(4, 0.0)), SystemSpec::direct(), o, 1);
  EXPECT_EQ(d.generated, 0);
  EXPECT_NEAR(d.energy.total(), 4 * c.rf_power.p_sleep * 10.0, 1e-12);
  const auto f = run(c, fixed_channel(std::vector<double>(4, 0.0)), SystemSpec::relay(0), o, 1);
  EXPECT_NEAR(f.energy.total(), 4 * (c.rf_power.p_sleep + c.bcc_power.p_sleep) * 10.0, 1e-12);
}

TEST(Sim, SingleNodeMatchesContentionFreeFormula) {
  auto c = net(1, 1, 1.0);
  const auto m = run(c, fixed_channel({0.0}), SystemSpec::direct(), budget(4000), 3);
  const auto& t = c.rf_timing;
  // Uniform backoff over W0 slots, one CCA, one transmission.
  const double w0 = std::ldexp(1.0, c.mac.be_min);
  const double backoff = (w0 - 1.0) / 2.0 * t.t_slot;
  const double hol = backoff + t.t_cca + t.t_att + t.t_data + t.t_ack;
  EXPECT_EQ(m.lost, 0);
  EXPECT_EQ(m.rf_mac.transmissions, m.rf_mac.jobs);
  EXPECT_NEAR(m.rf_mac.mean_delay(), hol, 0.02 * hol);
  const auto& p = c.rf_power;
  const double e = backoff * p.p_act + t.t_cca * p.p_cca + t.t_att * p.p_act + t.t_data * p.p_tx + t.t_ack * p.p_rx;
  EXPECT_NEAR(m.rf_mac.mean_energy(), e, 0.02 * e);
}

TEST(Sim, RetryLimitBoundsTransmissions) {
  auto c = net(1, 1, 5.0);
  c.mac.m_r = 4;
  const auto m = run(c, fixed_channel({1.0}), SystemSpec::direct(), budget(200), 2);
  EXPECT_EQ(m.delivered, 0);
  EXPECT_EQ(m.lost, m.generated);
  EXPECT_EQ(m.rf_mac.transmissions, 4 * m.rf_mac.jobs);
}

TEST(Sim, LossMatchesGeometricRetries) {
  auto c = net(1, 1, 5.0);
  c.mac.m_r = 2;
  auto o = budget(20000);
  o.retry = RetryPolicy::Immediate;
  const auto m = run(c, fixed_channel({0.5}), SystemSpec::direct(), o, 4);
  EXPECT_NEAR(m.plr(), 0.25, 0.015);
}

TEST(Sim, DeterministicForSeed) {
  auto c = net(4, 2, 20.0);
  ScenarioParams sp;
  const auto sc = body_scenario(sp, 4, 9);
  SimOptions o = budget(300);
  o.record_debug = true;
  const auto a = run(c, rayleigh_channel(sc), SystemSpec::proposed(), o, 5);
  const auto b = run(c, rayleigh_channel(sc), SystemSpec::proposed(), o, 5);
  const auto d = run(c, rayleigh_channel(sc), SystemSpec::proposed(), o, 6);
  EXPECT_EQ(a.trace_hash, b.trace_hash);
  EXPECT_EQ(a.debug_lines, b.debug_lines);
  EXPECT_EQ(a.energy.total(), b.energy.total());
  EXPECT_EQ(a.mean_delay, b.mean_delay);
  EXPECT_NE(a.trace_hash, d.trace_hash);
}

TEST(Sim, PacketsAreConserved) {
  for (const auto& sys : {SystemSpec::proposed(), SystemSpec::baseline(), SystemSpec::direct()}) {
    auto c = net(6, 2, 15.0);
    ScenarioParams sp;
    sp.kind = ScenarioKind::Scenario2;
    const auto sc = body_scenario(sp, 6, 3);
    const auto m = run(c, rayleigh_channel(sc), sys, budget(400), 8);
    EXPECT_FALSE(m.partial);
    EXPECT_EQ(m.generated, 6 * 400);
    EXPECT_EQ(m.delivered + m.lost, m.generated);
    EXPECT_EQ(m.duplicates, 0);
  }
}

TEST(Sim, BlockedNodesLoseEverythingWithoutHelp) {
  auto c = net(4, 2, 10.0);
  ScenarioParams sp;
  sp.kind = ScenarioKind::Scenario2;
  const auto sc = body_scenario(sp, 4, 1);
  const auto m = run(c, rayleigh_channel(sc), SystemSpec::direct(), budget(200), 1);
  for (int i = 0; i < 4; ++i) {
    if (!sc.los[i]) {
      EXPECT_EQ(m.nodes[i].delivered, 0) << i;
    }
  }
  const auto p = run(c, rayleigh_channel(sc), SystemSpec::proposed(), budget(200), 1);
  EXPECT_LT(p.plr(), m.plr());
}

TEST(Sim, RelayCountInvariantHolds) {
  auto c = net(8, 3, 10.0);
  c.network.est_period = 0.2;
  ScenarioParams sp;
  sp.kind = ScenarioKind::Scenario1;
  const auto sc = body_scenario(sp, 8, 4);
  const auto m = run(c, rayleigh_channel(sc), SystemSpec::proposed(), budget(500), 2);
  EXPECT_GT(m.monitor_checks, 0);
  EXPECT_EQ(m.monitor_violations, 0);
  EXPECT_LE(m.max_tokens_in_flight, 1);
}

TEST(Sim, TransitionEnergyIsLinearInPowerCycles) {
  auto c = net(4, 1, 5.0);
  ScenarioParams sp;
  const auto sc = body_scenario(sp, 4, 2);
  SimOptions o;
  o.duration = 20.0;
  o.extended_energy = true;
  o.energy_per_power_cycle = 1e-3;
  o.energy_per_protocol_call = 2e-6;
  const auto m = run(c, rayleigh_channel(sc), SystemSpec::proposed(), o, 3);
  EXPECT_GT(m.rf_power_cycles, 0);
  EXPECT_NEAR(m.energy[EnergyCategory::Transition], 1e-3 * m.rf_power_cycles, 1e-12);
  EXPECT_NEAR(m.energy[EnergyCategory::Compute], 2e-6 * m.protocol_calls, 1e-12);
  o.extended_energy = false;
  const auto plain = run(c, rayleigh_channel(sc), SystemSpec::proposed(), o, 3);
  EXPECT_EQ(plain.energy[EnergyCategory::Transition], 0.0);
}

TEST(Sim, ControlTrafficMatchesOverheadFormula) {
  auto c = net(6, 3, 0.0);
  SimOptions o;
  o.duration = 50.0;
  o.warmup = 5.0;
  const auto m = run(c, fixed_channel(std::vector<double>(6, 0.05)), SystemSpec::proposed(), o, 1);
  // Fixed channel: estimates never change, so no tokens after settling.
  const double expect = 6 * c.network.status_len_bits / c.network.est_period;
  EXPECT_NEAR(m.control_bps, expect, 0.05 * expect);
}

TEST(Sim, TokenDoesNotBounceUnderChurn) {
  // Two groups swap link quality every second, so relays keep handing over.
  auto c = net(10, 5, 1.0);
  auto tr = std::make_shared<RssiTrace>();
  for (int i = 0; i < 10; ++i) {
    tr->node_names.push_back("n" + std::to_string(i));
    tr->series.emplace_back();
    for (int k = 0; k <= 60; ++k) tr->series[i].push_back({double(k), (k + i / 5) % 2 ? -85.0 : -60.0});
  }
  ChannelModel ch;
  ch.mode = ChannelMode::Trace;
  ch.trace = tr;
  for (int i = 0; i < 10; ++i) ch.trace_node.push_back(i);
  ch.neighbor_snr_db.assign(10, std::vector<double>(10, 15.0));
  SimOptions o;
  o.packets_per_node = 0;
  o.duration = 50.0;
  o.warmup = 10.0;
  const auto m = run(c, ch, SystemSpec::proposed(), o, 1);
  EXPECT_GT(m.relay_changes, 40 * 4);
  EXPECT_LT(m.relay_changes, 50 * 10);
  EXPECT_EQ(m.monitor_violations, 0);
}

TEST(Sim, BccHopMatchesModelAtLightLoad) {
  auto c = net(2, 1, 2.0);
  c.network.per_node_rate = {0.0, 2.0};
  const auto m = run(c, fixed_channel({0.0, 0.0}), SystemSpec::relay(0), budget(4000), 7);
  auto in = bcc::bcc_input_from_config(c);
  const auto s = bcc::solve_bcc(in);
  EXPECT_EQ(m.bcc_mac.lost, 0);
  EXPECT_NEAR(m.bcc_mac.mean_delay(), s.mean_delay, 0.03 * s.mean_delay);
  EXPECT_NEAR(m.bcc_mac.mean_energy(), s.mean_energy, 0.05 * s.mean_energy);
}

TEST(Sim, RfDelayTracksModelWithoutCollisions) {
  // The model's load is the arrival rate seen by each relay queue.
  auto c = net(2, 2, 50.0);
  std::vector<double> pe{0.1, 0.1};
  std::vector<LinkState> links(2, LinkState{0, 0, 0, 0.1, 100.0});
  auto in = rf::rf_input_from_config(c, links);
  in.load_direct = 50.0;
  in.load_forwarded = 0.0;
  const auto s = rf::solve_rf(in);
  SimOptions o = budget(50000);
  o.rf_collisions = false;
  o.retry = RetryPolicy::Immediate;
  const auto m = run(c, fixed_channel(pe), SystemSpec::direct(), o, 12);
  EXPECT_EQ(m.rf_collisions, 0);
  EXPECT_NEAR(m.rf_mac.mean_delay(), s.mean_delay, 0.1 * s.mean_delay);
  EXPECT_NEAR(m.rf_mac.busy_fraction(), s.pi_cca, 0.25 * s.pi_cca);
}

TEST(Sim, CollisionsOnlyAddLoss) {
  auto c = net(3, 3, 40.0);
  SimOptions o = budget(5000);
  const auto with = run(c, fixed_channel({0, 0, 0}), SystemSpec::direct(), o, 2);
  o.rf_collisions = false;
  const auto without = run(c, fixed_channel({0, 0, 0}), SystemSpec::direct(), o, 2);
  EXPECT_GT(with.rf_collisions, 0);
  EXPECT_EQ(without.rf_collisions, 0);
  EXPECT_GT(with.plr(), without.plr());
}

TEST(Sim, EventCapMarksPartial) {
  auto c = net(2, 1, 10.0);
  SimOptions o = budget(1000);
  o.max_events = 100;
  const auto m = run(c, fixed_channel({0.0, 0.0}), SystemSpec::direct(), o, 1);
  EXPECT_TRUE(m.partial);
  EXPECT_EQ(m.events, 100);
}

TEST(Sim, RejectsBadInputs) {
  auto c = net(3, 1, 1.0);
  EXPECT_THROW(run(c, fixed_channel({0.0}), SystemSpec::direct(), budget(10), 1), ScenarioError);
  EXPECT_THROW(run(c, fixed_channel({0, 0, 0}), SystemSpec::relay(5), budget(10), 1), ScenarioError);
}
