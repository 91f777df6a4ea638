#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "wban/io/config.hpp"
#include "wban/io/experiment.hpp"
#include "wban/io/toml_lite.hpp"
#include "wban/io/synth_trace.hpp"
#include "wban/io/trace_io.hpp"

using namespace wban;
using namespace wban::io;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::vector<std::string> lines(const std::string& s) {
  auto out = split(s, '\n');
  if (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

sim::RssiTrace trace_of(const std::string& text) {
  std::istringstream in(text);
  return parse_trace(in);
}

SweepSpec small_sweep() {
  SweepSpec s;
  s.base.model.network.n_nodes = 3;
  s.base.model.network.n_relays = 1;
  s.base.model.network.per_node_rate.assign(3, 5.0);
  s.base.sim.packets_per_node = 60;
  s.axes.push_back({"network.load_fraction", {Value{0.05}, Value{0.2}}});
  s.seeds = 2;
  s.threads = 2;
  return s;
}

}  // namespace

TEST(Toml, SectionsArraysAndComments) {
  std::istringstream in(R"(# header
top = 1
[a.b]
x = 2.5e-3   # trailing
flag = true
name = "say \"hi\" # not a comment"
list = [1, 2,
        3,]
nested = [[1, 2], [3]]
)");
  const auto e = parse_toml(in);
  ASSERT_EQ(e.size(), 6u);
  EXPECT_EQ(e[0].key, "top");
  EXPECT_EQ(e[1].key, "a.b.x");
  EXPECT_DOUBLE_EQ(e[1].value.number(), 2.5e-3);
  EXPECT_TRUE(e[2].value.boolean());
  EXPECT_EQ(e[3].value.string(), "say \"hi\" # not a comment");
  EXPECT_EQ(e[4].value.numbers(), (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(e[4].line, 7u);
  EXPECT_EQ(e[5].value.array()[0].numbers(), (std::vector<double>{1, 2}));
}

TEST(Toml, ErrorsCarryLineNumbers) {
  std::istringstream in("a = 1\n\nb = 1x\n");
  try {
    parse_toml(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  std::istringstream bad_section("[oops\n");
  EXPECT_THROW(parse_toml(bad_section), ParseError);
}

TEST(Toml, NumberFormattingRoundTrips) {
  for (double x : {0.1, 1.0 / 3.0, 2.5e-300, -7.25, 1e22, 0.0})
    EXPECT_EQ(parse_value(format_number(x)).number(), x);
  EXPECT_TRUE(std::isinf(parse_value("-inf").number()));
}

TEST(Config, RoundTripPreservesEveryField) {
  RunConfig c;
  c.model.network.n_nodes = 5;
  c.model.network.n_relays = 2;
  c.model.network.per_node_rate = {1.0 / 3.0, 2, 3, 4, 5.5};
  c.model.network.noise_floor_dbm = -97.3;
  c.model.rf_timing.t_cca = 0.128e-3;
  c.model.bcc_timing.t_pream = 7.1e-3;
  c.model.rf_power.p_tx = 0.0354599999;
  c.model.bcc_power.p_sleep = 1.3e-5;
  c.model.mac = {7, 2, 4, 6, 3.3e-3, 0.7e-3, 8};
  c.sim.duration = 12.5;
  c.sim.retry = sim::RetryPolicy::Immediate;
  c.sim.extended_energy = true;
  c.sim.metric = proto::MetricMode::Combined;
  c.sim.better = proto::BetterMode::Either;
  c.scenario.kind = sim::ScenarioKind::Custom;
  c.scenario.gateway_snr_db = {20, 5, -std::numeric_limits<double>::infinity(), 3, 1};
  c.scenario.neighbor_matrix_db.assign(5, std::vector<double>(5, 12.0));
  c.channel = ChannelKind::Trace;
  c.trace_path = "traces/x.csv";
  c.trace_nodes = {"torso", "pocket", "a", "b", "c"};
  c.system = "relay-1";

  const std::string text = to_toml(c);
  std::istringstream in(text);
  const RunConfig back = parse_config(in);
  EXPECT_EQ(to_toml(back), text);
  EXPECT_EQ(back.model.network.per_node_rate, c.model.network.per_node_rate);
  EXPECT_EQ(back.model.rf_power.p_tx, c.model.rf_power.p_tx);
  EXPECT_EQ(back.model.mac.r_s, c.model.mac.r_s);
  EXPECT_EQ(back.model.mac.be_max, 8);
  EXPECT_EQ(back.scenario.gateway_snr_db[2], c.scenario.gateway_snr_db[2]);
  EXPECT_EQ(back.trace_nodes, c.trace_nodes);
  EXPECT_EQ(back.sim.better, proto::BetterMode::Either);
}

TEST(Config, DefaultsRoundTrip) {
  std::istringstream in(to_toml(RunConfig{}));
  const auto back = parse_config(in);
  const auto d = default_config();
  EXPECT_EQ(back.model.rf_power.p_rx, d.rf_power.p_rx);
  EXPECT_EQ(back.model.rf_timing.t_data, d.rf_timing.t_data);
  EXPECT_EQ(back.model.bcc_timing.t_slot, d.bcc_timing.t_slot);
}

TEST(Config, SettingsAndErrors) {
  RunConfig c;
  apply_setting(c, "network.n_nodes", "4");
  apply_setting(c, "network.load_fraction", "0.4");
  EXPECT_EQ(c.model.network.per_node_rate.size(), 4u);
  EXPECT_NEAR(c.model.network.per_node_rate[0], 0.4 * 312.5 / 4, 1e-12);
  apply_setting(c, "scenario.snr_db", "25");
  EXPECT_EQ(c.scenario.los_snr_db, 25.0);
  EXPECT_EQ(c.scenario.nlos_snr_db, 10.0);
  apply_setting(c, "network.supply_voltage", "3");
  EXPECT_NEAR(c.model.rf_power.p_tx, 19.7e-3 * 3, 1e-15);
  EXPECT_THROW(apply_setting(c, "network.nope", "1"), ConfigError);
  EXPECT_THROW(apply_setting(c, "mac.m_r", "2.5"), ConfigError);
  EXPECT_THROW(apply_setting(c, "protocol.metric", "\"speed\""), ConfigError);
  std::istringstream in("[mac]\nm_r = 3\nm_c = \"x\"\n");
  try {
    parse_config(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(system_from_name("relay-x"), ConfigError);
  EXPECT_EQ(system_from_name("relay-3").fixed_relay, 3);
}

TEST(Trace, SingleSample) {
  const auto t = trace_of("0.0,torso,-55.2\n");
  ASSERT_EQ(t.node_names, std::vector<std::string>{"torso"});
  ASSERT_EQ(t.series[0].size(), 1u);
  EXPECT_DOUBLE_EQ(t.series[0][0].rssi_dbm, -55.2);
}

TEST(Trace, OutOfOrderIsParseErrorWithLine) {
  try {
    trace_of("# c\ntime_s,node_id,rssi_dbm\n1,a,-50\n0.5,b,-60\n0.5,a,-55\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 5u);
  }
  EXPECT_THROW(trace_of("1,a\n"), ParseError);
  EXPECT_THROW(trace_of("x,a,-50\n"), ParseError);
}

TEST(Trace, EmptyTraceRejected) {
  EXPECT_THROW(trace_of("# nothing\n\n"), EmptyTrace);
  EXPECT_THROW(trace_of("time_s,node_id,rssi_dbm\n"), EmptyTrace);
}

TEST(Trace, GapHoldsLastObservation) {
  const auto t = trace_of("0,a,-50\n2,a,-70\n");
  EXPECT_EQ(t.rssi_at(0, 1.0), -50.0);
  EXPECT_EQ(t.rssi_at(0, 1.999), -50.0);
  EXPECT_EQ(t.rssi_at(0, 2.0), -70.0);
  EXPECT_EQ(t.rssi_at(0, 50.0), -70.0);
  EXPECT_EQ(t.rssi_at(0, -1.0), -50.0);
}

TEST(Trace, RoundTripReproducesSamples) {
  const std::string src = "# x\n0,torso,-55.2\n0,pocket,-80.125\n0.1,torso,-56\n0.25,pocket,-81.3333333333\n";
  const auto t = trace_of(src);
  std::ostringstream out;
  write_trace(out, t);
  const auto back = trace_of(out.str());
  ASSERT_EQ(back.node_names, t.node_names);
  for (std::size_t k = 0; k < t.series.size(); ++k) {
    ASSERT_EQ(back.series[k].size(), t.series[k].size());
    for (std::size_t i = 0; i < t.series[k].size(); ++i) {
      EXPECT_EQ(back.series[k][i].time_s, t.series[k][i].time_s);
      EXPECT_EQ(back.series[k][i].rssi_dbm, t.series[k][i].rssi_dbm);
    }
  }
  std::ostringstream again;
  write_trace(again, back);
  EXPECT_EQ(again.str(), out.str());
  EXPECT_EQ(lines(out.str())[1], "0,torso,-55.2");
}

TEST(Sweep, CountsRowsAndRatioRows) {
  const auto s = small_sweep();
  const auto r = run_sweep(s);
  EXPECT_EQ(r.failed(), 0);
  std::ostringstream lg, ag;
  write_long_csv(lg, s, r);
  write_aggregate_csv(ag, s, r);
  const auto long_rows = lines(lg.str());
  EXPECT_EQ(long_rows.size(), 1u + 8u);
  int ratio_rows = 0;
  for (const auto& l : lines(ag.str())) ratio_rows += l.find("proposed/baseline") != std::string::npos;
  EXPECT_EQ(ratio_rows, 2);
  const auto header = split(long_rows[0], ',');
  for (std::size_t i = 1; i < long_rows.size(); ++i) EXPECT_EQ(split(long_rows[i], ',').size(), header.size());
}

TEST(Sweep, ByteIdenticalAcrossRunsAndThreadCounts) {
  auto s = small_sweep();
  auto render = [](const SweepSpec& spec) {
    const auto r = run_sweep(spec);
    std::ostringstream lg, ag;
    write_long_csv(lg, spec, r);
    write_aggregate_csv(ag, spec, r);
    return lg.str() + ag.str();
  };
  const auto a = render(s);
  EXPECT_EQ(a, render(s));
  s.threads = 1;
  EXPECT_EQ(a, render(s));
}

TEST(Sweep, AggregateRecomputableFromLongCsv) {
  const auto s = small_sweep();
  const auto r = run_sweep(s);
  std::ostringstream lg, ag;
  write_long_csv(lg, s, r);
  write_aggregate_csv(ag, s, r);
  const auto lrows = lines(lg.str());
  const auto head = split(lrows[0], ',');
  auto col = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(head.begin(), head.end(), name) - head.begin());
  };
  std::map<std::pair<std::string, std::string>, std::vector<double>> energy;
  std::map<std::pair<std::string, std::string>, std::map<std::string, double>> by_seed;
  for (std::size_t i = 1; i < lrows.size(); ++i) {
    const auto f = split(lrows[i], ',');
    const double e = std::stod(f[col("energy_per_packet_j")]);
    energy[{f[0], f[col("system")]}].push_back(e);
    by_seed[{f[0], f[col("system")]}][f[col("seed")]] = e;
  }
  const auto arows = lines(ag.str());
  const auto ahead = split(arows[0], ',');
  const auto med = static_cast<std::size_t>(std::find(ahead.begin(), ahead.end(), "energy_per_packet_median") -
                                            ahead.begin());
  int checked = 0;
  for (std::size_t i = 1; i < arows.size(); ++i) {
    const auto f = split(arows[i], ',');
    const double got = std::stod(f[med]);
    if (f[1] == "proposed/baseline") {
      std::vector<double> ratios;
      for (const auto& [seed, e] : by_seed[{f[0], "proposed"}]) ratios.push_back(e / by_seed[{f[0], "baseline"}][seed]);
      EXPECT_NEAR(got, sim::percentile(ratios, 0.5), 1e-9 * std::abs(got));
    } else {
      EXPECT_NEAR(got, sim::percentile(energy[{f[0], f[1]}], 0.5), 1e-9 * std::abs(got));
    }
    ++checked;
  }
  EXPECT_EQ(checked, 6);
}

TEST(Sweep, RunCapAndFailures) {
  auto s = small_sweep();
  s.max_runs = 7;
  EXPECT_THROW(run_sweep(s), ConfigError);
  s = small_sweep();
  s.systems = {"relay-9"};
  const auto r = run_sweep(s);
  EXPECT_EQ(r.failed(), 4);
  EXPECT_EQ(r.runs[0].error, "SCENARIO");
}

TEST(Sweep, ParsesSpecFile) {
  std::istringstream in(R"([sweep]
seeds = 3
systems = ["proposed", "direct"]
[axes]
"mac.m_r" = [1, 2, 3]
"network.est_period" = [1, 5]
[network]
n_nodes = 2
n_relays = 1
)");
  const auto s = parse_sweep(in);
  EXPECT_EQ(s.seeds, 3);
  ASSERT_EQ(s.axes.size(), 2u);
  EXPECT_EQ(s.axes[0].key, "mac.m_r");
  EXPECT_EQ(point_count(s), 6u);
  EXPECT_EQ(s.base.model.network.n_nodes, 2);
  std::istringstream bad("[axes]\n\"mac.nope\" = [1]\n");
  EXPECT_THROW(parse_sweep(bad), ParseError);
}

TEST(SynthTrace, DeterministicAndShaped) {
  const WalkTraceParams p;
  const auto a = walk_trace(p, 1), b = walk_trace(p, 1), c = walk_trace(p, 2);
  std::ostringstream sa, sb, sc;
  write_trace(sa, a);
  write_trace(sb, b);
  write_trace(sc, c);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_NE(sa.str(), sc.str());

  ASSERT_EQ(a.node_names, (std::vector<std::string>{"torso", "pocket"}));
  ASSERT_EQ(a.series[0].size(), 451u);
  // Loudest near the pass; torso is the stronger node before it and far weaker after.
  const double t_pass = p.start_distance / p.closing_speed;
  const double peak = a.rssi_at(0, t_pass);
  EXPECT_GT(peak, a.rssi_at(0, 1.0) + 15.0);
  double before = 0, after = 0;
  int nb = 0, na = 0;
  for (std::size_t k = 0; k < a.series[0].size(); ++k) {
    const double t = a.series[0][k].time_s, diff = a.series[0][k].rssi_dbm - a.series[1][k].rssi_dbm;
    if (t < t_pass - 2) before += diff, ++nb;
    if (t > t_pass + p.shadow_ramp_s + 2) after += diff, ++na;
  }
  EXPECT_GT(before / nb, 8.0);
  EXPECT_LT(after / na, -4.0);

  std::istringstream in(sa.str());
  const auto back = parse_trace(in);
  EXPECT_EQ(back.series[1].size(), a.series[1].size());
  EXPECT_EQ(back.series[1].back().rssi_dbm, a.series[1].back().rssi_dbm);
}
