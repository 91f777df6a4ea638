#pragma once

// Single runs and parameter sweeps over run configurations, with long-format
// and aggregate CSV reports.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "wban/io/config.hpp"
#include "wban/optimizer.hpp"
#include "wban/io/trace_io.hpp"
#include "wban/sim/engine.hpp"

namespace wban::io {

inline std::string resolve_path(const std::string& path, const std::string& base_dir) {
  if (path.empty() || base_dir.empty() || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(base_dir) / path).string();
}

// The scenario is drawn from `seed`, so each seed is a different body placement.
inline sim::ChannelModel make_channel(const RunConfig& c, std::uint64_t seed, const std::string& base_dir = {}) {
  const int n = c.model.network.n_nodes;
  sim::ChannelModel ch;
  switch (c.channel) {
    case ChannelKind::Fixed:
      ch = sim::fixed_channel(c.fixed_pi_e.empty() ? std::vector<double>(n, 0.0) : c.fixed_pi_e);
      break;
    case ChannelKind::Rayleigh:
      ch = sim::rayleigh_channel(sim::body_scenario(c.scenario, n, seed));
      break;
    case ChannelKind::Trace: {
      if (c.trace_path.empty()) throw ConfigError({"channel.trace is required for trace mode"});
      auto trace = std::make_shared<const sim::RssiTrace>(load_trace(resolve_path(c.trace_path, base_dir)));
      ch.mode = sim::ChannelMode::Trace;
      if (c.trace_nodes.empty()) {
        if (static_cast<int>(trace->node_names.size()) < n) throw ScenarioError("trace covers fewer nodes than the network");
        for (int i = 0; i < n; ++i) ch.trace_node.push_back(i);
      } else {
        for (const auto& name : c.trace_nodes) {
          const int k = trace->node_index(name);
          if (k < 0) throw ScenarioError("trace has no node '" + name + "'");
          ch.trace_node.push_back(k);
        }
      }
      ch.trace = std::move(trace);
      ch.neighbor_snr_db = sim::body_scenario(c.scenario, n, seed).neighbor_snr_db;
      break;
    }
  }
  ch.neighbor_fading = c.neighbor_fading;
  return ch;
}

// Relay links for the analytic models: fixed erasures if given, otherwise
// Rayleigh-averaged at the scenario's line-of-sight SNR.
inline std::vector<LinkState> model_links(const RunConfig& c) {
  const auto& net = c.model.network;
  std::vector<LinkState> links(net.n_relays);
  for (int r = 0; r < net.n_relays; ++r) {
    links[r].node_id = r;
    links[r].snr_linear = std::pow(10.0, c.scenario.los_snr_db / 10.0);
    if (c.channel == ChannelKind::Fixed)
      links[r].pi_e = c.fixed_pi_e.empty() ? 0.0 : c.fixed_pi_e[std::min<std::size_t>(r, c.fixed_pi_e.size() - 1)];
    else
      links[r].pi_e = rf::erasure_rayleigh(links[r].snr_linear, net.payload_bits, net.ack_len_bits);
  }
  return links;
}

// Cheapest BCC duty cycle whose end-to-end delay (BCC hop plus relay RF hop)
// stays within tau; M_mp is kept.
inline Config tune_bcc(const RunConfig& c, double tau) {
  opt::BccOptProblem p;
  p.base = bcc::bcc_input_from_config(c.model);
  p.m_mp = {c.model.mac.m_mp, c.model.mac.m_mp};
  p.tau = tau;
  p.rf_delay = rf::solve_rf(rf::rf_input_from_config(c.model, model_links(c))).mean_delay;
  const auto best = opt::optimize_bcc(p).best_params;
  Config out = c.model;
  out.mac.r_s = best.r_s;
  out.mac.r_l = best.r_l;
  return out;
}

inline sim::RunMetrics run_one(const RunConfig& c, const sim::SystemSpec& sys, std::uint64_t seed,
                               const std::string& base_dir = {}) {
  validate_config(c.model);
  const Config model = c.bcc_tau > 0.0 ? tune_bcc(c, c.bcc_tau) : c.model;
  return sim::run(model, make_channel(c, seed, base_dir), sys, c.sim, seed);
}

struct Axis {
  std::string key;
  std::vector<Value> values;
};

struct SweepSpec {
  RunConfig base;
  std::string base_dir;
  std::vector<Axis> axes;
  int seeds = 10;
  std::uint64_t first_seed = 1;
  std::vector<std::string> systems{"proposed", "baseline"};
  std::map<std::string, std::string> labels;  // system name -> report label
  long max_runs = 10000;
  int threads = 0;  // 0: hardware concurrency
};

inline std::string value_text(const Value& v) {
  if (v.is_number()) return format_number(v.number());
  if (v.is_bool()) return v.boolean() ? "true" : "false";
  if (v.is_string()) return v.string();
  std::string s = "[";
  for (std::size_t i = 0; i < v.array().size(); ++i) s += (i ? " " : "") + value_text(v.array()[i]);
  return s + "]";
}

// [sweep] holds seeds/first_seed/systems/threads/max_runs/base; [axes] maps a
// setting to its value list; any other section overrides the base config.
inline SweepSpec parse_sweep(std::istream& in, const std::string& base_dir = {}) {
  SweepSpec s;
  s.base_dir = base_dir;
  const auto entries = parse_toml(in);
  for (const auto& e : entries)
    if (e.key == "sweep.base") {
      s.base = load_config(resolve_path(e.value.string(), base_dir));
      break;
    }
  for (const auto& e : entries) {
    try {
      if (e.key == "sweep.base") continue;
      if (e.key == "sweep.seeds") {
        s.seeds = detail::as_int(e.value);
      } else if (e.key == "sweep.first_seed") {
        s.first_seed = static_cast<std::uint64_t>(detail::as_int(e.value));
      } else if (e.key == "sweep.threads") {
        s.threads = detail::as_int(e.value);
      } else if (e.key == "sweep.max_runs") {
        s.max_runs = detail::as_int(e.value);
      } else if (e.key == "sweep.systems") {
        s.systems.clear();
        for (const auto& v : e.value.array()) s.systems.push_back(v.string());
      } else if (e.key.rfind("axes.", 0) == 0) {
        std::string key = e.key.substr(5);
        if (key.size() > 1 && key.front() == '"' && key.back() == '"') key = key.substr(1, key.size() - 2);
        if (!detail::setters().contains(key)) throw ConfigError({"unknown setting '" + key + "'"});
        s.axes.push_back({key, e.value.is_array() ? e.value.array() : std::vector<Value>{e.value}});
      } else {
        apply_setting(s.base, e.key, e.value);
      }
    } catch (const ConfigError& err) {
      throw ParseError(e.line, err.what());
    }
  }
  if (s.seeds < 1) throw ConfigError({"sweep.seeds must be >= 1"});
  for (const auto& sys : s.systems) system_from_name(sys);
  return s;
}

inline SweepSpec load_sweep(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("IO", "cannot open " + path);
  return parse_sweep(f, std::filesystem::path(path).parent_path().string());
}

struct RunRecord {
  std::size_t point = 0;
  std::vector<std::string> point_values;
  std::string system;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  sim::RunMetrics metrics;
};

struct SweepResult {
  std::vector<std::string> axis_names;
  std::size_t points = 0;
  std::vector<RunRecord> runs;  // point-major, then system, then seed
  long failed() const {
    return std::count_if(runs.begin(), runs.end(), [](const RunRecord& r) { return !r.ok; });
  }
};

inline std::size_t point_count(const SweepSpec& s) {
  std::size_t p = 1;
  for (const auto& a : s.axes) p *= a.values.size();
  return p;
}

inline SweepResult run_sweep(const SweepSpec& s) {
  const std::size_t points = point_count(s);
  const std::size_t total = points * s.systems.size() * static_cast<std::size_t>(s.seeds);
  if (total == 0) throw ConfigError({"sweep has no runs"});
  if (static_cast<long>(total) > s.max_runs)
    throw ConfigError({"sweep has " + std::to_string(total) + " runs, cap is " + std::to_string(s.max_runs)});

  SweepResult out;
  out.points = points;
  for (const auto& a : s.axes) out.axis_names.push_back(a.key);
  out.runs.resize(total);

  std::vector<RunConfig> configs(points, s.base);
  std::vector<std::vector<std::string>> texts(points);
  for (std::size_t p = 0; p < points; ++p) {
    std::size_t rem = p;
    std::vector<std::size_t> idx(s.axes.size());
    for (std::size_t k = s.axes.size(); k-- > 0;) {
      idx[k] = rem % s.axes[k].values.size();
      rem /= s.axes[k].values.size();
    }
    for (std::size_t k = 0; k < s.axes.size(); ++k) {
      const auto& v = s.axes[k].values[idx[k]];
      apply_setting(configs[p], s.axes[k].key, v);
      texts[p].push_back(value_text(v));
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < total;) {
      auto& r = out.runs[i];
      const std::size_t p = i / (s.systems.size() * s.seeds);
      const std::size_t sys = (i / s.seeds) % s.systems.size();
      r.point = p;
      r.point_values = texts[p];
      r.system = s.systems[sys];
      r.seed = s.first_seed + i % s.seeds;
      try {
        auto spec = system_from_name(r.system);
        r.metrics = run_one(configs[p], spec, r.seed, s.base_dir);
        r.metrics.debug_lines.clear();
        for (auto& n : r.metrics.nodes) n.delays.clear();
        r.ok = !r.metrics.partial;
        if (!r.ok) r.error = "PARTIAL";
      } catch (const Error& e) {
        r.error = e.code();
      }
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t n_threads = std::min<std::size_t>(total, s.threads > 0 ? s.threads : hw);
  std::vector<std::jthread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  return out;
}

inline std::string label_of(const SweepSpec& s, const std::string& system) {
  const auto it = s.labels.find(system);
  return it == s.labels.end() ? system : it->second;
}

inline void write_long_csv(std::ostream& os, const SweepSpec& s, const SweepResult& r) {
  for (const auto& a : r.axis_names) os << a << ',';
  os << "system,seed,status," << sim::metrics_csv_header() << '\n';
  for (const auto& run : r.runs) {
    for (const auto& v : run.point_values) os << v << ',';
    os << label_of(s, run.system) << ',' << run.seed << ',' << (run.ok ? "ok" : run.error) << ',';
    if (run.ok || run.error == "PARTIAL") {
      sim::write_metrics_row(os, run.metrics);
    } else {
      os << std::string(23, ',');
    }
    os << '\n';
  }
}

struct Quartiles {
  double median = 0.0, q1 = 0.0, q3 = 0.0;
};

inline Quartiles quartiles(const std::vector<double>& v) {
  return {sim::percentile(v, 0.5), sim::percentile(v, 0.25), sim::percentile(v, 0.75)};
}

inline const char* aggregate_csv_header() {
  return "system,runs,failed,energy_per_packet_median,energy_per_packet_q1,energy_per_packet_q3,"
         "mean_delay_median,mean_delay_q1,mean_delay_q3,plr_median,plr_q1,plr_q3";
}

// Per point: one row per system, then one `proposed/baseline` row whose
// columns are the quartiles of the per-seed ratios (PLR columns left empty).
inline void write_aggregate_csv(std::ostream& os, const SweepSpec& s, const SweepResult& r) {
  for (const auto& a : r.axis_names) os << a << ',';
  os << aggregate_csv_header() << '\n';
  const auto n = format_number;
  auto write_q = [&](const Quartiles& q) { os << ',' << n(q.median) << ',' << n(q.q1) << ',' << n(q.q3); };
  const std::size_t per_point = s.systems.size() * s.seeds;
  for (std::size_t p = 0; p < r.points; ++p) {
    const auto* first = &r.runs[p * per_point];
    auto prefix = [&] {
      for (const auto& v : first->point_values) os << v << ',';
    };
    std::map<std::string, std::map<std::uint64_t, const sim::RunMetrics*>> by_system;
    for (std::size_t sys = 0; sys < s.systems.size(); ++sys) {
      std::vector<double> e, d, l;
      long failed = 0;
      for (int k = 0; k < s.seeds; ++k) {
        const auto& run = r.runs[p * per_point + sys * s.seeds + k];
        if (!run.ok) {
          ++failed;
          continue;
        }
        e.push_back(run.metrics.energy_per_packet());
        d.push_back(run.metrics.mean_delay);
        l.push_back(run.metrics.plr());
        by_system[s.systems[sys]][run.seed] = &run.metrics;
      }
      prefix();
      os << label_of(s, s.systems[sys]) << ',' << e.size() << ',' << failed;
      write_q(quartiles(e));
      write_q(quartiles(d));
      write_q(quartiles(l));
      os << '\n';
    }
    if (by_system.contains("proposed") && by_system.contains("baseline")) {
      std::vector<double> er, dr;
      for (const auto& [seed, prop] : by_system["proposed"]) {
        const auto it = by_system["baseline"].find(seed);
        if (it == by_system["baseline"].end()) continue;
        er.push_back(prop->energy_per_packet() / it->second->energy_per_packet());
        dr.push_back(prop->mean_delay / it->second->mean_delay);
      }
      prefix();
      os << label_of(s, "proposed") << '/' << label_of(s, "baseline") << ',' << er.size() << ','
         << s.seeds - static_cast<long>(er.size());
      write_q(quartiles(er));
      write_q(quartiles(dr));
      os << ",,,\n";
    }
  }
}

}  // namespace wban::io
