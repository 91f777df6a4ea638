#pragma once

// Run configuration: the model parameters plus simulation, scenario, channel
// and protocol settings, read from and written to the TOML subset.

#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "wban/core.hpp"
#include "wban/io/toml_lite.hpp"
#include "wban/sim/engine.hpp"
#include "wban/sim/scenario.hpp"

namespace wban::io {

enum class ChannelKind { Rayleigh, Fixed, Trace };

struct RunConfig {
  Config model = default_config();
  sim::SimOptions sim;
  sim::ScenarioParams scenario;
  ChannelKind channel = ChannelKind::Rayleigh;
  std::vector<double> fixed_pi_e;        // Fixed: one per node
  std::string trace_path;                // Trace: CSV file
  std::vector<std::string> trace_nodes;  // Trace: trace node name per network node
  bool neighbor_fading = true;
  std::string system = "proposed";  // proposed | baseline | direct | relay-K
  double bcc_tau = 0.0;             // > 0: BCC duty cycle tuned for this delay bound
};

namespace detail {

using Setter = std::function<void(RunConfig&, const Value&)>;

inline int as_int(const Value& v) {
  const double x = v.number();
  if (x != static_cast<double>(static_cast<long long>(x))) throw ConfigError({"expected an integer"});
  return static_cast<int>(x);
}

template <class E>
E as_enum(const Value& v, std::initializer_list<std::pair<const char*, E>> names) {
  for (const auto& [n, e] : names)
    if (v.string() == n) return e;
  throw ConfigError({"unknown option '" + v.string() + "'"});
}

inline void add_timing(std::map<std::string, Setter>& m, const std::string& prefix, TimingParams Config::*t) {
  const std::pair<const char*, double TimingParams::*> f[] = {
      {"t_slot", &TimingParams::t_slot}, {"t_cca", &TimingParams::t_cca}, {"t_data", &TimingParams::t_data},
      {"t_ack", &TimingParams::t_ack},   {"t_att", &TimingParams::t_att}, {"t_rtr", &TimingParams::t_rtr},
      {"t_pream", &TimingParams::t_pream}};
  for (const auto& [name, field] : f)
    m[prefix + name] = [t, field](RunConfig& c, const Value& v) { (c.model.*t).*field = v.number(); };
}

inline void add_power(std::map<std::string, Setter>& m, const std::string& prefix, PowerProfile Config::*p) {
  const std::pair<const char*, double PowerProfile::*> f[] = {{"p_act", &PowerProfile::p_act},
                                                               {"p_cca", &PowerProfile::p_cca},
                                                               {"p_tx", &PowerProfile::p_tx},
                                                               {"p_rx", &PowerProfile::p_rx},
                                                               {"p_sleep", &PowerProfile::p_sleep}};
  for (const auto& [name, field] : f)
    m[prefix + name] = [p, field](RunConfig& c, const Value& v) { (c.model.*p).*field = v.number(); };
}

inline const std::map<std::string, Setter>& setters() {
  static const auto table = [] {
    std::map<std::string, Setter> m;
    auto num = [&](const std::string& key, auto get) {
      m[key] = [get](RunConfig& c, const Value& v) { get(c) = v.number(); };
    };
    auto integer = [&](const std::string& key, auto get) {
      m[key] = [get](RunConfig& c, const Value& v) { get(c) = as_int(v); };
    };
    auto flag = [&](const std::string& key, auto get) {
      m[key] = [get](RunConfig& c, const Value& v) { get(c) = v.boolean(); };
    };

    // network
    m["network.n_nodes"] = [](RunConfig& c, const Value& v) {
      const int n = as_int(v);
      c.model.network.n_nodes = n;
      if (!c.model.network.per_node_rate.empty() && static_cast<int>(c.model.network.per_node_rate.size()) != n)
        c.model.network.per_node_rate.assign(n, c.model.network.per_node_rate.front());
    };
    integer("network.n_relays", [](RunConfig& c) -> int& { return c.model.network.n_relays; });
    // A scalar applies to every node.
    m["network.per_node_rate"] = [](RunConfig& c, const Value& v) {
      if (v.is_number())
        c.model.network.per_node_rate.assign(c.model.network.n_nodes, v.number());
      else
        c.model.network.per_node_rate = v.numbers();
    };
    // Network-wide load in pkt/s, split evenly.
    m["network.total_rate"] = [](RunConfig& c, const Value& v) {
      const int n = c.model.network.n_nodes;
      c.model.network.per_node_rate.assign(n, v.number() / n);
    };
    // Network-wide load as a fraction of the PHY-limited rate.
    m["network.load_fraction"] = [](RunConfig& c, const Value& v) {
      const int n = c.model.network.n_nodes;
      c.model.network.per_node_rate.assign(n, v.number() * max_rf_load(c.model.network) / n);
    };
    num("network.payload_bits", [](RunConfig& c) -> double& { return c.model.network.payload_bits; });
    num("network.est_period", [](RunConfig& c) -> double& { return c.model.network.est_period; });
    num("network.status_len_bits", [](RunConfig& c) -> double& { return c.model.network.status_len_bits; });
    num("network.ack_len_bits", [](RunConfig& c) -> double& { return c.model.network.ack_len_bits; });
    num("network.noise_floor_dbm", [](RunConfig& c) -> double& { return c.model.network.noise_floor_dbm; });
    m["network.supply_voltage"] = [](RunConfig& c, const Value& v) {
      c.model.network.supply_voltage = v.number();
      c.model.rf_power = cc2420_power(v.number());
    };
    num("network.initial_energy", [](RunConfig& c) -> double& { return c.model.network.initial_energy; });
    num("network.rf_phy_rate_bps", [](RunConfig& c) -> double& { return c.model.network.rf_phy_rate_bps; });

    add_timing(m, "rf.timing.", &Config::rf_timing);
    add_timing(m, "bcc.timing.", &Config::bcc_timing);
    add_power(m, "rf.power.", &Config::rf_power);
    add_power(m, "bcc.power.", &Config::bcc_power);

    integer("mac.m_r", [](RunConfig& c) -> int& { return c.model.mac.m_r; });
    integer("mac.m_c", [](RunConfig& c) -> int& { return c.model.mac.m_c; });
    integer("mac.m_mp", [](RunConfig& c) -> int& { return c.model.mac.m_mp; });
    integer("mac.be_min", [](RunConfig& c) -> int& { return c.model.mac.be_min; });
    integer("mac.be_max", [](RunConfig& c) -> int& { return c.model.mac.be_max; });
    num("mac.r_s", [](RunConfig& c) -> double& { return c.model.mac.r_s; });
    num("mac.r_l", [](RunConfig& c) -> double& { return c.model.mac.r_l; });

    num("sim.duration", [](RunConfig& c) -> double& { return c.sim.duration; });
    m["sim.packets_per_node"] = [](RunConfig& c, const Value& v) { c.sim.packets_per_node = as_int(v); };
    num("sim.warmup", [](RunConfig& c) -> double& { return c.sim.warmup; });
    m["sim.max_events"] = [](RunConfig& c, const Value& v) { c.sim.max_events = static_cast<long long>(v.number()); };
    m["sim.retry"] = [](RunConfig& c, const Value& v) {
      c.sim.retry = as_enum<sim::RetryPolicy>(
          v, {{"recontend", sim::RetryPolicy::Recontend}, {"immediate", sim::RetryPolicy::Immediate}});
    };
    flag("sim.rf_collisions", [](RunConfig& c) -> bool& { return c.sim.rf_collisions; });
    integer("sim.bcc_max_retx", [](RunConfig& c) -> int& { return c.sim.bcc_max_retx; });
    num("sim.probe_bits", [](RunConfig& c) -> double& { return c.sim.probe_bits; });
    num("sim.blocked_threshold", [](RunConfig& c) -> double& { return c.sim.blocked_threshold; });
    flag("sim.record_debug", [](RunConfig& c) -> bool& { return c.sim.record_debug; });
    m["sim.system"] = [](RunConfig& c, const Value& v) { c.system = v.string(); };

    flag("energy.extended", [](RunConfig& c) -> bool& { return c.sim.extended_energy; });
    num("energy.per_power_cycle", [](RunConfig& c) -> double& { return c.sim.energy_per_power_cycle; });
    num("energy.per_protocol_call", [](RunConfig& c) -> double& { return c.sim.energy_per_protocol_call; });

    m["protocol.metric"] = [](RunConfig& c, const Value& v) {
      c.sim.metric = as_enum<proto::MetricMode>(v, {{"energy", proto::MetricMode::Energy},
                                                    {"delay", proto::MetricMode::Delay},
                                                    {"combined", proto::MetricMode::Combined}});
    };
    num("protocol.bcc_tau", [](RunConfig& c) -> double& { return c.bcc_tau; });
    m["protocol.better"] = [](RunConfig& c, const Value& v) {
      c.sim.better = as_enum<proto::BetterMode>(
          v, {{"delay", proto::BetterMode::DelayOnly}, {"either", proto::BetterMode::Either}});
    };

    m["scenario.kind"] = [](RunConfig& c, const Value& v) {
      c.scenario.kind = as_enum<sim::ScenarioKind>(v, {{"scenario1", sim::ScenarioKind::Scenario1},
                                                       {"scenario2", sim::ScenarioKind::Scenario2},
                                                       {"custom", sim::ScenarioKind::Custom}});
    };
    num("scenario.los_snr_db", [](RunConfig& c) -> double& { return c.scenario.los_snr_db; });
    num("scenario.nlos_snr_db", [](RunConfig& c) -> double& { return c.scenario.nlos_snr_db; });
    num("scenario.neighbor_snr_db", [](RunConfig& c) -> double& { return c.scenario.neighbor_snr_db; });
    num("scenario.min_los_fraction", [](RunConfig& c) -> double& { return c.scenario.min_los_fraction; });
    // NLOS mean SNR tracks LOS with a fixed offset (dB).
    m["scenario.snr_db"] = [](RunConfig& c, const Value& v) {
      const double gap = c.scenario.los_snr_db - c.scenario.nlos_snr_db;
      c.scenario.los_snr_db = v.number();
      c.scenario.nlos_snr_db = v.number() - gap;
    };
    m["scenario.gateway_snr_db"] = [](RunConfig& c, const Value& v) { c.scenario.gateway_snr_db = v.numbers(); };
    m["scenario.neighbor_matrix_db"] = [](RunConfig& c, const Value& v) {
      c.scenario.neighbor_matrix_db.clear();
      for (const auto& row : v.array()) c.scenario.neighbor_matrix_db.push_back(row.numbers());
    };

    m["channel.mode"] = [](RunConfig& c, const Value& v) {
      c.channel = as_enum<ChannelKind>(
          v, {{"rayleigh", ChannelKind::Rayleigh}, {"fixed", ChannelKind::Fixed}, {"trace", ChannelKind::Trace}});
    };
    m["channel.pi_e"] = [](RunConfig& c, const Value& v) {
      if (v.is_number())
        c.fixed_pi_e.assign(c.model.network.n_nodes, v.number());
      else
        c.fixed_pi_e = v.numbers();
    };
    m["channel.trace"] = [](RunConfig& c, const Value& v) { c.trace_path = v.string(); };
    m["channel.trace_nodes"] = [](RunConfig& c, const Value& v) {
      c.trace_nodes.clear();
      for (const auto& x : v.array()) c.trace_nodes.push_back(x.string());
    };
    flag("channel.neighbor_fading", [](RunConfig& c) -> bool& { return c.neighbor_fading; });
    return m;
  }();
  return table;
}

}  // namespace detail

inline std::vector<std::string> setting_keys() {
  std::vector<std::string> k;
  for (const auto& [name, _] : detail::setters()) k.push_back(name);
  return k;
}

inline void apply_setting(RunConfig& c, const std::string& key, const Value& v) {
  const auto& t = detail::setters();
  const auto it = t.find(key);
  if (it == t.end()) throw ConfigError({"unknown setting '" + key + "'"});
  try {
    it->second(c, v);
  } catch (const ConfigError& e) {
    throw ConfigError({key + ": " + e.what()});
  }
}

inline void apply_setting(RunConfig& c, const std::string& key, const std::string& text) {
  apply_setting(c, key, parse_value(text));
}

inline RunConfig parse_config(std::istream& in, RunConfig base = {}) {
  for (const auto& e : parse_toml(in)) {
    try {
      apply_setting(base, e.key, e.value);
    } catch (const ConfigError& err) {
      throw ParseError(e.line, err.what());
    }
  }
  return base;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("IO", "cannot open " + path);
  return parse_config(f);
}

inline void write_config(std::ostream& os, const RunConfig& c) {
  const auto n = format_number;
  auto list = [&](const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + n(v[i]);
    return s + "]";
  };
  auto quoted = [](const std::string& s) {
    std::string out = "\"";
    for (char ch : s) {
      if (ch == '"' || ch == '\\') out += '\\';
      out += ch;
    }
    return out + "\"";
  };
  const auto& m = c.model;
  os << "[network]\n"
     << "n_nodes = " << m.network.n_nodes << "\n"
     << "n_relays = " << m.network.n_relays << "\n"
     << "supply_voltage = " << n(m.network.supply_voltage) << "\n"
     << "per_node_rate = " << list(m.network.per_node_rate) << "\n"
     << "payload_bits = " << n(m.network.payload_bits) << "\n"
     << "est_period = " << n(m.network.est_period) << "\n"
     << "status_len_bits = " << n(m.network.status_len_bits) << "\n"
     << "ack_len_bits = " << n(m.network.ack_len_bits) << "\n"
     << "noise_floor_dbm = " << n(m.network.noise_floor_dbm) << "\n"
     << "initial_energy = " << n(m.network.initial_energy) << "\n"
     << "rf_phy_rate_bps = " << n(m.network.rf_phy_rate_bps) << "\n";
  auto timing = [&](const char* sec, const TimingParams& t) {
    os << "\n[" << sec << "]\n"
       << "t_slot = " << n(t.t_slot) << "\nt_cca = " << n(t.t_cca) << "\nt_data = " << n(t.t_data)
       << "\nt_ack = " << n(t.t_ack) << "\nt_att = " << n(t.t_att) << "\nt_rtr = " << n(t.t_rtr)
       << "\nt_pream = " << n(t.t_pream) << "\n";
  };
  auto power = [&](const char* sec, const PowerProfile& p) {
    os << "\n[" << sec << "]\n"
       << "p_act = " << n(p.p_act) << "\np_cca = " << n(p.p_cca) << "\np_tx = " << n(p.p_tx)
       << "\np_rx = " << n(p.p_rx) << "\np_sleep = " << n(p.p_sleep) << "\n";
  };
  timing("rf.timing", m.rf_timing);
  timing("bcc.timing", m.bcc_timing);
  power("rf.power", m.rf_power);
  power("bcc.power", m.bcc_power);
  os << "\n[mac]\n"
     << "m_r = " << m.mac.m_r << "\nm_c = " << m.mac.m_c << "\nm_mp = " << m.mac.m_mp
     << "\nbe_min = " << m.mac.be_min << "\nbe_max = " << m.mac.be_max << "\nr_s = " << n(m.mac.r_s)
     << "\nr_l = " << n(m.mac.r_l) << "\n";

  const auto& s = c.sim;
  os << "\n[sim]\n"
     << "system = " << quoted(c.system) << "\nduration = " << n(s.duration)
     << "\npackets_per_node = " << s.packets_per_node << "\nwarmup = " << n(s.warmup)
     << "\nmax_events = " << s.max_events
     << "\nretry = " << (s.retry == sim::RetryPolicy::Recontend ? "\"recontend\"" : "\"immediate\"")
     << "\nrf_collisions = " << (s.rf_collisions ? "true" : "false") << "\nbcc_max_retx = " << s.bcc_max_retx
     << "\nprobe_bits = " << n(s.probe_bits) << "\nblocked_threshold = " << n(s.blocked_threshold)
     << "\nrecord_debug = " << (s.record_debug ? "true" : "false") << "\n";
  os << "\n[energy]\n"
     << "extended = " << (s.extended_energy ? "true" : "false")
     << "\nper_power_cycle = " << n(s.energy_per_power_cycle)
     << "\nper_protocol_call = " << n(s.energy_per_protocol_call) << "\n";
  const char* metric = s.metric == proto::MetricMode::Energy  ? "energy"
                       : s.metric == proto::MetricMode::Delay ? "delay"
                                                              : "combined";
  os << "\n[protocol]\n"
     << "metric = \"" << metric << "\"\nbetter = \""
     << (s.better == proto::BetterMode::DelayOnly ? "delay" : "either") << "\"\nbcc_tau = " << n(c.bcc_tau)
     << "\n";

  const auto& sc = c.scenario;
  os << "\n[scenario]\n"
     << "kind = \"" << sim::to_string(sc.kind) << "\"\nlos_snr_db = " << n(sc.los_snr_db)
     << "\nnlos_snr_db = " << n(sc.nlos_snr_db) << "\nneighbor_snr_db = " << n(sc.neighbor_snr_db)
     << "\nmin_los_fraction = " << n(sc.min_los_fraction) << "\n";
  if (!sc.gateway_snr_db.empty()) os << "gateway_snr_db = " << list(sc.gateway_snr_db) << "\n";
  if (!sc.neighbor_matrix_db.empty()) {
    os << "neighbor_matrix_db = [\n";
    for (const auto& row : sc.neighbor_matrix_db) os << "  " << list(row) << ",\n";
    os << "]\n";
  }

  const char* mode = c.channel == ChannelKind::Rayleigh ? "rayleigh" : c.channel == ChannelKind::Fixed ? "fixed" : "trace";
  os << "\n[channel]\nmode = \"" << mode << "\"\nneighbor_fading = " << (c.neighbor_fading ? "true" : "false")
     << "\n";
  if (!c.fixed_pi_e.empty()) os << "pi_e = " << list(c.fixed_pi_e) << "\n";
  if (!c.trace_path.empty()) os << "trace = " << quoted(c.trace_path) << "\n";
  if (!c.trace_nodes.empty()) {
    os << "trace_nodes = [";
    for (std::size_t i = 0; i < c.trace_nodes.size(); ++i) os << (i ? ", " : "") << quoted(c.trace_nodes[i]);
    os << "]\n";
  }
}

inline std::string to_toml(const RunConfig& c) {
  std::ostringstream os;
  write_config(os, c);
  return os.str();
}

inline sim::SystemSpec system_from_name(const std::string& name) {
  if (name == "proposed") return sim::SystemSpec::proposed();
  if (name == "baseline") return sim::SystemSpec::baseline();
  if (name == "direct") return sim::SystemSpec::direct();
  if (name.rfind("relay-", 0) == 0) {
    try {
      return sim::SystemSpec::relay(std::stoi(name.substr(6)));
    } catch (const std::logic_error&) {
    }
  }
  throw ConfigError({"unknown system '" + name + "'"});
}

}  // namespace wban::io
