#pragma once

// Shared domain types for the dual-radio (802.15.4 RF + body-coupled) body
// area network. All durations are seconds, energies joules, powers watts.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "wban/error.hpp"

namespace wban {

using NodeId = int;

struct NetworkConfig {
  int n_nodes = 4;
  int n_relays = 2;
  std::vector<double> per_node_rate = std::vector<double>(4, 10.0);  // packets/s
  double payload_bits = 800.0;
  double est_period = 1.0;
  double status_len_bits = 160.0;
  double ack_len_bits = 88.0;  // 11-byte 802.15.4 ACK frame
  double noise_floor_dbm = -95.0;
  double supply_voltage = 1.8;
  double initial_energy = 100.0;  // per node
  double rf_phy_rate_bps = 250e3;
};

struct TimingParams {
  double t_slot = 0.0;
  double t_cca = 0.0;
  double t_data = 0.0;
  double t_ack = 0.0;
  double t_att = 0.0;
  double t_rtr = 0.0;
  // BCC only. A value <= 0 means "derive as r_s + r_l" so one preamble
  // always bridges a full sleep phase.
  double t_pream = 0.0;
};

struct PowerProfile {
  double p_act = 0.0;
  double p_cca = 0.0;
  double p_tx = 0.0;
  double p_rx = 0.0;
  double p_sleep = 0.0;
};

struct MacParams {
  int m_r = 3;
  int m_c = 3;
  int be_min = 3;
  int m_mp = 3;
  double r_s = 2e-3;
  double r_l = 0.5e-3;
  int be_max = 0;  // 0 disables the backoff-exponent cap
};

struct LinkState {
  NodeId node_id = 0;
  double rssi_dbm = 0.0;
  double snr_linear = 0.0;
  double pi_e = 0.0;
  double e_rem = 0.0;
};

struct PerfEstimate {
  double mean_delay = 0.0;
  double mean_energy = 0.0;
  double energy_cost = 0.0;
  double plr = 0.0;
};

// Everything the analytic models and the simulator need about the network.
struct Config {
  NetworkConfig network;
  TimingParams rf_timing;
  TimingParams bcc_timing;
  PowerProfile rf_power;
  PowerProfile bcc_power;
  MacParams mac;
};

struct ValidatedConfig : Config {
  std::vector<std::string> warnings;
};

// CC2420 current draws converted at the given supply voltage. "Active" is the
// receiver-on listening state used during backoff and turnaround; "sleep" is
// the idle (oscillator on) state.
inline PowerProfile cc2420_power(double volts) {
  PowerProfile p;
  p.p_tx = 19.7e-3 * volts;
  p.p_rx = 17.4e-3 * volts;
  p.p_act = p.p_rx;
  p.p_cca = p.p_rx;
  p.p_sleep = 0.426e-3 * volts;
  return p;
}

inline PowerProfile bcc_default_power() {
  PowerProfile p;
  p.p_rx = 2.1e-3;
  p.p_tx = 0.6e-3;
  p.p_cca = p.p_rx;
  p.p_act = p.p_rx;
  p.p_sleep = 10e-6;  // wake-up receiver
  return p;
}

inline TimingParams rf_default_timing() {
  TimingParams t;
  t.t_slot = 0.192e-3;
  t.t_cca = 0.25e-3;
  t.t_data = 1.12e-3;
  t.t_ack = 0.352e-3;
  t.t_att = 0.384e-3;
  return t;
}

inline TimingParams bcc_default_timing() {
  TimingParams t;
  t.t_slot = 23e-6;
  t.t_cca = 23e-6;
  t.t_data = 0.2e-3;
  t.t_ack = 0.1e-3;
  t.t_att = 0.1e-3;
  t.t_rtr = 0.1e-3;
  t.t_pream = 0.0;
  return t;
}

inline Config default_config() {
  Config c;
  c.rf_timing = rf_default_timing();
  c.bcc_timing = bcc_default_timing();
  c.rf_power = cc2420_power(c.network.supply_voltage);
  c.bcc_power = bcc_default_power();
  return c;
}

inline double total_load(const NetworkConfig& n) {
  return std::accumulate(n.per_node_rate.begin(), n.per_node_rate.end(), 0.0);
}

// Relays are nodes [0, n_relays); the rest forward over BCC.
inline double load_direct(const NetworkConfig& n) {
  const auto relays = static_cast<std::ptrdiff_t>(std::min<std::size_t>(n.n_relays, n.per_node_rate.size()));
  return std::accumulate(n.per_node_rate.begin(), n.per_node_rate.begin() + relays, 0.0);
}

inline double load_forwarded(const NetworkConfig& n) { return total_load(n) - load_direct(n); }

// Upper end of the RF load axis: the PHY rate expressed in packets/s.
inline double max_rf_load(const NetworkConfig& n) { return n.rf_phy_rate_bps / n.payload_bits; }

inline double preamble_duration(const TimingParams& bcc, const MacParams& mac) {
  return bcc.t_pream > 0.0 ? bcc.t_pream : mac.r_s + mac.r_l;
}

inline double snr_from_rssi(double rssi_dbm, double noise_floor_dbm = -95.0) {
  const double g = std::pow(10.0, (rssi_dbm - noise_floor_dbm) / 10.0);
  return std::max(0.0, g);
}

inline double rssi_from_snr(double snr_linear, double noise_floor_dbm = -95.0) {
  return noise_floor_dbm + 10.0 * std::log10(snr_linear);
}

namespace detail {

inline void check_timing(const TimingParams& t, const std::string& tech, std::vector<std::string>& out) {
  const std::pair<const char*, double> fields[] = {{"t_slot", t.t_slot}, {"t_cca", t.t_cca},
                                                   {"t_data", t.t_data}, {"t_ack", t.t_ack},
                                                   {"t_att", t.t_att},   {"t_rtr", t.t_rtr}};
  for (const auto& [name, v] : fields)
    if (!(v >= 0.0) || !std::isfinite(v)) out.push_back(tech + ".timing." + name + " must be >= 0");
}

inline void check_power(const PowerProfile& p, const std::string& tech, std::vector<std::string>& out) {
  const std::pair<const char*, double> fields[] = {
      {"p_act", p.p_act}, {"p_cca", p.p_cca}, {"p_tx", p.p_tx}, {"p_rx", p.p_rx}, {"p_sleep", p.p_sleep}};
  for (const auto& [name, v] : fields)
    if (!(v >= 0.0) || !std::isfinite(v)) out.push_back(tech + ".power." + name + " must be >= 0");
  if (p.p_sleep > p.p_act) out.push_back(tech + ".power.p_sleep exceeds p_act");
  if (p.p_act > std::max(p.p_tx, p.p_rx)) out.push_back(tech + ".power.p_act exceeds max(p_tx, p_rx)");
}

}  // namespace detail

// Checks every invariant, returns the config unchanged plus non-fatal
// warnings. Throws ConfigError whose message is the first violation.
inline ValidatedConfig validate_config(const Config& cfg) {
  std::vector<std::string> bad;
  const auto& n = cfg.network;
  if (n.n_nodes < 1) bad.push_back("n_nodes must be >= 1");
  if (n.n_relays < 1) bad.push_back("n_relays must be >= 1");
  if (n.n_relays > n.n_nodes) bad.push_back("n_relays exceeds n_nodes");
  if (static_cast<int>(n.per_node_rate.size()) != n.n_nodes)
    bad.push_back("per_node_rate must have one entry per node");
  for (double r : n.per_node_rate)
    if (!(r >= 0.0) || !std::isfinite(r)) {
      bad.push_back("per_node_rate entries must be >= 0");
      break;
    }
  if (!(n.payload_bits > 0.0)) bad.push_back("payload_bits must be > 0");
  if (!(n.est_period > 0.0)) bad.push_back("est_period must be > 0");
  if (!(n.status_len_bits > 0.0)) bad.push_back("status_len_bits must be > 0");
  if (!(n.ack_len_bits > 0.0)) bad.push_back("ack_len_bits must be > 0");
  if (!(n.supply_voltage > 0.0)) bad.push_back("supply_voltage must be > 0");
  if (!(n.initial_energy > 0.0)) bad.push_back("initial_energy must be > 0");
  if (!(n.rf_phy_rate_bps > 0.0)) bad.push_back("rf_phy_rate_bps must be > 0");

  detail::check_timing(cfg.rf_timing, "rf", bad);
  detail::check_timing(cfg.bcc_timing, "bcc", bad);
  detail::check_power(cfg.rf_power, "rf", bad);
  detail::check_power(cfg.bcc_power, "bcc", bad);

  const auto& m = cfg.mac;
  if (m.m_r < 1) bad.push_back("mac.m_r must be >= 1");
  if (m.m_c < 1) bad.push_back("mac.m_c must be >= 1");
  if (m.m_mp < 1) bad.push_back("mac.m_mp must be >= 1");
  if (m.be_min < 0 || m.be_min > 20) bad.push_back("mac.be_min must be in [0, 20]");
  if (m.be_max != 0 && m.be_max < m.be_min) bad.push_back("mac.be_max must be 0 (off) or >= be_min");
  if (!(m.r_s >= 0.0) || !(m.r_l >= 0.0)) bad.push_back("mac.r_s and mac.r_l must be >= 0");
  if (!(m.r_s + m.r_l > 0.0)) bad.push_back("mac.r_s + mac.r_l must be > 0");
  if (preamble_duration(cfg.bcc_timing, m) < m.r_s) bad.push_back("bcc preamble shorter than r_s");

  if (!bad.empty()) throw ConfigError(std::move(bad));

  ValidatedConfig out;
  static_cast<Config&>(out) = cfg;
  const double expected = n.payload_bits / n.rf_phy_rate_bps;
  if (std::abs(cfg.rf_timing.t_data - expected) > 0.01 * expected)
    out.warnings.push_back("rf.timing.t_data differs from payload_bits / rf_phy_rate_bps by more than 1%");
  return out;
}

}  // namespace wban
