#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace wban::sim {

enum class EnergyCategory { Active, Cca, Tx, Rx, Sleep, Transition, Compute };
inline constexpr int kEnergyCategories = 7;

struct EnergyBreakdown {
  double by_category[kEnergyCategories] = {};

  double& operator[](EnergyCategory c) { return by_category[static_cast<int>(c)]; }
  double operator[](EnergyCategory c) const { return by_category[static_cast<int>(c)]; }

  double total() const {
    double s = 0.0;
    for (double v : by_category) s += v;
    return s;
  }

  EnergyBreakdown& operator+=(const EnergyBreakdown& o) {
    for (int i = 0; i < kEnergyCategories; ++i) by_category[i] += o.by_category[i];
    return *this;
  }
};

struct NodeMetrics {
  long generated = 0;
  long delivered = 0;
  long lost = 0;
  double delay_sum = 0.0;
  std::vector<double> delays;
  EnergyBreakdown energy;

  double plr() const { return generated ? static_cast<double>(lost) / generated : 0.0; }
  double mean_delay() const { return delivered ? delay_sum / delivered : 0.0; }
};

// Per-hop MAC statistics for data frames, measured from reaching the head of
// the MAC queue to success or discard.
struct MacStats {
  long jobs = 0;
  long delivered = 0;
  long lost = 0;
  long transmissions = 0;
  long cca = 0;
  long cca_busy = 0;
  double delay_sum = 0.0;   // delivered only
  double energy_sum = 0.0;  // all jobs

  double mean_delay() const { return delivered ? delay_sum / delivered : 0.0; }
  double mean_energy() const { return jobs ? energy_sum / jobs : 0.0; }
  double plr() const { return jobs ? static_cast<double>(lost) / jobs : 0.0; }
  double busy_fraction() const { return cca ? static_cast<double>(cca_busy) / cca : 0.0; }
};

struct RunMetrics {
  std::vector<NodeMetrics> nodes;
  long generated = 0;
  long delivered = 0;
  long lost = 0;
  long duplicates = 0;
  double mean_delay = 0.0;
  double p50_delay = 0.0;
  double p95_delay = 0.0;
  EnergyBreakdown energy;
  double control_bits = 0.0;
  double control_bps = 0.0;
  long relay_changes = 0;
  long stale_tokens = 0;
  long token_alarms = 0;
  long max_tokens_in_flight = 0;
  long monitor_checks = 0;
  long monitor_violations = 0;
  long rf_collisions = 0;
  long bcc_collisions = 0;
  long rf_power_cycles = 0;
  long protocol_calls = 0;
  MacStats rf_mac;
  MacStats bcc_mac;
  double end_time = 0.0;
  double measured_time = 0.0;
  long long events = 0;
  bool partial = false;
  std::uint64_t trace_hash = 0;
  std::vector<std::string> debug_lines;

  double plr() const { return generated ? static_cast<double>(lost) / generated : 0.0; }
  // Per delivered packet, so losses show up as wasted energy.
  double energy_per_packet() const { return delivered ? energy.total() / delivered : 0.0; }
};

inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

inline const char* metrics_csv_header() {
  return "generated,delivered,lost,plr,mean_delay_s,p50_delay_s,p95_delay_s,energy_j,energy_active_j,"
         "energy_cca_j,energy_tx_j,energy_rx_j,energy_sleep_j,energy_transition_j,energy_compute_j,"
         "energy_per_packet_j,control_bps,relay_changes,rf_collisions,bcc_collisions,monitor_violations,"
         "end_time_s,events,partial";
}

inline std::string shortest(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline void write_metrics_row(std::ostream& os, const RunMetrics& m) {
  const auto& e = m.energy;
  const auto f = shortest;
  os << m.generated << ',' << m.delivered << ',' << m.lost << ',' << f(m.plr()) << ',' << f(m.mean_delay) << ','
     << f(m.p50_delay) << ',' << f(m.p95_delay) << ',' << f(e.total()) << ',' << f(e[EnergyCategory::Active]) << ','
     << f(e[EnergyCategory::Cca]) << ',' << f(e[EnergyCategory::Tx]) << ',' << f(e[EnergyCategory::Rx]) << ','
     << f(e[EnergyCategory::Sleep]) << ',' << f(e[EnergyCategory::Transition]) << ','
     << f(e[EnergyCategory::Compute]) << ',' << f(m.energy_per_packet()) << ',' << f(m.control_bps) << ','
     << m.relay_changes << ',' << m.rf_collisions << ',' << m.bcc_collisions << ',' << m.monitor_violations << ','
     << f(m.end_time) << ',' << m.events << ',' << (m.partial ? 1 : 0);
}

}  // namespace wban::sim
