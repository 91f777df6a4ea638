#pragma once

// Per-frame RF loss realization and the slow link quality nodes estimate from.

#include <cmath>
#include <memory>
#include <vector>

#include "wban/core.hpp"
#include "wban/rf_model.hpp"
#include "wban/sim/rng.hpp"
#include "wban/sim/scenario.hpp"
#include "wban/sim/trace.hpp"

namespace wban::sim {

enum class ChannelMode { Fixed, Rayleigh, Trace };

struct ChannelModel {
  ChannelMode mode = ChannelMode::Rayleigh;
  std::vector<double> pi_e;         // Fixed: per-node frame failure probability
  std::vector<double> mean_snr_db;  // Rayleigh: per-node gateway link
  std::vector<std::vector<double>> neighbor_snr_db;
  std::shared_ptr<const RssiTrace> trace;
  std::vector<int> trace_node;  // simulator node -> trace node
  bool neighbor_fading = true;
};

inline ChannelModel fixed_channel(std::vector<double> pi_e) {
  ChannelModel c;
  c.mode = ChannelMode::Fixed;
  c.pi_e = std::move(pi_e);
  return c;
}

inline ChannelModel rayleigh_channel(const BodyScenario& s) {
  ChannelModel c;
  c.mode = ChannelMode::Rayleigh;
  c.mean_snr_db = s.gateway_snr_db;
  c.neighbor_snr_db = s.neighbor_snr_db;
  return c;
}

inline double db_to_linear(double db) { return std::isinf(db) && db < 0 ? 0.0 : std::pow(10.0, db / 10.0); }

// Frame-level view of a channel model for one run.
class LinkChannel {
 public:
  LinkChannel(ChannelModel m, const NetworkConfig& net) : m_(std::move(m)), net_(net) {
    const auto n = static_cast<std::size_t>(net.n_nodes);
    switch (m_.mode) {
      case ChannelMode::Fixed:
        if (m_.pi_e.size() != n) throw ScenarioError("fixed channel needs one erasure probability per node");
        for (double e : m_.pi_e)
          if (!(e >= 0.0 && e <= 1.0)) throw ScenarioError("erasure probability outside [0, 1]");
        break;
      case ChannelMode::Rayleigh:
        if (m_.mean_snr_db.size() != n) throw ScenarioError("rayleigh channel needs one mean SNR per node");
        break;
      case ChannelMode::Trace:
        if (!m_.trace) throw ScenarioError("trace channel without a trace");
        if (m_.trace_node.empty())
          for (int i = 0; i < net.n_nodes; ++i) m_.trace_node.push_back(i);
        if (m_.trace_node.size() != n) throw ScenarioError("trace node mapping must cover every node");
        for (int t : m_.trace_node)
          if (t < 0 || t >= static_cast<int>(m_.trace->series.size()))
            throw ScenarioError("node mapped to a missing trace series");
        break;
    }
    if (!m_.neighbor_snr_db.empty() && m_.neighbor_snr_db.size() != n)
      throw ScenarioError("neighbor matrix must be N x N");
  }

  ChannelMode mode() const { return m_.mode; }

  // Slow RSSI a node reads from its transceiver.
  double rssi_dbm(int node, double t) const {
    switch (m_.mode) {
      case ChannelMode::Trace: return m_.trace->rssi_at(m_.trace_node[node], t);
      case ChannelMode::Rayleigh: return net_.noise_floor_dbm + m_.mean_snr_db[node];
      case ChannelMode::Fixed: break;
    }
    return net_.noise_floor_dbm;
  }

  // Frame failure probability the node's estimator should assume now.
  double erasure_estimate(int node, double t) {
    switch (m_.mode) {
      case ChannelMode::Fixed: return m_.pi_e[node];
      case ChannelMode::Rayleigh: return rayleigh_erasure(db_to_linear(m_.mean_snr_db[node]));
      case ChannelMode::Trace:
        return rf::erasure_from_snr(snr_from_rssi(rssi_dbm(node, t), net_.noise_floor_dbm), net_.payload_bits,
                                    net_.ack_len_bits);
    }
    return 1.0;
  }

  bool gateway_frame_fails(int node, double t, double data_bits, Stream& rng) {
    switch (m_.mode) {
      case ChannelMode::Fixed: return rng.bernoulli(m_.pi_e[node]);
      case ChannelMode::Rayleigh: return faded_fails(db_to_linear(m_.mean_snr_db[node]), data_bits, rng);
      case ChannelMode::Trace: {
        const double snr = snr_from_rssi(rssi_dbm(node, t), net_.noise_floor_dbm);
        return rng.bernoulli(rf::erasure_from_snr(snr, data_bits, net_.ack_len_bits));
      }
    }
    return true;
  }

  bool has_neighbors() const { return !m_.neighbor_snr_db.empty(); }

  double neighbor_snr_db(int a, int b) const { return m_.neighbor_snr_db.at(a).at(b); }

  double neighbor_erasure(int a, int b) {
    const double snr = db_to_linear(neighbor_snr_db(a, b));
    return m_.neighbor_fading ? rayleigh_erasure(snr)
                              : rf::erasure_from_snr(snr, net_.payload_bits, net_.ack_len_bits);
  }

  bool neighbor_frame_fails(int a, int b, double data_bits, Stream& rng) {
    const double snr = db_to_linear(neighbor_snr_db(a, b));
    if (m_.neighbor_fading) return faded_fails(snr, data_bits, rng);
    return rng.bernoulli(rf::erasure_from_snr(snr, data_bits, net_.ack_len_bits));
  }

 private:
  bool faded_fails(double mean_snr, double data_bits, Stream& rng) {
    if (!(mean_snr > 0.0)) return true;
    const double snr = rng.exponential(mean_snr);
    return rng.bernoulli(rf::erasure_from_snr(snr, data_bits, net_.ack_len_bits));
  }

  double rayleigh_erasure(double mean_snr) {
    for (const auto& [k, v] : cache_)
      if (k == mean_snr) return v;
    const double v = rf::erasure_rayleigh(mean_snr, net_.payload_bits, net_.ack_len_bits);
    cache_.emplace_back(mean_snr, v);
    return v;
  }

  ChannelModel m_;
  NetworkConfig net_;
  std::vector<std::pair<double, double>> cache_;
};

}  // namespace wban::sim
