#pragma once

// Cooperative relay-selection state machine: periodic estimation and STATUS
// broadcast, ordered cost lists, token hand-over of the relay role, and the
// per-packet direct-vs-relay decision.

#include <algorithm>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "wban/core.hpp"
#include "wban/rf_model.hpp"

namespace wban::proto {

inline constexpr int kBroadcast = -1;
inline constexpr int kTokenMaxRetries = 5;

enum class MessageKind { StatusBcc, TokenBcc, DataBcc, DataRf };

inline const char* to_string(MessageKind k) {
  switch (k) {
    case MessageKind::StatusBcc: return "STATUS_BCC";
    case MessageKind::TokenBcc: return "TOKEN_BCC";
    case MessageKind::DataBcc: return "DATA_BCC";
    case MessageKind::DataRf: return "DATA_RF";
  }
  return "?";
}

enum class MetricMode { Energy, Delay, Combined };
enum class BetterMode { DelayOnly, Either };

struct DutyCycle {
  double r_s = 0.0;
  double r_l = 0.0;
  int m_mp = 0;
};

struct ControlMessage {
  MessageKind kind = MessageKind::StatusBcc;
  int src = 0;
  int dst = kBroadcast;
  double delay = 0.0;        // STATUS: advertised E[D_rf]
  double energy_cost = 0.0;  // STATUS: E[E_rf]^2 / E_rem
  int new_relay = -1;        // TOKEN
  double len_bits = 0.0;
  std::optional<DutyCycle> duty;  // piggybacked by the lowest-id relay
};

struct Entry {
  int node_id = 0;
  double value = 0.0;
};

struct ProtocolOptions {
  int n_relays = 2;
  MetricMode metric = MetricMode::Energy;
  BetterMode better = BetterMode::DelayOnly;
  double status_len_bits = 160.0;
  double token_len_bits = 160.0;
};

// Per-packet cost of the BCC hop to a relay.
struct BccHopCost {
  double delay = 0.0;
  double energy = 0.0;
};

struct NodeProtocolState {
  int node_id = 0;
  bool is_relay = false;
  bool waiting_for_token = false;
  bool token_pending = false;
  bool bcc_main_rx_on = true;
  bool stale = false;
  ProtocolOptions opts;
  std::map<int, std::pair<double, double>> known;  // id -> (delay, energy cost)
  std::vector<Entry> nodes_d;
  std::vector<Entry> nodes_e;
  std::set<int> relays;
  PerfEstimate local_estimate;
  double e_rem = 100.0;
  BccHopCost bcc_cost;
  std::optional<DutyCycle> duty;
  int stale_tokens = 0;
};

struct Route {
  bool via_relay = false;
  int relay = -1;
  bool no_relay_available = false;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double energy_cost(double energy_rf, double e_rem) {
  if (!(e_rem > 0.0)) return kInf;
  return energy_rf * energy_rf / e_rem;
}

inline double control_overhead_bps(int n_nodes, int n_relays, double len_bits, double t_est) {
  return (n_nodes + n_relays) * len_bits / t_est;
}

namespace detail {

inline bool before(const Entry& a, const Entry& b) {
  if (a.value < b.value) return true;
  if (b.value < a.value) return false;
  return a.node_id < b.node_id;
}

inline void rebuild_lists(NodeProtocolState& s) {
  s.nodes_d.clear();
  s.nodes_e.clear();
  for (const auto& [id, v] : s.known) {
    s.nodes_d.push_back({id, v.first});
    s.nodes_e.push_back({id, v.second});
  }
  std::sort(s.nodes_d.begin(), s.nodes_d.end(), before);
  std::sort(s.nodes_e.begin(), s.nodes_e.end(), before);
}

inline int rank_of(const std::vector<Entry>& list, int id) {
  for (std::size_t i = 0; i < list.size(); ++i)
    if (list[i].node_id == id) return static_cast<int>(i);
  return static_cast<int>(list.size());
}

inline int better_count(const NodeProtocolState& s) {
  const int d = rank_of(s.nodes_d, s.node_id);
  if (s.opts.better == BetterMode::DelayOnly) return d;
  // nodes ahead in either list
  std::set<int> ahead;
  for (int i = 0; i < d; ++i) ahead.insert(s.nodes_d[i].node_id);
  const int e = rank_of(s.nodes_e, s.node_id);
  for (int i = 0; i < e; ++i) ahead.insert(s.nodes_e[i].node_id);
  return static_cast<int>(ahead.size());
}

inline std::optional<int> best_non_relay(const NodeProtocolState& s) {
  for (const auto& e : s.nodes_d)
    if (e.node_id != s.node_id && !s.relays.contains(e.node_id)) return e.node_id;
  return std::nullopt;
}

inline ControlMessage make_token(const NodeProtocolState& s, int target) {
  ControlMessage m;
  m.kind = MessageKind::TokenBcc;
  m.src = s.node_id;
  m.dst = kBroadcast;
  m.new_relay = target;
  m.len_bits = s.opts.token_len_bits;
  return m;
}

}  // namespace detail

// Role update after any change of the ordered lists.
inline std::optional<ControlMessage> evaluate_role(NodeProtocolState& s) {
  const int better = detail::better_count(s);
  const int n_r = s.opts.n_relays;
  if (s.is_relay) {
    if (better >= n_r && !s.token_pending) {
      if (auto target = detail::best_non_relay(s)) {
        s.token_pending = true;
        return detail::make_token(s, *target);
      }
    }
    return std::nullopt;
  }
  if (better < n_r) {
    s.waiting_for_token = true;
    s.bcc_main_rx_on = true;
  } else {
    s.waiting_for_token = false;
    // wake-up receiver stays on
    s.bcc_main_rx_on = false;
  }
  return std::nullopt;
}

inline NodeProtocolState make_state(int node_id, int n_nodes, const ProtocolOptions& opts, double e_rem) {
  NodeProtocolState s;
  s.node_id = node_id;
  s.opts = opts;
  s.e_rem = e_rem;
  for (int i = 0; i < n_nodes; ++i) s.known[i] = {kInf, kInf};
  for (int i = 0; i < std::min(opts.n_relays, n_nodes); ++i) s.relays.insert(i);
  s.is_relay = s.relays.contains(node_id);
  s.local_estimate = PerfEstimate{kInf, kInf, kInf, 1.0};
  detail::rebuild_lists(s);
  return s;
}

// Maps the latest RSSI to this node's advertised link estimate.
using LinkEstimator = std::function<PerfEstimate(double rssi_dbm)>;

struct TickResult {
  ControlMessage status;
  std::optional<ControlMessage> token;
};

inline TickResult param_est_tick(NodeProtocolState& s, double rssi_dbm, const LinkEstimator& estimate) {
  try {
    PerfEstimate e = estimate(rssi_dbm);
    e.energy_cost = energy_cost(e.mean_energy, s.e_rem);
    s.local_estimate = e;
    s.stale = false;
  } catch (const Error&) {
    s.stale = true;
  }
  s.known[s.node_id] = {s.local_estimate.mean_delay, s.local_estimate.energy_cost};
  detail::rebuild_lists(s);

  TickResult r;
  r.status.kind = MessageKind::StatusBcc;
  r.status.src = s.node_id;
  r.status.dst = kBroadcast;
  r.status.delay = s.local_estimate.mean_delay;
  r.status.energy_cost = s.local_estimate.energy_cost;
  r.status.len_bits = s.opts.status_len_bits;
  if (s.is_relay && !s.relays.empty() && *s.relays.begin() == s.node_id) r.status.duty = s.duty;
  r.token = evaluate_role(s);
  return r;
}

inline std::optional<ControlMessage> on_status(NodeProtocolState& s, const ControlMessage& msg) {
  if (msg.kind != MessageKind::StatusBcc) throw Error("PROTOCOL", "on_status expects a STATUS message");
  const auto it = s.known.find(msg.src);
  const std::pair<double, double> v{msg.delay, msg.energy_cost};
  if (msg.duty) s.duty = msg.duty;
  if (it != s.known.end() && it->second == v) return std::nullopt;
  s.known[msg.src] = v;
  detail::rebuild_lists(s);
  return evaluate_role(s);
}

// Called when the channel is ready to carry a queued token; the role may have
// changed since it was queued. Returns the token to send, if still wanted.
inline std::optional<ControlMessage> revalidate_token(NodeProtocolState& s) {
  if (!s.token_pending) return std::nullopt;
  s.token_pending = false;
  if (!s.is_relay || detail::better_count(s) < s.opts.n_relays) return std::nullopt;
  const auto target = detail::best_non_relay(s);
  if (!target) return std::nullopt;
  s.token_pending = true;
  return detail::make_token(s, *target);
}

// Delivered to every node once the token is acknowledged by all, including
// the sender.
inline void on_token(NodeProtocolState& s, const ControlMessage& msg) {
  if (msg.kind != MessageKind::TokenBcc) throw Error("PROTOCOL", "on_token expects a TOKEN message");
  s.relays.erase(msg.src);
  s.relays.insert(msg.new_relay);
  if (msg.src == s.node_id) {
    s.is_relay = false;
    s.token_pending = false;
    evaluate_role(s);
  }
  if (msg.new_relay == s.node_id) {
    if (!s.waiting_for_token) ++s.stale_tokens;
    s.is_relay = true;
    s.waiting_for_token = false;
    s.bcc_main_rx_on = true;
  }
}

inline Route forward_decision(const NodeProtocolState& s) {
  Route r;
  if (s.is_relay) return r;
  const bool use_delay = s.opts.metric == MetricMode::Delay;
  const auto& list = use_delay ? s.nodes_d : s.nodes_e;
  const Entry* best = nullptr;
  const Entry* self = nullptr;
  for (const auto& e : list) {
    if (e.node_id == s.node_id) self = &e;
    if (!best && e.node_id != s.node_id && s.relays.contains(e.node_id)) best = &e;
  }
  if (!best) {
    r.no_relay_available = true;
    return r;
  }
  if (self && detail::before(*self, *best)) return r;

  const auto& relay = s.known.at(best->node_id);
  const bool energy_ok = s.local_estimate.mean_energy >= s.bcc_cost.energy + relay.second;
  const bool delay_ok = s.local_estimate.mean_delay >= s.bcc_cost.delay + relay.first;
  bool go = false;
  switch (s.opts.metric) {
    case MetricMode::Energy: go = energy_ok; break;
    case MetricMode::Delay: go = delay_ok; break;
    case MetricMode::Combined: go = energy_ok && delay_ok; break;
  }
  if (go) {
    r.via_relay = true;
    r.relay = best->node_id;
  }
  return r;
}

// One line per message: time kind src dst payload.
inline std::string debug_line(double t, const ControlMessage& m) {
  char buf[192];
  const std::string dst = m.dst == kBroadcast ? "*" : std::to_string(m.dst);
  switch (m.kind) {
    case MessageKind::StatusBcc:
      std::snprintf(buf, sizeof buf, "%.6f %s %d %s delay=%.9g cost=%.9g", t, to_string(m.kind), m.src,
                    dst.c_str(), m.delay, m.energy_cost);
      break;
    case MessageKind::TokenBcc:
      std::snprintf(buf, sizeof buf, "%.6f %s %d %s new_relay=%d", t, to_string(m.kind), m.src, dst.c_str(),
                    m.new_relay);
      break;
    default:
      std::snprintf(buf, sizeof buf, "%.6f %s %d %s len=%.0f", t, to_string(m.kind), m.src, dst.c_str(), m.len_bits);
  }
  return buf;
}

// Advertised estimate from the RF model: the node evaluates N_r copies of its
// own link; delay and energy are per delivered packet, so a blocked link
// advertises infinity.
inline PerfEstimate estimate_from_erasure(const Config& c, double pi_e, double rssi_dbm = 0.0) {
  const double snr = snr_from_rssi(rssi_dbm, c.network.noise_floor_dbm);
  std::vector<LinkState> links(c.network.n_relays, LinkState{0, rssi_dbm, snr, pi_e, c.network.initial_energy});
  const auto s = rf::solve_rf(rf::rf_input_from_config(c, links));
  PerfEstimate e;
  e.plr = s.pi_loss;
  const double delivered = 1.0 - s.pi_loss;
  e.mean_delay = delivered > 0.0 ? s.mean_delay / delivered : kInf;
  e.mean_energy = delivered > 0.0 ? s.mean_energy / delivered : kInf;
  return e;
}

inline LinkEstimator model_estimator(const Config& c) {
  return [c](double rssi_dbm) {
    const double snr = snr_from_rssi(rssi_dbm, c.network.noise_floor_dbm);
    const double pi_e = rf::erasure_from_snr(snr, c.network.payload_bits, c.network.ack_len_bits);
    return estimate_from_erasure(c, pi_e, rssi_dbm);
  };
}

}  // namespace wban::proto
