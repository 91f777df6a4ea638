#pragma once

// Discrete-event simulation of the dual-radio network: Poisson traffic,
// unslotted CSMA/CA on the shared RF channel, preamble-sampling MAC on the
// body channel, the relay-selection protocol and energy bookkeeping.

#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "wban/bcc_model.hpp"
#include "wban/core.hpp"
#include "wban/protocol.hpp"
#include "wban/sim/channel.hpp"
#include "wban/sim/event_queue.hpp"
#include "wban/sim/metrics.hpp"
#include "wban/sim/rng.hpp"

namespace wban::sim {

enum class SystemKind { Proposed, Baseline, DirectOnly, FixedRelay };

struct SystemSpec {
  SystemKind kind = SystemKind::Proposed;
  int fixed_relay = 0;
  std::string label;

  static SystemSpec proposed() { return {SystemKind::Proposed, 0, {}}; }
  static SystemSpec baseline() { return {SystemKind::Baseline, 0, {}}; }
  static SystemSpec direct() { return {SystemKind::DirectOnly, 0, {}}; }
  static SystemSpec relay(int k) { return {SystemKind::FixedRelay, k, {}}; }

  std::string name() const {
    if (!label.empty()) return label;
    switch (kind) {
      case SystemKind::Proposed: return "proposed";
      case SystemKind::Baseline: return "baseline";
      case SystemKind::DirectOnly: return "direct";
      case SystemKind::FixedRelay: return "relay-" + std::to_string(fixed_relay);
    }
    return "?";
  }
};

enum class RetryPolicy { Immediate, Recontend };

struct SimOptions {
  double duration = 0.0;        // generation window; 0 uses the packet budget
  long packets_per_node = 1000;
  double warmup = 0.0;          // packets and control bits before this are not measured
  long long max_events = 50'000'000;
  RetryPolicy retry = RetryPolicy::Recontend;  // Immediate follows the analytic HOL structure
  bool extended_energy = false;
  double energy_per_power_cycle = 20e-6;
  double energy_per_protocol_call = 1e-6;
  double probe_bits = 88.0;
  int bcc_max_retx = 3;
  // Off: overlapping RF frames both survive (the analytic model's assumption).
  bool rf_collisions = true;
  double blocked_threshold = 0.999;  // baseline treats a link this lossy as blocked
  proto::MetricMode metric = proto::MetricMode::Energy;
  proto::BetterMode better = proto::BetterMode::DelayOnly;
  bool record_debug = false;
  bool record_delays = true;
};

namespace detail {

struct Booking {
  double t0, t1, power;
  EnergyCategory cat;
};

// Energy of one radio: overlapping bookings are charged at the highest
// power; uncovered time at the idle power.
class RadioLedger {
 public:
  double idle_power = 0.0;
  bool present = false;

  void book(double t0, double t1, double power, EnergyCategory cat) {
    if (t1 > t0) b_.push_back({t0, t1, power, cat});
  }

  EnergyBreakdown settle(double t_end) const {
    EnergyBreakdown out;
    if (!present) return out;
    struct Edge {
      double t;
      bool start;
      std::size_t idx;
    };
    std::vector<Edge> edges;
    edges.reserve(2 * b_.size());
    for (std::size_t i = 0; i < b_.size(); ++i) {
      if (b_[i].t0 >= t_end) continue;
      edges.push_back({b_[i].t0, true, i});
      edges.push_back({std::min(b_[i].t1, t_end), false, i});
    }
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
      if (a.t != b.t) return a.t < b.t;
      if (a.start != b.start) return !a.start;
      return a.idx < b.idx;
    });
    std::multiset<std::pair<double, std::size_t>> active;
    double t = 0.0;
    auto charge = [&](double until) {
      const double dt = until - t;
      if (dt <= 0.0) return;
      if (active.empty()) {
        out[EnergyCategory::Sleep] += idle_power * dt;
      } else {
        const auto& top = b_[active.rbegin()->second];
        out[top.cat] += top.power * dt;
      }
    };
    for (const auto& e : edges) {
      charge(e.t);
      t = std::max(t, e.t);
      if (e.start)
        active.insert({b_[e.idx].power, e.idx});
      else
        active.erase(active.find({b_[e.idx].power, e.idx}));
    }
    charge(t_end);
    return out;
  }

 private:
  std::vector<Booking> b_;
};

class Medium {
 public:
  std::uint64_t add(double s, double e) {
    if (++adds_ % 512 == 0) prune(s - 1.0);
    v_.push_back({s, e, next_});
    return next_++;
  }
  bool busy(double t0, double t1, std::uint64_t exclude = 0) const {
    for (const auto& x : v_)
      if (x.id != exclude && x.s < t1 && x.e > t0) return true;
    return false;
  }
  bool overlaps(std::uint64_t id) const {
    for (const auto& x : v_)
      if (x.id == id) return busy(x.s, x.e, id);
    return false;
  }

 private:
  struct Tx {
    double s, e;
    std::uint64_t id;
  };
  void prune(double before) {
    std::erase_if(v_, [before](const Tx& x) { return x.e < before; });
  }
  std::vector<Tx> v_;
  std::uint64_t next_ = 1;
  std::uint64_t adds_ = 0;
};

struct RfJob {
  long pkt = -1;
  int dst = -1;  // -1 is the gateway
  bool probe = false;
};

struct RfMac {
  std::deque<RfJob> q;
  bool active = false;
  int nb = 0;
  int stage = 0;
  int tx = 0;
  bool failed = false;
  double hol_start = 0.0;
  double energy = 0.0;
  std::uint64_t medium_id = 0;
};

enum class BccKind { Data, Status, Token };

struct BccJob {
  BccKind kind = BccKind::Data;
  long pkt = -1;
  int dst = -1;
  proto::ControlMessage msg;
};

struct BccMac {
  std::deque<BccJob> q;
  bool active = false;
  int nb = 0;
  int stage = 0;
  int retx = 0;
  double hol_start = 0.0;
  double energy = 0.0;
  std::uint64_t medium_id = 0;
};

struct Packet {
  int origin = 0;
  double gen = 0.0;
  bool counted = false;
  bool resolved = false;
};

inline void fnv(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
}

}  // namespace detail

class Engine {
 public:
  Engine(const Config& cfg, const SimOptions& opt, ChannelModel channel, SystemSpec sys, std::uint64_t seed)
      : cfg_(cfg), opt_(opt), sys_(std::move(sys)), seed_(seed), n_(cfg.network.n_nodes), ch_(std::move(channel), cfg.network) {
    if (n_ < 1) throw ScenarioError("no nodes");
    if (static_cast<int>(cfg_.network.per_node_rate.size()) != n_)
      throw ConfigError({"per_node_rate must have one entry per node"});
    if (sys_.kind == SystemKind::FixedRelay && (sys_.fixed_relay < 0 || sys_.fixed_relay >= n_))
      throw ScenarioError("fixed relay outside the node range");
    if (opt_.packets_per_node <= 0 && opt_.duration <= 0.0)
      throw ConfigError({"either a duration or a packet budget is required"});

    rf_t_ = cfg_.rf_timing;
    bcc_t_ = cfg_.bcc_timing;
    bcc_t_.t_pream = preamble_duration(cfg_.bcc_timing, cfg_.mac);
    bcc_rate_ = cfg_.network.payload_bits / bcc_t_.t_data;
    uses_bcc_ = sys_.kind == SystemKind::Proposed || sys_.kind == SystemKind::FixedRelay;
    if (uses_bcc_) {
      if (!(cfg_.mac.r_s + cfg_.mac.r_l > 0.0)) throw InvalidDutyCycle("r_s + r_l must be > 0");
      if (bcc_t_.t_pream < cfg_.mac.r_s) throw InvalidDutyCycle("preamble shorter than the sleep interval");
    }

    for (int i = 0; i < n_; ++i) {
      arrivals_.emplace_back(seed, i, Purpose::Arrivals);
      backoff_.emplace_back(seed, i, Purpose::Backoff);
      chan_rng_.emplace_back(seed, i, Purpose::Channel);
      bcc_rng_.emplace_back(seed, i, Purpose::Bcc);
      phase_rng_.emplace_back(seed, i, Purpose::Phase);
    }
    rf_.resize(n_);
    bcc_.resize(n_);
    rf_led_.resize(n_);
    bcc_led_.resize(n_);
    extra_.resize(n_);
    consumed_.assign(n_, 0.0);
    generated_.assign(n_, 0);
    route_via_.assign(n_, -1);
    lpl_phase_.resize(n_);
    for (int i = 0; i < n_; ++i) {
      rf_led_[i].present = true;
      rf_led_[i].idle_power = cfg_.rf_power.p_sleep;
      bcc_led_[i].present = uses_bcc_;
      bcc_led_[i].idle_power = cfg_.bcc_power.p_sleep;
      lpl_phase_[i] = phase_rng_[i].uniform() * (cfg_.mac.r_s + cfg_.mac.r_l);
    }

    if (sys_.kind == SystemKind::Proposed) {
      proto::ProtocolOptions po;
      po.n_relays = cfg_.network.n_relays;
      po.metric = opt_.metric;
      po.better = opt_.better;
      po.status_len_bits = cfg_.network.status_len_bits;
      po.token_len_bits = cfg_.network.status_len_bits;
      proto::BccHopCost hop;
      try {
        const auto b = bcc::solve_bcc(bcc::bcc_input_from_config(cfg_));
        hop = {b.mean_delay, b.mean_energy};
      } catch (const Error&) {
        hop = {bcc_t_.t_pream + bcc::data_phase_delay(bcc_t_), 0.0};
      }
      for (int i = 0; i < n_; ++i) {
        states_.push_back(proto::make_state(i, n_, po, cfg_.network.initial_energy));
        states_.back().bcc_cost = hop;
      }
    }
  }

  RunMetrics run() {
    m_.nodes.assign(n_, NodeMetrics{});
    for (int i = 0; i < n_; ++i) {
      if (rate(i) > 0.0) q_.push(arrivals_[i].exponential(1.0 / rate(i)), EventKind::PacketArrival, i);
      if (sys_.kind == SystemKind::Proposed || sys_.kind == SystemKind::Baseline)
        q_.push(phase_rng_[i].uniform() * cfg_.network.est_period, EventKind::EstTick, i);
    }
    while (!q_.empty()) {
      if (done()) break;
      if (m_.events >= opt_.max_events) {
        m_.partial = true;
        break;
      }
      const Event e = q_.pop();
      if (opt_.duration > 0.0 && e.time > opt_.duration && generation_done() && outstanding_ == 0) break;
      now_ = e.time;
      ++m_.events;
      dispatch(e);
    }
    finish();
    return std::move(m_);
  }

 private:
  double rate(int i) const { return cfg_.network.per_node_rate[i]; }

  bool node_generation_done(int i) const {
    if (rate(i) <= 0.0) return true;
    if (opt_.duration > 0.0) return now_ >= opt_.duration;
    return generated_[i] >= opt_.packets_per_node;
  }

  bool generation_done() const {
    for (int i = 0; i < n_; ++i)
      if (!node_generation_done(i)) return false;
    return true;
  }

  bool done() const {
    if (outstanding_ != 0 || !generation_done()) return false;
    return opt_.duration <= 0.0 || now_ >= opt_.duration;
  }

  void dispatch(const Event& e) {
    switch (e.kind) {
      case EventKind::PacketArrival: on_arrival(e.node); break;
      case EventKind::EstTick: on_tick(e.node); break;
      case EventKind::BackoffExpiry: e.radio == Radio::Rf ? rf_cca_start(e.node) : bcc_cca_start(e.node); break;
      case EventKind::CcaResult: e.radio == Radio::Rf ? rf_cca_end(e.node) : bcc_cca_end(e.node); break;
      case EventKind::TxEnd: e.radio == Radio::Rf ? rf_tx_end(e.node) : bcc_tx_end(e.node); break;
      case EventKind::AckTimeout: rf_ack_end(e.node); break;
      default: break;
    }
  }

  // ---- energy helpers

  void book_rf(int node, double t0, double t1, double p, EnergyCategory c, bool job = true) {
    rf_led_[node].book(t0, t1, p, c);
    consumed_[node] += p * (t1 - t0);
    if (job) rf_[node].energy += p * (t1 - t0);
  }

  double book_bcc(int node, double t0, double t1, double p, EnergyCategory c) {
    bcc_led_[node].book(t0, t1, p, c);
    consumed_[node] += p * (t1 - t0);
    return p * (t1 - t0);
  }

  void charge_extra(int node, EnergyCategory c, double joules) {
    if (!opt_.extended_energy) return;
    extra_[node][c] += joules;
    consumed_[node] += joules;
  }

  void protocol_call(int node) {
    ++m_.protocol_calls;
    charge_extra(node, EnergyCategory::Compute, opt_.energy_per_protocol_call);
  }

  // ---- packets

  void on_arrival(int node) {
    const long id = static_cast<long>(packets_.size());
    const bool counted = now_ >= opt_.warmup;
    packets_.push_back({node, now_, counted, false});
    ++outstanding_;
    if (counted) {
      ++generated_[node];
      ++m_.nodes[node].generated;
    }
    route_packet(node, id);
    const double next = now_ + arrivals_[node].exponential(1.0 / rate(node));
    if (!node_generation_done(node) && (opt_.duration <= 0.0 || next < opt_.duration))
      q_.push(next, EventKind::PacketArrival, node);
  }

  void route_packet(int node, long pkt) {
    switch (sys_.kind) {
      case SystemKind::Proposed: {
        auto& s = states_[node];
        if (s.is_relay) return rf_enqueue(node, {pkt, -1, false});
        protocol_call(node);
        const auto r = proto::forward_decision(s);
        if (r.via_relay) return bcc_enqueue(node, {detail::BccKind::Data, pkt, r.relay, {}});
        return rf_enqueue(node, {pkt, -1, false});
      }
      case SystemKind::FixedRelay:
        if (node == sys_.fixed_relay) return rf_enqueue(node, {pkt, -1, false});
        return bcc_enqueue(node, {detail::BccKind::Data, pkt, sys_.fixed_relay, {}});
      case SystemKind::Baseline: return rf_enqueue(node, {pkt, route_via_[node], false});
      case SystemKind::DirectOnly: return rf_enqueue(node, {pkt, -1, false});
    }
  }

  void resolve(long pkt, bool delivered) {
    auto& p = packets_[pkt];
    if (p.resolved) {
      ++m_.duplicates;
      return;
    }
    p.resolved = true;
    --outstanding_;
    const double t = now_;
    detail::fnv(hash_, &pkt, sizeof pkt);
    detail::fnv(hash_, &t, sizeof t);
    if (!p.counted) return;
    auto& nm = m_.nodes[p.origin];
    if (delivered) {
      ++nm.delivered;
      nm.delay_sum += now_ - p.gen;
      if (opt_.record_delays) nm.delays.push_back(now_ - p.gen);
    } else {
      ++nm.lost;
    }
  }

  // ---- RF CSMA/CA

  void rf_enqueue(int node, detail::RfJob job) {
    rf_[node].q.push_back(job);
    rf_kick(node);
  }

  void rf_kick(int node) {
    auto& m = rf_[node];
    if (m.active || m.q.empty()) return;
    m.active = true;
    m.nb = m.stage = m.tx = 0;
    m.hol_start = now_;
    m.energy = 0.0;
    rf_backoff(node);
  }

  void rf_backoff(int node) {
    auto& m = rf_[node];
    const double w = rf::backoff_window(cfg_.mac.be_min, m.stage, cfg_.mac.be_max);
    const double d = static_cast<double>(backoff_[node].upto(static_cast<std::uint64_t>(w) - 1)) * rf_t_.t_slot;
    book_rf(node, now_, now_ + d, cfg_.rf_power.p_act, EnergyCategory::Active);
    q_.push(now_ + d, EventKind::BackoffExpiry, node, Radio::Rf);
  }

  void rf_cca_start(int node) {
    book_rf(node, now_, now_ + rf_t_.t_cca, cfg_.rf_power.p_cca, EnergyCategory::Cca);
    q_.push(now_ + rf_t_.t_cca, EventKind::CcaResult, node, Radio::Rf);
  }

  void rf_cca_end(int node) {
    auto& m = rf_[node];
    const bool busy = rf_medium_.busy(now_ - rf_t_.t_cca, now_);
    if (!m.q.front().probe) {
      ++m_.rf_mac.cca;
      if (busy) ++m_.rf_mac.cca_busy;
    }
    if (!busy) return rf_transmit(node);
    ++m.nb;
    ++m.stage;
    if (m.nb >= cfg_.mac.m_c) return rf_finish(node, false);
    rf_backoff(node);
  }

  double rf_frame_time(const detail::RfJob& j) const {
    return j.probe ? opt_.probe_bits / cfg_.network.rf_phy_rate_bps : rf_t_.t_data;
  }

  void rf_transmit(int node) {
    auto& m = rf_[node];
    const auto& job = m.q.front();
    const double s = now_ + rf_t_.t_att;
    const double e = s + rf_frame_time(job);
    book_rf(node, now_, s, cfg_.rf_power.p_act, EnergyCategory::Active);
    book_rf(node, s, e, cfg_.rf_power.p_tx, EnergyCategory::Tx);
    m.medium_id = rf_medium_.add(s, e);
    if (!job.probe) ++m_.rf_mac.transmissions;
    q_.push(e, EventKind::TxEnd, node, Radio::Rf);
  }

  void rf_tx_end(int node) {
    auto& m = rf_[node];
    const auto& job = m.q.front();
    const bool collided = opt_.rf_collisions && rf_medium_.overlaps(m.medium_id);
    if (collided) ++m_.rf_collisions;
    const double bits = job.probe ? opt_.probe_bits : cfg_.network.payload_bits;
    bool lost_frame = collided;
    if (!collided)
      lost_frame = job.dst < 0 ? ch_.gateway_frame_fails(node, now_, bits, chan_rng_[node])
                               : ch_.neighbor_frame_fails(node, job.dst, bits, chan_rng_[node]);
    m.failed = lost_frame;
    if (!lost_frame) rf_medium_.add(now_, now_ + rf_t_.t_ack);
    book_rf(node, now_, now_ + rf_t_.t_ack, cfg_.rf_power.p_rx, EnergyCategory::Rx);
    q_.push(now_ + rf_t_.t_ack, EventKind::AckTimeout, node, Radio::Rf);
  }

  void rf_ack_end(int node) {
    auto& m = rf_[node];
    if (!m.failed) return rf_finish(node, true);
    ++m.tx;
    const int max_tx = m.q.front().probe ? 1 : cfg_.mac.m_r;
    if (m.tx >= max_tx) return rf_finish(node, false);
    if (opt_.retry == RetryPolicy::Immediate) return rf_transmit(node);
    m.nb = m.stage = 0;
    rf_backoff(node);
  }

  void rf_finish(int node, bool ok) {
    auto& m = rf_[node];
    const detail::RfJob job = m.q.front();
    m.q.pop_front();
    m.active = false;
    if (!job.probe) {
      auto& st = m_.rf_mac;
      ++st.jobs;
      st.energy_sum += m.energy;
      if (ok) {
        ++st.delivered;
        st.delay_sum += now_ - m.hol_start;
      } else {
        ++st.lost;
      }
      if (!ok)
        resolve(job.pkt, false);
      else if (job.dst < 0)
        resolve(job.pkt, true);
      else
        rf_enqueue(job.dst, {job.pkt, -1, false});
    }
    rf_kick(node);
  }

  // ---- body channel, preamble sampling

  void bcc_enqueue(int node, detail::BccJob job, bool urgent = false) {
    auto& m = bcc_[node];
    if (urgent)
      m.q.insert(m.q.begin() + (m.active ? 1 : 0), std::move(job));
    else
      m.q.push_back(std::move(job));
    bcc_kick(node);
  }

  void bcc_kick(int node) {
    auto& m = bcc_[node];
    if (m.active || m.q.empty()) return;
    m.active = true;
    m.nb = m.stage = m.retx = 0;
    m.hol_start = now_;
    m.energy = 0.0;
    bcc_backoff(node);
  }

  void bcc_backoff(int node) {
    auto& m = bcc_[node];
    const double w = rf::backoff_window(cfg_.mac.be_min, m.stage, cfg_.mac.be_max);
    const double d = static_cast<double>(bcc_rng_[node].upto(static_cast<std::uint64_t>(w) - 1)) * bcc_t_.t_slot;
    m.energy += book_bcc(node, now_, now_ + d, cfg_.bcc_power.p_act, EnergyCategory::Active);
    q_.push(now_ + d, EventKind::BackoffExpiry, node, Radio::Bcc);
  }

  void bcc_cca_start(int node) {
    bcc_[node].energy += book_bcc(node, now_, now_ + bcc_t_.t_cca, cfg_.bcc_power.p_cca, EnergyCategory::Cca);
    q_.push(now_ + bcc_t_.t_cca, EventKind::CcaResult, node, Radio::Bcc);
  }

  void bcc_cca_end(int node) {
    auto& m = bcc_[node];
    const bool busy = bcc_medium_.busy(now_ - bcc_t_.t_cca, now_);
    if (m.q.front().kind == detail::BccKind::Data) {
      ++m_.bcc_mac.cca;
      if (busy) ++m_.bcc_mac.cca_busy;
    }
    if (!busy) return bcc_transmit(node);
    ++m.nb;
    ++m.stage;
    if (m.nb >= cfg_.mac.m_mp) return bcc_finish(node, false);
    bcc_backoff(node);
  }

  // Wake-up latency of `rx` for a preamble starting at t0.
  double wake_delay(int rx, double t0) const {
    const double cycle = cfg_.mac.r_s + cfg_.mac.r_l;
    double pos = std::fmod(t0 - lpl_phase_[rx], cycle);
    if (pos < 0.0) pos += cycle;
    return pos < cfg_.mac.r_l ? 0.0 : cycle - pos;
  }

  // Receiver side of a preamble: listen from wake-up to the end of the preamble.
  double book_wakeup(int rx, double t0) {
    return book_bcc(rx, t0 + wake_delay(rx, t0), t0 + bcc_t_.t_pream, cfg_.bcc_power.p_act, EnergyCategory::Active);
  }

  void bcc_transmit(int node) {
    auto& m = bcc_[node];
    auto& job = m.q.front();
    const auto& p = cfg_.bcc_power;
    const auto& t = bcc_t_;
    double c = now_;
    double e = 0.0;
    auto seg = [&](int who, double len, double pw, EnergyCategory cat) { e += book_bcc(who, c, c + len, pw, cat); };

    e += book_bcc(node, c, c + t.t_pream, p.p_tx, EnergyCategory::Tx);
    if (job.kind == detail::BccKind::Data) {
      e += book_wakeup(job.dst, c);
      c += t.t_pream;
      seg(node, t.t_att, p.p_act, EnergyCategory::Active);
      c += t.t_att;
      seg(node, t.t_rtr, p.p_rx, EnergyCategory::Rx);
      seg(job.dst, t.t_rtr, p.p_tx, EnergyCategory::Tx);
      c += t.t_rtr;
      seg(node, t.t_att, p.p_act, EnergyCategory::Active);
      c += t.t_att;
      seg(node, t.t_data, p.p_tx, EnergyCategory::Tx);
      seg(job.dst, t.t_data, p.p_rx, EnergyCategory::Rx);
      c += t.t_data;
      seg(node, t.t_att, p.p_act, EnergyCategory::Active);
      c += t.t_att;
      seg(node, t.t_ack, p.p_rx, EnergyCategory::Rx);
      seg(job.dst, t.t_ack, p.p_tx, EnergyCategory::Tx);
      c += t.t_ack;
    } else {
      for (int r = 0; r < n_; ++r)
        if (r != node) e += book_wakeup(r, c);
      c += t.t_pream;
      seg(node, t.t_att, p.p_act, EnergyCategory::Active);
      c += t.t_att;
      const double len = job.msg.len_bits / bcc_rate_;
      seg(node, len, p.p_tx, EnergyCategory::Tx);
      for (int r = 0; r < n_; ++r)
        if (r != node) seg(r, len, p.p_rx, EnergyCategory::Rx);
      c += len;
      if (job.kind == detail::BccKind::Token) {
        for (int r = 0; r < n_; ++r) {
          if (r == node) continue;
          seg(node, t.t_att, p.p_act, EnergyCategory::Active);
          c += t.t_att;
          seg(node, t.t_ack, p.p_rx, EnergyCategory::Rx);
          seg(r, t.t_ack, p.p_tx, EnergyCategory::Tx);
          c += t.t_ack;
        }
      }
      if (now_ >= opt_.warmup) m_.control_bits += job.msg.len_bits;
      log_message(job.msg);
    }
    m.energy += e;
    m.medium_id = bcc_medium_.add(now_, c);
    q_.push(c, EventKind::TxEnd, node, Radio::Bcc);
  }

  void bcc_tx_end(int node) {
    auto& m = bcc_[node];
    if (bcc_medium_.overlaps(m.medium_id)) {
      ++m_.bcc_collisions;
      if (++m.retx > opt_.bcc_max_retx) return bcc_finish(node, false);
      m.nb = m.stage = 0;
      return bcc_backoff(node);
    }
    bcc_finish(node, true);
  }

  void bcc_finish(int node, bool ok) {
    auto& m = bcc_[node];
    detail::BccJob job = std::move(m.q.front());
    m.q.pop_front();
    m.active = false;
    switch (job.kind) {
      case detail::BccKind::Data: {
        auto& st = m_.bcc_mac;
        ++st.jobs;
        st.energy_sum += m.energy;
        if (ok) {
          ++st.delivered;
          st.delay_sum += now_ - m.hol_start;
          rf_enqueue(job.dst, {job.pkt, -1, false});
        } else {
          ++st.lost;
          resolve(job.pkt, false);
        }
        break;
      }
      case detail::BccKind::Status:
        if (ok) deliver_status(job.msg);
        break;
      case detail::BccKind::Token:
        if (ok) {
          complete_token(job.msg);
        } else {
          ++m_.token_alarms;
          states_[node].token_pending = false;
          token_in_flight_ = false;
          pump_tokens();
        }
        break;
    }
    bcc_kick(node);
  }

  // ---- protocol

  PerfEstimate estimate_for(double pi_e) {
    const auto it = est_cache_.find(pi_e);
    if (it != est_cache_.end()) {
      if (!it->second) throw UnstableSystem(1.0);
      return *it->second;
    }
    try {
      const auto e = proto::estimate_from_erasure(cfg_, pi_e);
      est_cache_.emplace(pi_e, e);
      return e;
    } catch (const Error&) {
      est_cache_.emplace(pi_e, std::nullopt);
      throw;
    }
  }

  void on_tick(int node) {
    q_.push(now_ + cfg_.network.est_period, EventKind::EstTick, node);
    if (sys_.kind == SystemKind::Baseline) return baseline_route(node);

    auto& s = states_[node];
    if (!s.is_relay) {
      ++m_.rf_power_cycles;
      charge_extra(node, EnergyCategory::Transition, opt_.energy_per_power_cycle);
      rf_enqueue(node, {-1, -1, true});
    }
    s.e_rem = std::max(0.0, cfg_.network.initial_energy - consumed_[node]);
    const double pi_e = ch_.erasure_estimate(node, now_);
    protocol_call(node);
    auto r = proto::param_est_tick(s, ch_.rssi_dbm(node, now_), [&](double) { return estimate_for(pi_e); });
    bcc_enqueue(node, {detail::BccKind::Status, -1, -1, r.status});
    if (r.token) request_token(node);
    monitor();
  }

  void deliver_status(const proto::ControlMessage& msg) {
    for (int k = 0; k < n_; ++k) {
      if (k == msg.src) continue;
      protocol_call(k);
      if (proto::on_status(states_[k], msg)) token_q_.push_back(k);
    }
    pump_tokens();
  }

  void request_token(int node) {
    token_q_.push_back(node);
    pump_tokens();
  }

  void pump_tokens() {
    while (!token_in_flight_ && !token_q_.empty()) {
      const int k = token_q_.front();
      token_q_.pop_front();
      auto msg = proto::revalidate_token(states_[k]);
      if (!msg) continue;
      token_in_flight_ = true;
      bcc_enqueue(k, {detail::BccKind::Token, -1, -1, *msg}, true);
    }
  }

  void complete_token(const proto::ControlMessage& msg) {
    for (auto& s : states_) proto::on_token(s, msg);
    ++m_.relay_changes;
    if (opt_.extended_energy) {
      ++m_.rf_power_cycles;
      charge_extra(msg.new_relay, EnergyCategory::Transition, opt_.energy_per_power_cycle);
    }
    token_in_flight_ = false;
    // Roles are only re-evaluated on STATUS; doing it here lets two nodes with
    // diverged lists bounce the token back and forth.
    monitor();
    pump_tokens();
  }

  void monitor() {
    ++m_.monitor_checks;
    int relays = 0;
    for (const auto& s : states_) relays += s.is_relay ? 1 : 0;
    bool ok = relays == std::min(cfg_.network.n_relays, n_);
    for (const auto& s : states_) {
      for (int r : s.relays)
        if (r < 0 || r >= n_ || !states_[r].is_relay) ok = false;
      if (static_cast<int>(s.relays.size()) != relays) ok = false;
    }
    if (!ok) ++m_.monitor_violations;
  }

  void log_message(const proto::ControlMessage& msg) {
    const auto line = proto::debug_line(now_, msg);
    detail::fnv(hash_, line.data(), line.size());
    if (opt_.record_debug) m_.debug_lines.push_back(line);
  }

  // ---- baseline neighbour fallback

  void baseline_route(int node) {
    route_via_[node] = -1;
    if (!ch_.has_neighbors() || ch_.erasure_estimate(node, now_) < opt_.blocked_threshold) return;
    double best = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < n_; ++k) {
      if (k == node || ch_.erasure_estimate(k, now_) >= opt_.blocked_threshold) continue;
      const double snr = ch_.neighbor_snr_db(node, k);
      if (ch_.neighbor_erasure(node, k) >= opt_.blocked_threshold) continue;
      if (snr > best) {
        best = snr;
        route_via_[node] = k;
      }
    }
  }

  // ---- wrap-up

  void finish() {
    const double end = std::max(now_, opt_.duration);
    m_.end_time = end;
    m_.measured_time = std::max(0.0, end - opt_.warmup);
    std::vector<double> all;
    double delay_sum = 0.0;
    for (int i = 0; i < n_; ++i) {
      auto& nm = m_.nodes[i];
      nm.energy += rf_led_[i].settle(end);
      nm.energy += bcc_led_[i].settle(end);
      nm.energy += extra_[i];
      m_.energy += nm.energy;
      m_.generated += nm.generated;
      m_.delivered += nm.delivered;
      m_.lost += nm.lost;
      delay_sum += nm.delay_sum;
      all.insert(all.end(), nm.delays.begin(), nm.delays.end());
    }
    m_.mean_delay = m_.delivered ? delay_sum / m_.delivered : 0.0;
    m_.p50_delay = percentile(all, 0.5);
    m_.p95_delay = percentile(std::move(all), 0.95);
    m_.control_bps = m_.measured_time > 0.0 ? m_.control_bits / m_.measured_time : 0.0;
    for (const auto& s : states_) m_.stale_tokens += s.stale_tokens;
    m_.max_tokens_in_flight = token_in_flight_max_;
    m_.trace_hash = hash_;
  }

  Config cfg_;
  SimOptions opt_;
  SystemSpec sys_;
  std::uint64_t seed_;
  int n_;
  LinkChannel ch_;
  TimingParams rf_t_, bcc_t_;
  double bcc_rate_ = 0.0;
  bool uses_bcc_ = false;

  EventQueue q_;
  double now_ = 0.0;
  std::vector<Stream> arrivals_, backoff_, chan_rng_, bcc_rng_, phase_rng_;
  std::vector<detail::RfMac> rf_;
  std::vector<detail::BccMac> bcc_;
  std::vector<detail::RadioLedger> rf_led_, bcc_led_;
  std::vector<EnergyBreakdown> extra_;
  std::vector<double> consumed_;
  std::vector<long> generated_;
  std::vector<int> route_via_;
  std::vector<double> lpl_phase_;
  detail::Medium rf_medium_, bcc_medium_;
  std::vector<detail::Packet> packets_;
  long outstanding_ = 0;

  std::vector<proto::NodeProtocolState> states_;
  std::deque<int> token_q_;
  bool token_in_flight_ = false;
  long token_in_flight_max_ = 1;
  std::map<double, std::optional<PerfEstimate>> est_cache_;

  std::uint64_t hash_ = 0xCBF29CE484222325ULL;
  RunMetrics m_;
};

inline RunMetrics run(const Config& cfg, const ChannelModel& channel, const SystemSpec& sys, const SimOptions& opt,
                      std::uint64_t seed) {
  Engine e(cfg, opt, channel, sys, seed);
  return e.run();
}

}  // namespace wban::sim
