#pragma once

// Analytic model of unslotted 802.15.4 CSMA/CA towards the gateway: per-link
// erasures, the network-wide CCA-busy fixed point, head-of-line delay,
// loss and per-packet transmission energy.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "wban/core.hpp"
#include "wban/numerics.hpp"

namespace wban::rf {

struct ModelOptions {
  // Average the bit error rate over Rayleigh fading instead of using the
  // point SNR of the latest measurement.
  bool rayleigh_averaged_ber = false;
  // Count the CCAs of the successful contention round in A_cca. Off keeps
  // the printed formula, which yields A_cca = 0 for loss-free links.
  bool corrected_cca_count = false;
};

inline double bit_error_rate(double snr_linear) {
  return numerics::q_function(std::sqrt(3.0 * std::max(0.0, snr_linear)));
}

// E[Q(sqrt(3 g))] for g exponential with mean `mean_snr`.
inline double bit_error_rate_rayleigh(double mean_snr) {
  const double a = 1.5 * std::max(0.0, mean_snr);
  return 0.5 * (1.0 - std::sqrt(a / (1.0 + a)));
}

inline double packet_error_prob(double ber, double len_bits) {
  if (ber <= 0.0) return 0.0;
  if (ber >= 1.0) return 1.0;
  return -std::expm1(len_bits * std::log1p(-ber));
}

inline double frame_failure_prob(double peb_data, double peb_ack) {
  return 1.0 - (1.0 - peb_data) * (1.0 - peb_ack);
}

inline double erasure_from_snr(double snr_linear, double data_bits, double ack_bits, bool rayleigh_avg = false) {
  const double ber = rayleigh_avg ? bit_error_rate_rayleigh(snr_linear) : bit_error_rate(snr_linear);
  return frame_failure_prob(packet_error_prob(ber, data_bits), packet_error_prob(ber, ack_bits));
}

// Frame failure probability averaged over per-frame Rayleigh fading with mean
// SNR `mean_snr` (Simpson rule over the fading CDF).
inline double erasure_rayleigh(double mean_snr, double data_bits, double ack_bits, int panels = 2000) {
  if (!(mean_snr > 0.0)) return 1.0;
  auto f = [&](double u) {
    if (u >= 1.0) return 0.0;
    return erasure_from_snr(-mean_snr * std::log1p(-u), data_bits, ack_bits);
  };
  const double h = 1.0 / panels;
  double s = f(0.0) + f(1.0);
  for (int i = 1; i < panels; ++i) s += f(i * h) * (i % 2 ? 4.0 : 2.0);
  return std::clamp(s * h / 3.0, 0.0, 1.0);
}

// W_i = 2^(be_min + i), optionally capped at 2^be_max.
inline double backoff_window(int be_min, int stage, int be_max = 0) {
  int be = be_min + stage;
  if (be_max > 0) be = std::min(be, be_max);
  return std::ldexp(1.0, be);
}

// Head-of-line time spent in backoff and CCA for one contention round that
// allows `max_cca` channel checks.
inline double hol_cca_delay(double busy, int max_cca, int be_min, int be_max, double t_slot, double t_cca) {
  const auto mass = numerics::truncated_geometric(busy, max_cca);
  double backoff = 0.0, total = 0.0;
  for (int v = 0; v < max_cca; ++v) {
    backoff += (backoff_window(be_min, v, be_max) - 1.0) / 2.0 * t_slot;
    total += mass[v] * (backoff + (v + 1) * t_cca);
  }
  total += mass[max_cca] * (backoff + (max_cca + 1) * t_cca);
  return total;
}

// Expected number of CCAs in one contention round, counted the same way as
// hol_cca_delay (the exhausted branch counts max_cca + 1).
inline double cca_round_count(double busy, int max_cca) {
  const auto mass = numerics::truncated_geometric(busy, max_cca);
  double n = 0.0;
  for (int v = 0; v < max_cca; ++v) n += mass[v] * (v + 1);
  return n + mass[max_cca] * (max_cca + 1);
}

// Relay-averaged HOL delay with up to `max_tx` transmissions per packet.
inline double hol_delay(std::span<const double> pi_e, int max_tx, double cca_delay, double t_retx) {
  double sum = 0.0;
  for (double e : pi_e) {
    double pw = 1.0;
    for (int k = 0; k < max_tx; ++k) {
      sum += pw * (1.0 - e) * (cca_delay + k * t_retx);
      pw *= e;
    }
  }
  return sum / static_cast<double>(pi_e.size());
}

// A packet is delivered when one of max_tx transmissions survives erasure
// and its contention round does not exhaust max_cca checks.
inline double node_loss(double busy, double pi_e, int max_tx, int max_cca) {
  const double delivered_tx = 1.0 - std::pow(pi_e, max_tx);
  const double access_ok = 1.0 - std::pow(busy, max_cca);
  return 1.0 - delivered_tx * access_ok;
}

inline double average_loss(double busy, std::span<const double> pi_e, int max_tx, int max_cca) {
  double s = 0.0;
  for (double e : pi_e) s += node_loss(busy, e, max_tx, max_cca);
  return s / static_cast<double>(pi_e.size());
}

inline double mean_cca_count(double busy, std::span<const double> pi_e, int max_tx, int max_cca, bool corrected) {
  double s = 0.0;
  for (double e : pi_e) {
    if (corrected)
      s += numerics::geometric_sum(e, max_tx) * (1.0 - e) * cca_round_count(busy, max_cca);
    else
      s += numerics::truncated_geometric_mean(e, max_tx) * numerics::truncated_geometric_mean(busy, max_cca);
  }
  return s / static_cast<double>(pi_e.size());
}

struct RfModelInput {
  std::vector<LinkState> relay_links;
  MacParams mac;
  TimingParams timing = rf_default_timing();
  PowerProfile power = cc2420_power(1.8);
  double load_direct = 0.0;
  double load_forwarded = 0.0;
  ModelOptions options;
  numerics::FixedPointProblem solver;  // only tolerance/iteration/damping fields are read
};

struct RfModelSolution {
  double pi_cca = 0.0;
  double mean_hol_delay = 0.0;
  double mean_delay = 0.0;
  double pi_loss = 0.0;
  double mean_cca_count = 0.0;
  double mean_energy = 0.0;
  double utilization = 0.0;
  double mean_busy_pkts = 1.0;
  double residual = 0.0;
  int iterations = 0;
};

inline double retx_time(const TimingParams& t) { return t.t_att + t.t_data + t.t_ack; }

inline std::vector<double> erasures(const RfModelInput& in) {
  std::vector<double> e;
  e.reserve(in.relay_links.size());
  for (const auto& l : in.relay_links) e.push_back(l.pi_e);
  return e;
}

inline double rf_cca_delay(const RfModelInput& in, double busy) {
  return hol_cca_delay(busy, in.mac.m_c, in.mac.be_min, in.mac.be_max, in.timing.t_slot, in.timing.t_cca);
}

// Transmission energy for a given HOL delay and CCA count.
inline double transmission_energy(double hol, double cca_count, const TimingParams& t, const PowerProfile& p) {
  const double cca_time = cca_count * t.t_cca;
  if (hol < cca_time - 1e-15)
    throw NegativeDuration("HOL delay " + std::to_string(hol) + " s shorter than CCA time " +
                           std::to_string(cca_time) + " s");
  return (hol - cca_time) * p.p_act + p.p_cca * cca_time + t.t_data * p.p_tx + t.t_att * p.p_act +
         t.t_ack * p.p_rx;
}

inline double rf_energy(const RfModelSolution& s, const RfModelInput& in) {
  const auto e = erasures(in);
  const double a = mean_cca_count(s.pi_cca, e, in.mac.m_r, in.mac.m_c, in.options.corrected_cca_count);
  return transmission_energy(s.mean_hol_delay, a, in.timing, in.power);
}

inline RfModelSolution solve_rf(const RfModelInput& in) {
  if (in.relay_links.empty()) throw Error("CONFIG", "rf model needs at least one relay link");
  if (!(in.load_direct >= 0.0 && in.load_forwarded >= 0.0)) throw Error("CONFIG", "rf loads must be >= 0");

  const auto e = erasures(in);
  const double contenders = static_cast<double>(in.relay_links.size()) - 1.0;
  const double lambda = in.load_direct + in.load_forwarded;
  const double t_tx = retx_time(in.timing);
  const double t_busy = in.timing.t_cca + t_tx;
  const int m_r = in.mac.m_r, m_c = in.mac.m_c;

  RfModelSolution s;
  if (lambda > 0.0 && contenders > 0.0) {
    numerics::FixedPointProblem fp = in.solver;
    fp.probability_coords = {true, false};
    fp.map = [&](const std::vector<double>& x) {
      const double busy = x[0], hol = x[1];
      const double hol_new = hol_delay(e, m_r, rf_cca_delay(in, busy), t_tx);
      const double loss = average_loss(busy, e, m_r, m_c);
      // Busy period 1/lambda + E[S] E[D_HOL] with E[S] = 1/(1 - rho); both
      // sides multiplied by (1 - rho) so saturated iterates stay finite.
      const double one_minus_rho = std::max(0.0, 1.0 - lambda * (hol + t_tx));
      const double busy_new = contenders * (1.0 - loss) * t_busy / (one_minus_rho / lambda + hol);
      return std::vector<double>{busy_new, hol_new};
    };
    const auto r = numerics::solve_fixed_point(fp, {0.0, hol_delay(e, m_r, rf_cca_delay(in, 0.0), t_tx)});
    s.pi_cca = r.solution[0];
    s.residual = r.residual;
    s.iterations = r.iterations;
  }
  s.mean_hol_delay = hol_delay(e, m_r, rf_cca_delay(in, s.pi_cca), t_tx);
  s.mean_delay = s.mean_hol_delay + t_tx;
  s.pi_loss = average_loss(s.pi_cca, e, m_r, m_c);
  s.utilization = lambda * s.mean_delay;
  if (s.utilization >= 1.0) throw UnstableSystem(s.utilization);
  s.mean_busy_pkts = 1.0 / (1.0 - s.utilization);
  s.mean_cca_count = mean_cca_count(s.pi_cca, e, m_r, m_c, in.options.corrected_cca_count);
  s.mean_energy = rf_energy(s, in);
  return s;
}

// Delay, loss and energy seen by a single link with erasure `pi_e` under the
// network's solved CCA-busy probability.
struct RfLinkEstimate {
  double mean_hol_delay = 0.0;
  double mean_delay = 0.0;
  double pi_loss = 0.0;
  double mean_cca_count = 0.0;
  double mean_energy = 0.0;
};

inline RfLinkEstimate rf_link_estimate(const RfModelInput& in, double pi_cca, double pi_e) {
  const double e[] = {pi_e};
  RfLinkEstimate out;
  const double t_tx = retx_time(in.timing);
  out.mean_hol_delay = hol_delay(e, in.mac.m_r, rf_cca_delay(in, pi_cca), t_tx);
  out.mean_delay = out.mean_hol_delay + t_tx;
  out.pi_loss = node_loss(pi_cca, pi_e, in.mac.m_r, in.mac.m_c);
  out.mean_cca_count = mean_cca_count(pi_cca, e, in.mac.m_r, in.mac.m_c, in.options.corrected_cca_count);
  out.mean_energy = transmission_energy(out.mean_hol_delay, out.mean_cca_count, in.timing, in.power);
  return out;
}

inline RfModelInput rf_input_from_config(const Config& c, std::vector<LinkState> links) {
  RfModelInput in;
  in.relay_links = std::move(links);
  in.mac = c.mac;
  in.timing = c.rf_timing;
  in.power = c.rf_power;
  in.load_direct = load_direct(c.network);
  in.load_forwarded = load_forwarded(c.network);
  return in;
}

}  // namespace wban::rf
