#pragma once

// Analytic model of the body-coupled low-power-listening MAC: preamble
// contention, wake-up/RTR handshake, data phase and sender/receiver energy.

#include <vector>

#include "wban/core.hpp"
#include "wban/numerics.hpp"
#include "wban/rf_model.hpp"

namespace wban::bcc {

struct BccModelInput {
  int n_nodes = 4;
  int n_relays = 2;
  double load_forwarded = 0.0;
  MacParams mac;
  TimingParams timing = bcc_default_timing();
  PowerProfile power = bcc_default_power();
  numerics::FixedPointProblem solver;
};

struct WakeupTiming {
  double mean_t_w = 0.0;
  double mean_t_a = 0.0;
  double mean_t_b = 0.0;
  double t2 = 0.0;
  double t_pream = 0.0;
};

struct BccEnergy {
  double send = 0.0;
  double recv = 0.0;
  double total = 0.0;
};

struct BccModelSolution {
  double sigma_cca = 0.0;
  double mean_hol_delay = 0.0;
  double t2 = 0.0;
  double t3 = 0.0;
  double mean_delay = 0.0;
  double mean_t_a = 0.0;
  double mean_t_b = 0.0;
  double mean_t_w = 0.0;
  double pi_loss = 0.0;
  double utilization = 0.0;
  double energy_send = 0.0;
  double energy_recv = 0.0;
  double mean_energy = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

inline WakeupTiming wakeup_timing(const MacParams& mac, const TimingParams& timing) {
  if (!(mac.r_s + mac.r_l > 0.0)) throw InvalidDutyCycle("r_s + r_l must be > 0");
  WakeupTiming w;
  w.t_pream = preamble_duration(timing, mac);
  if (w.t_pream < mac.r_s)
    throw InvalidDutyCycle("preamble " + std::to_string(w.t_pream) + " s cannot bridge sleep interval " +
                           std::to_string(mac.r_s) + " s");
  w.mean_t_w = mac.r_s / 2.0;
  w.mean_t_a = w.mean_t_w * mac.r_s / (mac.r_s + mac.r_l);
  w.mean_t_b = w.t_pream - w.mean_t_a;
  w.t2 = w.t_pream + timing.t_att + timing.t_rtr;
  return w;
}

inline double data_phase_delay(const TimingParams& t) { return t.t_data + 2.0 * t.t_att + t.t_ack; }

inline double preamble_hol_delay(double sigma, const MacParams& mac, const TimingParams& t) {
  return rf::hol_cca_delay(sigma, mac.m_mp, mac.be_min, mac.be_max, t.t_slot, t.t_cca);
}

// Sender energy splits the HOL time into CCA time (expected CCA count of the
// contention round times t_cca) and active backoff for the remainder.
inline BccEnergy bcc_energy(double sigma, double hol, const WakeupTiming& w, const MacParams& mac,
                            const TimingParams& t, const PowerProfile& p) {
  const double cca_time = rf::cca_round_count(sigma, mac.m_mp) * t.t_cca;
  const double contention = (hol - cca_time) * p.p_act + cca_time * p.p_cca;
  const double handshake = w.t_pream * p.p_tx + t.t_att * p.p_act + t.t_rtr * p.p_rx;
  const double data = t.t_data * p.p_tx + 2.0 * t.t_att * p.p_act + t.t_ack * p.p_rx;
  BccEnergy e;
  e.send = contention + handshake + data;
  e.recv = mac.r_s * p.p_sleep + w.mean_t_b * p.p_act + t.t_rtr * p.p_tx + t.t_data * p.p_rx + t.t_ack * p.p_tx;
  e.total = e.send + e.recv;
  return e;
}

inline BccModelSolution solve_bcc(const BccModelInput& in) {
  if (in.n_relays > in.n_nodes) throw Error("CONFIG", "n_relays exceeds n_nodes");
  if (!(in.load_forwarded >= 0.0)) throw Error("CONFIG", "forwarded load must be >= 0");

  const auto w = wakeup_timing(in.mac, in.timing);
  const double t3 = data_phase_delay(in.timing);
  const double contenders = std::max(0, in.n_nodes - in.n_relays - 1);
  const double lambda = in.load_forwarded;
  const double t_busy = in.timing.t_cca + in.timing.t_data + in.timing.t_att + in.timing.t_ack;
  const int m_mp = in.mac.m_mp;

  BccModelSolution s;
  if (lambda > 0.0 && contenders > 0.0) {
    numerics::FixedPointProblem fp = in.solver;
    fp.probability_coords = {true, false};
    fp.map = [&](const std::vector<double>& x) {
      const double sigma = x[0], hol = x[1];
      const double hol_new = preamble_hol_delay(sigma, in.mac, in.timing);
      const double loss = std::pow(sigma, m_mp);
      const double one_minus_rho = std::max(0.0, 1.0 - lambda * (hol + w.t2 + t3));
      const double sigma_new = contenders * (1.0 - loss) * t_busy / (one_minus_rho / lambda + hol);
      return std::vector<double>{sigma_new, hol_new};
    };
    const auto r = numerics::solve_fixed_point(fp, {0.0, preamble_hol_delay(0.0, in.mac, in.timing)});
    s.sigma_cca = r.solution[0];
    s.residual = r.residual;
    s.iterations = r.iterations;
  }
  s.mean_hol_delay = preamble_hol_delay(s.sigma_cca, in.mac, in.timing);
  s.t2 = w.t2;
  s.t3 = t3;
  s.mean_delay = s.mean_hol_delay + s.t2 + s.t3;
  s.mean_t_a = w.mean_t_a;
  s.mean_t_b = w.mean_t_b;
  s.mean_t_w = w.mean_t_w;
  s.pi_loss = std::pow(s.sigma_cca, m_mp);
  s.utilization = lambda * s.mean_delay;
  if (s.utilization >= 1.0) throw UnstableSystem(s.utilization);
  const auto e = bcc_energy(s.sigma_cca, s.mean_hol_delay, w, in.mac, in.timing, in.power);
  s.energy_send = e.send;
  s.energy_recv = e.recv;
  s.mean_energy = e.total;
  return s;
}

inline BccModelInput bcc_input_from_config(const Config& c) {
  BccModelInput in;
  in.n_nodes = c.network.n_nodes;
  in.n_relays = c.network.n_relays;
  in.load_forwarded = load_forwarded(c.network);
  in.mac = c.mac;
  in.timing = c.bcc_timing;
  in.power = c.bcc_power;
  return in;
}

}  // namespace wban::bcc
