#pragma once

// Synthetic RSSI traces for two on-body nodes (torso, trouser pocket) while
// the wearer walks past the gateway carrier: log-distance path loss, body
// shadowing of the torso once the wearer faces away, gait-periodic fading on
// the pocket node and Gaussian measurement noise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "wban/sim/rng.hpp"
#include "wban/sim/trace.hpp"

namespace wban::io {

struct WalkTraceParams {
  double duration = 45.0;       // s
  double sample_period = 0.1;   // s
  double start_distance = 30.0;  // m
  double closing_speed = 1.4;   // m/s, both walkers combined
  double p0_dbm = -40.0;        // RSSI at 1 m
  double path_loss_exp = 2.5;
  double torso_shadow_db = 25.0;  // once facing away
  double shadow_ramp_s = 3.0;     // turn duration
  double pocket_offset_db = 12.0;
  double pocket_away_db = 5.0;
  double gait_hz = 0.9;
  double gait_depth_db = 7.0;
  double noise_db = 3.0;
};

inline sim::RssiTrace walk_trace(const WalkTraceParams& p, std::uint64_t seed) {
  sim::RssiTrace t;
  t.node_names = {"torso", "pocket"};
  t.series.resize(2);
  sim::Stream torso_rng(seed, 0, sim::Purpose::Scenario), pocket_rng(seed, 1, sim::Purpose::Scenario);
  auto gauss = [](sim::Stream& s) {
    // Box-Muller; one variate per call keeps the stream layout simple.
    const double u1 = 1.0 - s.uniform(), u2 = s.uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  };
  const double t_pass = p.start_distance / p.closing_speed;
  const auto n = static_cast<long>(std::floor(p.duration / p.sample_period + 1e-9));
  for (long k = 0; k <= n; ++k) {
    const double time = std::round(k * p.sample_period * 1e6) / 1e6;
    const double d = std::max(1.0, std::abs(p.start_distance - p.closing_speed * time));
    const double base = p.p0_dbm - 10.0 * p.path_loss_exp * std::log10(d);
    const double away = std::clamp((time - t_pass) / p.shadow_ramp_s, 0.0, 1.0);
    const double torso = base - away * p.torso_shadow_db + p.noise_db * gauss(torso_rng);
    const double gait = p.gait_depth_db * 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * p.gait_hz * time));
    const double pocket =
        base - p.pocket_offset_db - away * p.pocket_away_db - gait + p.noise_db * gauss(pocket_rng);
    // Two decimals, like a transceiver's RSSI register dump.
    t.series[0].push_back({time, std::round(torso * 100.0) / 100.0});
    t.series[1].push_back({time, std::round(pocket * 100.0) / 100.0});
  }
  return t;
}

}  // namespace wban::io
