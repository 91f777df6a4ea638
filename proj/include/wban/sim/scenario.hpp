#pragma once

// On-body placement: mean SNR of every node-to-gateway link and of every
// node-to-node RF link. -inf dB marks a fully blocked link.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "wban/error.hpp"
#include "wban/sim/rng.hpp"

namespace wban::sim {

enum class ScenarioKind { Scenario1, Scenario2, Custom };

inline constexpr double kBlockedDb = -std::numeric_limits<double>::infinity();

struct ScenarioParams {
  ScenarioKind kind = ScenarioKind::Scenario1;
  double los_snr_db = 20.0;
  double nlos_snr_db = 5.0;
  double neighbor_snr_db = 15.0;
  double min_los_fraction = 0.5;
  // Custom only
  std::vector<double> gateway_snr_db;
  std::vector<std::vector<double>> neighbor_matrix_db;
};

struct BodyScenario {
  std::vector<double> gateway_snr_db;
  std::vector<std::vector<double>> neighbor_snr_db;
  std::vector<bool> los;
};

inline BodyScenario body_scenario(const ScenarioParams& p, int n_nodes, std::uint64_t seed) {
  if (n_nodes < 1) throw ScenarioError("scenario needs at least one node");
  BodyScenario s;
  s.los.assign(n_nodes, false);
  s.gateway_snr_db.assign(n_nodes, p.nlos_snr_db);
  s.neighbor_snr_db.assign(n_nodes, std::vector<double>(n_nodes, p.neighbor_snr_db));

  if (p.kind == ScenarioKind::Custom) {
    if (static_cast<int>(p.gateway_snr_db.size()) != n_nodes)
      throw ScenarioError("custom scenario needs one gateway SNR per node");
    s.gateway_snr_db = p.gateway_snr_db;
    if (!p.neighbor_matrix_db.empty()) {
      if (static_cast<int>(p.neighbor_matrix_db.size()) != n_nodes)
        throw ScenarioError("custom neighbor matrix must be N x N");
      for (const auto& row : p.neighbor_matrix_db)
        if (static_cast<int>(row.size()) != n_nodes) throw ScenarioError("custom neighbor matrix must be N x N");
      s.neighbor_snr_db = p.neighbor_matrix_db;
    }
    for (int i = 0; i < n_nodes; ++i) s.los[i] = s.gateway_snr_db[i] >= p.los_snr_db;
    return s;
  }

  Stream rng(seed, -1, Purpose::Scenario);
  std::vector<int> order(n_nodes);
  std::iota(order.begin(), order.end(), 0);
  for (int i = n_nodes - 1; i > 0; --i) std::swap(order[i], order[rng.upto(i)]);

  const int half = (n_nodes + 1) / 2;
  int n_los = half;
  if (p.kind == ScenarioKind::Scenario1) {
    const int lo = std::max(half, static_cast<int>(std::ceil(p.min_los_fraction * n_nodes)));
    const int hi = std::max(lo, n_nodes - 1);
    n_los = std::min(n_nodes, lo + static_cast<int>(rng.upto(hi - lo)));
  }
  for (int k = 0; k < n_los; ++k) s.los[order[k]] = true;
  for (int i = 0; i < n_nodes; ++i) {
    s.gateway_snr_db[i] = s.los[i] ? p.los_snr_db : (p.kind == ScenarioKind::Scenario2 ? kBlockedDb : p.nlos_snr_db);
    if (p.kind == ScenarioKind::Scenario2 && !s.los[i])
      for (int j = 0; j < n_nodes; ++j) s.neighbor_snr_db[i][j] = s.neighbor_snr_db[j][i] = kBlockedDb;
  }
  return s;
}

inline std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::Scenario1: return "scenario1";
    case ScenarioKind::Scenario2: return "scenario2";
    case ScenarioKind::Custom: return "custom";
  }
  return "?";
}

}  // namespace wban::sim
