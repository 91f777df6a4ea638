#pragma once

// Per-node RSSI time series with last-observation-carried-forward lookup.

#include <algorithm>
#include <string>
#include <vector>

#include "wban/error.hpp"

namespace wban::sim {

struct RssiSample {
  double time_s = 0.0;
  double rssi_dbm = 0.0;
};

struct RssiTrace {
  std::vector<std::string> node_names;         // index = trace node
  std::vector<std::vector<RssiSample>> series;  // per node, nondecreasing time

  int node_index(const std::string& name) const {
    const auto it = std::find(node_names.begin(), node_names.end(), name);
    return it == node_names.end() ? -1 : static_cast<int>(it - node_names.begin());
  }

  double duration() const {
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (const auto& s : series) {
      if (s.empty()) continue;
      lo = first ? s.front().time_s : std::min(lo, s.front().time_s);
      hi = first ? s.back().time_s : std::max(hi, s.back().time_s);
      first = false;
    }
    return hi - lo;
  }

  // Before the first sample the first value applies.
  double rssi_at(int node, double t) const {
    const auto& s = series.at(node);
    if (s.empty()) throw EmptyTrace("no samples for node " + node_names.at(node));
    auto it = std::upper_bound(s.begin(), s.end(), t, [](double v, const RssiSample& x) { return v < x.time_s; });
    if (it == s.begin()) return s.front().rssi_dbm;
    return std::prev(it)->rssi_dbm;
  }
};

}  // namespace wban::sim
