#pragma once

// RSSI trace CSV: `time_s,node_id,rssi_dbm` per line, '#' starts a comment.
// An optional header row with exactly those column names is skipped.

#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "wban/io/toml_lite.hpp"
#include "wban/sim/trace.hpp"

namespace wban::io {

inline sim::RssiTrace parse_trace(std::istream& in) {
  sim::RssiTrace t;
  std::string raw;
  std::size_t lineno = 0;
  bool seen_row = false;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = detail::trim(detail::strip_comment(raw));
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      f.push_back(detail::trim(line.substr(start, comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (f.size() != 3) throw ParseError(lineno, "expected 3 fields, got " + std::to_string(f.size()));
    if (!seen_row && f[0] == "time_s" && f[1] == "node_id" && f[2] == "rssi_dbm") continue;
    seen_row = true;

    double time = 0.0, rssi = 0.0;
    try {
      time = parse_value(f[0], lineno).number();
      rssi = parse_value(f[2], lineno).number();
    } catch (const ConfigError&) {
      throw ParseError(lineno, "non-numeric field");
    }
    if (!std::isfinite(time)) throw ParseError(lineno, "time must be finite");
    if (f[1].empty()) throw ParseError(lineno, "empty node_id");

    int idx = t.node_index(f[1]);
    if (idx < 0) {
      idx = static_cast<int>(t.node_names.size());
      t.node_names.push_back(f[1]);
      t.series.emplace_back();
    }
    auto& s = t.series[idx];
    if (!s.empty() && time < s.back().time_s)
      throw ParseError(lineno, "time goes backwards for node " + f[1]);
    s.push_back({time, rssi});
  }
  if (t.node_names.empty()) throw EmptyTrace();
  return t;
}

inline sim::RssiTrace load_trace(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("IO", "cannot open " + path);
  return parse_trace(f);
}

// Rows merged by time; equal times keep node order.
inline void write_trace(std::ostream& os, const sim::RssiTrace& t) {
  os << "# time_s,node_id,rssi_dbm\n";
  std::vector<std::size_t> pos(t.series.size(), 0);
  for (;;) {
    int pick = -1;
    for (std::size_t k = 0; k < t.series.size(); ++k) {
      if (pos[k] >= t.series[k].size()) continue;
      if (pick < 0 || t.series[k][pos[k]].time_s < t.series[pick][pos[pick]].time_s) pick = static_cast<int>(k);
    }
    if (pick < 0) break;
    const auto& s = t.series[pick][pos[pick]++];
    os << format_number(s.time_s) << ',' << t.node_names[pick] << ',' << format_number(s.rssi_dbm) << '\n';
  }
}

inline void save_trace(const std::string& path, const sim::RssiTrace& t) {
  std::ofstream f(path);
  if (!f) throw Error("IO", "cannot write " + path);
  write_trace(f, t);
}

}  // namespace wban::io
