#pragma once

// Reader for the small TOML subset used by config and sweep files:
// [dotted.sections], key = value, '#' comments, numbers, booleans,
// "strings" and (nested) arrays of those.

#include <charconv>
#include <cctype>
#include <istream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "wban/error.hpp"

namespace wban::io {

struct Value {
  std::variant<double, bool, std::string, std::vector<Value>> v;

  bool is_number() const { return std::holds_alternative<double>(v); }
  bool is_bool() const { return std::holds_alternative<bool>(v); }
  bool is_string() const { return std::holds_alternative<std::string>(v); }
  bool is_array() const { return std::holds_alternative<std::vector<Value>>(v); }

  double number() const {
    if (!is_number()) throw ConfigError({"expected a number"});
    return std::get<double>(v);
  }
  bool boolean() const {
    if (!is_bool()) throw ConfigError({"expected true or false"});
    return std::get<bool>(v);
  }
  const std::string& string() const {
    if (!is_string()) throw ConfigError({"expected a quoted string"});
    return std::get<std::string>(v);
  }
  const std::vector<Value>& array() const {
    if (!is_array()) throw ConfigError({"expected an array"});
    return std::get<std::vector<Value>>(v);
  }
  std::vector<double> numbers() const {
    std::vector<double> out;
    if (is_number()) return {number()};
    for (const auto& x : array()) out.push_back(x.number());
    return out;
  }
};

struct Entry {
  std::string key;  // section.key
  Value value;
  std::size_t line = 0;
};

// Shortest representation that parses back to the same double.
inline std::string format_number(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

namespace detail {

class ValueParser {
 public:
  ValueParser(std::string_view s, std::size_t line) : s_(s), line_(line) {}

  Value parse_all() {
    Value v = parse();
    skip_ws();
    if (i_ != s_.size()) fail("trailing characters after value");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(line_, what); }

  void skip_ws() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
  }

  Value parse() {
    skip_ws();
    if (i_ >= s_.size()) fail("missing value");
    const char c = s_[i_];
    if (c == '"') return parse_string();
    if (c == '[') return parse_array();
    if (s_.substr(i_, 4) == "true") {
      i_ += 4;
      return {true};
    }
    if (s_.substr(i_, 5) == "false") {
      i_ += 5;
      return {false};
    }
    return parse_number();
  }

  Value parse_string() {
    std::string out;
    ++i_;
    while (i_ < s_.size() && s_[i_] != '"') {
      if (s_[i_] == '\\' && i_ + 1 < s_.size()) ++i_;
      out += s_[i_++];
    }
    if (i_ >= s_.size()) fail("unterminated string");
    ++i_;
    return {out};
  }

  Value parse_array() {
    std::vector<Value> out;
    ++i_;
    skip_ws();
    if (i_ < s_.size() && s_[i_] == ']') {
      ++i_;
      return {out};
    }
    for (;;) {
      out.push_back(parse());
      skip_ws();
      if (i_ >= s_.size()) fail("unterminated array");
      if (s_[i_] == ']') {
        ++i_;
        return {out};
      }
      if (s_[i_] != ',') fail("expected ',' or ']' in array");
      ++i_;
      skip_ws();
      if (i_ < s_.size() && s_[i_] == ']') {
        ++i_;
        return {out};
      }
    }
  }

  Value parse_number() {
    std::size_t j = i_;
    while (j < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[j])) || s_[j] == '.' || s_[j] == '-' ||
                             s_[j] == '+' || s_[j] == '_'))
      ++j;
    std::string tok(s_.substr(i_, j - i_));
    std::erase(tok, '_');
    i_ = j;
    if (tok == "inf" || tok == "+inf") return {std::numeric_limits<double>::infinity()};
    if (tok == "-inf") return {-std::numeric_limits<double>::infinity()};
    double x = 0.0;
    const char* b = tok.data();
    if (!tok.empty() && tok[0] == '+') ++b;
    const auto r = std::from_chars(b, tok.data() + tok.size(), x);
    if (tok.empty() || r.ec != std::errc() || r.ptr != tok.data() + tok.size()) fail("not a value: '" + tok + "'");
    return {x};
  }

  std::string_view s_;
  std::size_t line_;
  std::size_t i_ = 0;
};

inline std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_str = !in_str;
    if (line[i] == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline int bracket_depth(const std::string& s) {
  int d = 0;
  bool in_str = false;
  for (char c : s) {
    if (c == '"') in_str = !in_str;
    if (in_str) continue;
    d += c == '[';
    d -= c == ']';
  }
  return d;
}

}  // namespace detail

inline Value parse_value(const std::string& text, std::size_t line = 0) {
  return detail::ValueParser(text, line).parse_all();
}

// Flat list of entries in file order. Arrays may span several lines.
inline std::vector<Entry> parse_toml(std::istream& in) {
  std::vector<Entry> out;
  std::string section, raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = detail::trim(detail::strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[' && line.find('=') == std::string::npos) {
      if (line.back() != ']') throw ParseError(lineno, "malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ParseError(lineno, "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, "expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(lineno, "missing key");
    std::string value = detail::trim(line.substr(eq + 1));
    const std::size_t start = lineno;
    while (detail::bracket_depth(value) > 0 && std::getline(in, raw)) {
      ++lineno;
      value += ' ' + detail::trim(detail::strip_comment(raw));
    }
    out.push_back({section.empty() ? key : section + "." + key, parse_value(value, start), start});
  }
  return out;
}

}  // namespace wban::io
