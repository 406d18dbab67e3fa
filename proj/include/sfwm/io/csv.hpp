#pragma once

// Plot-ready CSV: '#'-prefixed metadata lines, one header line, numeric rows.

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sfwm/errors.hpp"

namespace sfwm::io {

using Metadata = std::vector<std::pair<std::string, std::string>>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw UsageError("CSV has no column '" + name + "'");
  }
  std::vector<double> values(std::size_t col) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[col]);
    return out;
  }
};

// 12 significant digits; round-trips well beyond the 9 digits the files promise.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline void write_csv(std::ostream& os, const Metadata& meta, const Table& t) {
  for (const auto& [k, v] : meta) os << "# " << k << "=" << v << "\n";
  for (std::size_t i = 0; i < t.columns.size(); ++i)
    os << (i ? "," : "") << t.columns[i];
  os << "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_number(row[i]);
    os << "\n";
  }
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& text, const std::string& where) {
  const std::string s = trim(text);
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw UsageError(where + ": '" + s + "' is not a number");
  }
}

/// Reads a table written by write_csv (or any comma-separated numeric file
/// with one header line). Metadata lines are returned through `meta` if given.
inline Table read_csv(std::istream& is, Metadata* meta = nullptr) {
  Table t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string s = trim(line);
    if (s.empty()) continue;
    if (s[0] == '#') {
      if (meta) {
        const auto body = trim(s.substr(1));
        const auto eq = body.find('=');
        if (eq != std::string::npos) meta->emplace_back(body.substr(0, eq), body.substr(eq + 1));
      }
      continue;
    }
    const auto cells = split(s, ',');
    if (t.columns.empty()) {
      for (const auto& c : cells) t.columns.push_back(trim(c));
      continue;
    }
    if (cells.size() != t.columns.size())
      throw UsageError("CSV line " + std::to_string(line_no) + ": expected " +
                       std::to_string(t.columns.size()) + " fields, got " +
                       std::to_string(cells.size()));
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(parse_double(c, "CSV line " + std::to_string(line_no)));
    t.rows.push_back(std::move(row));
  }
  if (t.columns.empty()) throw UsageError("CSV has no header line");
  return t;
}

}  // namespace sfwm::io
