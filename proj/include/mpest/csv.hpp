#pragma once

// CSV with '#'-prefixed metadata lines above the header row. Doubles are
// written with 17 significant digits so a re-parse reproduces them exactly.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mpest/errors.hpp"

namespace mpest::csv {

inline constexpr const char* kToolVersion = "0.1.0";

struct Metadata {
  std::uint64_t master_seed = 0;
  std::uint64_t config_hash = 0;
  std::vector<std::string> extra;  // additional "key: value" lines
};

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string hex64(std::uint64_t x) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

inline void write_metadata(std::ostream& os, const Metadata& meta) {
  os << "# tool: mpest " << kToolVersion << '\n';
  os << "# master_seed: " << meta.master_seed << '\n';
  os << "# config_hash: " << hex64(meta.config_hash) << '\n';
  for (const auto& line : meta.extra) os << "# " << line << '\n';
}

inline void write_row(std::ostream& os, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
  os << '\n';
}

struct Table {
  std::vector<std::string> comments;  // without the leading '#'
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw DomainError("csv: no column '" + name + "'");
  }
};

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline Table read(std::istream& is) {
  Table t;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      t.comments.push_back(line.substr(line.size() > 1 && line[1] == ' ' ? 2 : 1));
    } else if (t.header.empty()) {
      t.header = split_line(line);
    } else {
      t.rows.push_back(split_line(line));
    }
  }
  return t;
}

inline double parse_double(const std::string& s) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw DomainError("csv: not a number: '" + s + "'");
  return value;
}

}  // namespace mpest::csv
