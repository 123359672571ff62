#pragma once

// Minimal CSV for the run logs: a "#schema,<name>,<version>" line, a header
// row, then numeric or bare-word cells. Quoting is not supported and not needed.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "adrl/errors.hpp"

namespace adrl::csv {

inline std::string format(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);  // shortest round-trip form
  return {buf, r.ptr};
}

class Writer {
 public:
  Writer(std::ostream& os, const std::string& schema, int version, std::vector<std::string> header)
      : os_(os), width_(header.size()) {
    os_ << "#schema," << schema << ',' << version << '\n';
    write(header);
  }

  void write(const std::vector<std::string>& cells) {
    if (cells.size() != width_) throw ShapeError("csv: row width differs from header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].find_first_of(",\n") != std::string::npos) throw ConfigError("csv: cell contains a separator");
      os_ << (i ? "," : "") << cells[i];
    }
    os_ << '\n';
  }

 private:
  std::ostream& os_;
  std::size_t width_;
};

struct Table {
  std::string schema;
  int version = 0;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a column; throws ConfigError naming the column when absent.
  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw ConfigError("csv: missing column '" + name + "'");
  }

  bool has_column(const std::string& name) const {
    for (const auto& h : header)
      if (h == name) return true;
    return false;
  }

  double number(std::size_t row, std::size_t col) const {
    const std::string& s = rows.at(row).at(col);
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
      throw ConfigError("csv: '" + s + "' in column '" + header.at(col) + "' is not a number");
    return v;
  }

  std::vector<double> numbers(const std::string& name) const {
    const auto c = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) out.push_back(number(r, c));
    return out;
  }
};

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline Table parse(std::istream& is) {
  Table t;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("#schema,", 0) == 0) {
      const auto cells = split(line);
      if (cells.size() != 3) throw ConfigError("csv: malformed schema line");
      t.schema = cells[1];
      t.version = std::stoi(cells[2]);
      continue;
    }
    if (line.front() == '#') continue;
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw ConfigError("csv: row " + std::to_string(t.rows.size() + 1) + " has " + std::to_string(cells.size()) +
                        " cells, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw ConfigError("csv: no header row");
  return t;
}

inline Table read(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("csv: cannot open " + path);
  return parse(is);
}

}  // namespace adrl::csv
