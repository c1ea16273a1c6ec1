#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "iontweez/errors.hpp"
#include "iontweez/types.hpp"

namespace iontweez {

/// Round-trip formatting for numeric CSV cells.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// CSV table with a header row and a units row. Values are SI.
class CsvTable {
 public:
  CsvTable(std::vector<std::string> header, std::vector<std::string> units)
      : header_(std::move(header)), units_(std::move(units)) {
    if (header_.size() != units_.size()) throw ConfigError("csv: header and units differ in length");
  }

  void add_row(const std::vector<std::string>& cells) {
    if (cells.size() != header_.size()) throw ConfigError("csv: row width mismatch");
    rows_.push_back(cells);
  }

  void add_row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_number(v));
    add_row(cells);
  }

  std::size_t rows() const { return rows_.size(); }

  std::string str() const {
    std::ostringstream os;
    write_line(os, header_);
    write_line(os, units_);
    for (const auto& r : rows_) write_line(os, r);
    return os.str();
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("csv: cannot write " + path.string());
    out << str();
  }

 private:
  static void write_line(std::ostream& os, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << '\n';
  }

  std::vector<std::string> header_;
  std::vector<std::string> units_;
  std::vector<std::vector<std::string>> rows_;
};

/// Square matrix as CSV with columns i, j, value.
inline CsvTable matrix_table(const Mat& m, const std::string& name, const std::string& unit) {
  CsvTable t({"i", "j", name}, {"1", "1", unit});
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      t.add_row({static_cast<double>(i), static_cast<double>(j), m(i, j)});
    }
  }
  return t;
}

/// Parsed CSV body (header and units rows split off).
struct CsvData {
  std::vector<std::string> header;
  std::vector<std::string> units;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    throw ConfigError("csv: missing column " + name);
  }
};

inline CsvData read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("csv: cannot open " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  CsvData d;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("csv: empty file " + path.string());
  d.header = split(line);
  if (!std::getline(in, line)) throw ConfigError("csv: missing units row in " + path.string());
  d.units = split(line);
  int lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != d.header.size()) {
      throw ConfigError("csv: width mismatch at line " + std::to_string(lineno));
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      try {
        row.push_back(std::stod(c));
      } catch (const std::exception&) {
        throw ConfigError("csv: non-numeric cell at line " + std::to_string(lineno));
      }
    }
    d.rows.push_back(std::move(row));
  }
  return d;
}

}  // namespace iontweez
