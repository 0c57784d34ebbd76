#pragma once

/// @file csv.hpp
/// Deterministic CSV emission: fixed column order, `%.17g` number formatting
/// (shortest round-trippable form for doubles), no locale dependence. Two
/// runs with the same inputs produce byte-identical files.

#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "cipad/types.hpp"

namespace cipad {

/// Round-trippable decimal form of a double (17 significant digits).
inline std::string csv_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_num(index_t v) { return std::to_string(v); }
inline std::string csv_num(int v) { return std::to_string(v); }

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::vector<std::string>& add_row() {
    rows.emplace_back();
    rows.back().reserve(columns.size());
    return rows.back();
  }

  void write(std::ostream& out) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      out << (i ? "," : "") << columns[i];
    out << "\n";
    for (const auto& row : rows) {
      require(row.size() == columns.size(), "CsvTable: ragged row");
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
      out << "\n";
    }
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);  // binary: no newline mangling
    require(static_cast<bool>(out), "CsvTable: cannot open " + path);
    write(out);
  }
};

}  // namespace cipad
