#pragma once

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace stepseq {

/// Round-trip-exact decimal rendering of a double (17 significant digits).
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Minimal comma-separated writer: a header row, then value rows. Columns
/// are fixed at construction; each row must match the header width.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, std::initializer_list<const char*> columns)
      : os_(path), n_cols_(columns.size()) {
    if (!os_) throw std::runtime_error("csv: cannot open " + path);
    bool first = true;
    for (const char* c : columns) {
      if (!first) os_ << ',';
      os_ << c;
      first = false;
    }
    os_ << '\n';
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != n_cols_) throw std::logic_error("csv: row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os_ << ',';
      os_ << cells[i];
    }
    os_ << '\n';
  }

 private:
  std::ofstream os_;
  std::size_t n_cols_;
};

}  // namespace stepseq
