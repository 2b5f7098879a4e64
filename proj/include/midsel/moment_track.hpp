#pragma once
// Time-stamped moment rows shared by every solver, and their CSV form:
//   t,rho,xbar,M2..MK,S0..SK,<extras in insertion order>
// Numbers are written in shortest round-trip form so reruns are byte-identical.

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "midsel/error.hpp"

namespace midsel {

inline constexpr int kCsvSchemaVersion = 1;

struct MomentTrack {
  double t = 0.0;
  double rho = 0.0;
  double xbar = 0.0;
  std::vector<double> M;  // M[k], k = 0..K, with M[0] = 1 and M[1] = 0
  std::vector<double> S;  // S[k], k = 0..K
  std::vector<std::pair<std::string, double>> extras;

  int order() const noexcept { return M.empty() ? 0 : static_cast<int>(M.size()) - 1; }

  void set_extra(const std::string& name, double v) {
    for (auto& [k, x] : extras)
      if (k == name) {
        x = v;
        return;
      }
    extras.emplace_back(name, v);
  }
  std::optional<double> extra(const std::string& name) const {
    for (const auto& [k, x] : extras)
      if (k == name) return x;
    return std::nullopt;
  }
};

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string> csv_header(const MomentTrack& row) {
  std::vector<std::string> h{"t", "rho", "xbar"};
  for (int k = 2; k <= row.order(); ++k) h.push_back("M" + std::to_string(k));
  for (std::size_t k = 0; k < row.S.size(); ++k) h.push_back("S" + std::to_string(k));
  for (const auto& e : row.extras) h.push_back(e.first);
  return h;
}

/// All rows must share the column layout of the first one.
inline void write_csv(std::ostream& os, const std::vector<MomentTrack>& rows) {
  if (rows.empty()) return;
  const auto header = csv_header(rows.front());
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n';
  for (const auto& r : rows) {
    if (csv_header(r) != header) throw Error("moment track rows have inconsistent columns at t=" + format_number(r.t));
    os << format_number(r.t) << ',' << format_number(r.rho) << ',' << format_number(r.xbar);
    for (int k = 2; k <= r.order(); ++k) os << ',' << format_number(r.M[k]);
    for (double s : r.S) os << ',' << format_number(s);
    for (const auto& e : r.extras) os << ',' << format_number(e.second);
    os << '\n';
  }
}

inline void write_csv(const std::string& path, const std::vector<MomentTrack>& rows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path + " for writing");
  write_csv(f, rows);
}

/// Column-oriented view of a CSV written by write_csv.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw Error("missing column '" + name + "'");
  }
  std::vector<double> column(const std::string& name) const {
    const auto i = index(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[i]);
    return out;
  }
};

inline CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  if (!std::getline(is, line)) return t;
  t.columns = split(line);
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != t.columns.size())
      throw Error("csv line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) + " cells");
    std::vector<double> row;
    for (const auto& c : cells) {
      if (c == "nan") row.push_back(std::nan(""));
      else if (c == "inf" || c == "-inf") row.push_back(c[0] == '-' ? -INFINITY : INFINITY);
      else {
        double v = 0.0;
        auto res = std::from_chars(c.data(), c.data() + c.size(), v);
        if (res.ec != std::errc{}) throw Error("csv line " + std::to_string(lineno) + ": bad number '" + c + "'");
        row.push_back(v);
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path);
  return read_csv(f);
}

}  // namespace midsel
