#pragma once

// Small readers/writers for the plain-text fixture formats.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "abbo/error.hpp"

namespace abbo::io {

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline double parseDouble(const std::string& text, const std::string& where) {
  const char* begin = text.c_str();
  while (*begin == ' ') ++begin;
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  while (end && (*end == ' ' || *end == '\r')) ++end;
  if (end == begin || (end && *end != '\0') || !std::isfinite(v)) {
    throw FixtureError(where + ": cannot parse number '" + text + "'");
  }
  return v;
}

inline std::ifstream openInput(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FixtureError("cannot open '" + path + "'");
  return in;
}

/// Rows of a numeric whitespace/tab separated matrix file.
inline std::vector<std::vector<double>> readNumericTable(const std::string& path) {
  auto in = openInput(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) row.push_back(parseDouble(tok, path + ":" + std::to_string(lineNo)));
    rows.push_back(std::move(row));
  }
  return rows;
}

/// CSV keyed by the first column (`sequence,...`), header line required.
/// Returns the header and a key -> values map.
struct KeyedTable {
  std::vector<std::string> header;
  std::map<std::string, std::vector<double>> rows;
};

inline KeyedTable readKeyedCsv(const std::string& path) {
  auto in = openInput(path);
  KeyedTable table;
  std::string line;
  if (!std::getline(in, line)) throw FixtureError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  table.header = split(line, ',');
  if (table.header.size() < 2 || table.header[0] != "sequence") {
    throw FixtureError(path + ": header must start with 'sequence'");
  }
  std::size_t lineNo = 1;
  while (std::getline(in, line)) {
    ++lineNo;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line, ',');
    if (fields.size() != table.header.size()) {
      throw FixtureError(path + ":" + std::to_string(lineNo) + ": expected " +
                         std::to_string(table.header.size()) + " fields, got " +
                         std::to_string(fields.size()));
    }
    std::vector<double> values;
    values.reserve(fields.size() - 1);
    for (std::size_t k = 1; k < fields.size(); ++k) {
      values.push_back(parseDouble(fields[k], path + ":" + std::to_string(lineNo)));
    }
    if (!table.rows.emplace(fields[0], std::move(values)).second) {
      throw FixtureError(path + ": duplicate key '" + fields[0] + "'");
    }
  }
  return table;
}

/// Full-precision decimal rendering used in every CSV the library writes.
inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace abbo::io
