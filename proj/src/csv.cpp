// This file is part of the dmn toolkit, a deep material network library
// for concurrent multiscale simulation of fiber reinforced composites.
//
// SPDX-License-Identifier: MIT

#include <dmn/csv.hpp>

#include <fstream>
#include <stdexcept>

#include <dmn/error.hpp>

namespace dmn::csv {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = line.find(',', pos);
    if (next == std::string::npos) {
      fields.push_back(line.substr(pos));
      return fields;
    }
    fields.push_back(line.substr(pos, next - pos));
    pos = next + 1;
  }
}

}  // namespace

Table read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error::io("cannot open '" + path + "' for reading");

  Table table;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (table.header.empty()) {
      table.header = split_fields(line);
    } else {
      table.rows.push_back(split_fields(line));
      table.line_numbers.push_back(lineno);
    }
  }
  if (table.header.empty()) {
    throw Error::data(path + ": empty file, expected a header row");
  }
  return table;
}

double parse_number(const std::string& field, const std::string& context) {
  try {
    std::size_t used = 0;
    const double value = std::stod(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    return value;
  } catch (const std::exception&) {
    throw Error::data(context + ": not a number: '" + field + "'");
  }
}

}  // namespace dmn::csv
