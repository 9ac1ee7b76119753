// This file is part of the dmn toolkit, a deep material network library
// for concurrent multiscale simulation of fiber reinforced composites.
//
// SPDX-License-Identifier: MIT

#pragma once

#include <string>
#include <vector>

namespace dmn::csv {

/// A CSV file split into a header row and data rows. Blank lines are
/// dropped, trailing carriage returns stripped; no quoting support (none of
/// the toolkit formats need it).
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;  ///< source line of each row, for messages
};

/// Throws Error(io) when the file cannot be opened, Error(data) when it has
/// no header row.
Table read_csv(const std::string& path);

/// Strict double parse; `context` should read like "file:line: field N".
/// Throws Error(data).
double parse_number(const std::string& field, const std::string& context);

}  // namespace dmn::csv
