// This file is part of the dmn toolkit, a deep material network library
// for concurrent multiscale simulation of fiber reinforced composites.
//
// SPDX-License-Identifier: MIT

#include <dmn/dataset.hpp>

#include <fstream>
#include <iomanip>
#include <sstream>

#include <dmn/error.hpp>

namespace dmn {

namespace {

constexpr int kTriangle = 21;
const char* const kPrefixes[3] = {"Cf", "Cm", "Ct"};

std::string header_row() {
  std::ostringstream os;
  bool first = true;
  for (const char* prefix : kPrefixes) {
    for (int i = 0; i < 6; ++i) {
      for (int j = i; j < 6; ++j) {
        if (!first) os << ',';
        first = false;
        os << prefix << '_' << (i + 1) << (j + 1);
      }
    }
  }
  return os.str();
}

void write_triangle(std::ostream& os, const Matrix6& m, bool leading_comma) {
  for (int i = 0; i < 6; ++i) {
    for (int j = i; j < 6; ++j) {
      if (leading_comma || i + j > 0) os << ',';
      os << m(i, j);
    }
  }
}

Matrix6 triangle_to_matrix(const double* v) {
  Matrix6 m;
  int k = 0;
  for (int i = 0; i < 6; ++i) {
    for (int j = i; j < 6; ++j) {
      m(i, j) = v[k];
      m(j, i) = v[k];
      ++k;
    }
  }
  return m;
}

}  // namespace

void Dataset::validate() const {
  auto check = [](const std::vector<Sample>& samples, const char* split) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const Sample& s = samples[i];
      if (!is_spd(s.c_fiber) || !is_spd(s.c_matrix) || !is_spd(s.c_target)) {
        std::ostringstream msg;
        msg << "dataset " << split << " sample " << i
            << " contains a non-SPD stiffness";
        throw Error::data(msg.str());
      }
    }
  };
  check(train, "train");
  check(test, "test");
}

void save_samples(const std::vector<Sample>& samples, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error::io("cannot open '" + path + "' for writing");
  os << std::setprecision(17);
  os << header_row() << '\n';
  for (const Sample& s : samples) {
    write_triangle(os, s.c_fiber, false);
    write_triangle(os, s.c_matrix, true);
    write_triangle(os, s.c_target, true);
    os << '\n';
  }
  if (!os) throw Error::io("write failure on '" + path + "'");
}

std::vector<Sample> load_samples(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error::io("cannot open '" + path + "' for reading");

  std::string line;
  if (!std::getline(is, line)) {
    throw Error::data(path + ": empty file, expected a header row");
  }
  if (line == header_row() + "\r") line.pop_back();
  if (line != header_row()) {
    throw Error::data(path + ":1: unexpected header row");
  }

  std::vector<Sample> samples;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    double values[3 * kTriangle];
    std::size_t pos = 0;
    for (int k = 0; k < 3 * kTriangle; ++k) {
      const std::size_t next = line.find(',', pos);
      const std::string field = line.substr(
          pos, next == std::string::npos ? std::string::npos : next - pos);
      try {
        std::size_t used = 0;
        values[k] = std::stod(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        std::ostringstream msg;
        msg << path << ':' << lineno << ": field " << (k + 1)
            << " is not a number: '" << field << "'";
        throw Error::data(msg.str());
      }
      if (next == std::string::npos) {
        if (k != 3 * kTriangle - 1) {
          std::ostringstream msg;
          msg << path << ':' << lineno << ": expected " << 3 * kTriangle
              << " fields, got " << (k + 1);
          throw Error::data(msg.str());
        }
        pos = std::string::npos;
      } else {
        pos = next + 1;
      }
    }
    if (pos != std::string::npos) {
      std::ostringstream msg;
      msg << path << ':' << lineno << ": more than " << 3 * kTriangle
          << " fields";
      throw Error::data(msg.str());
    }

    Sample s;
    s.c_fiber = triangle_to_matrix(values);
    s.c_matrix = triangle_to_matrix(values + kTriangle);
    s.c_target = triangle_to_matrix(values + 2 * kTriangle);
    samples.push_back(s);
  }
  return samples;
}

}  // namespace dmn
