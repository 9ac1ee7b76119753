// This file is part of the dmn toolkit, a deep material network library
// for concurrent multiscale simulation of fiber reinforced composites.
//
// SPDX-License-Identifier: MIT

#pragma once

#include <string>
#include <vector>

#include "dmn/mandel.hpp"

namespace dmn {

/// One offline training example: the phase stiffness pair fed to the network
/// and the homogenized stiffness it should reproduce.
struct Sample {
  Stiffness6 c_fiber;
  Stiffness6 c_matrix;
  Stiffness6 c_target;
};

/// Train/test split of samples.
struct Dataset {
  std::vector<Sample> train;
  std::vector<Sample> test;

  /// Every stiffness SPD. Throws Error(data) naming the offending sample.
  void validate() const;
};

/// Sample CSV: 63 columns holding the upper Mandel triangles (row-major,
/// i <= j) of C_fiber, C_matrix, C_target, with a header row Cf_11 ... Ct_66.
/// Values are written with 17 significant digits so a load round-trips
/// bitwise. Throws Error(io) on unwritable/unreadable paths and Error(data)
/// on malformed content, with the line number.
void save_samples(const std::vector<Sample>& samples, const std::string& path);
std::vector<Sample> load_samples(const std::string& path);

}  // namespace dmn
