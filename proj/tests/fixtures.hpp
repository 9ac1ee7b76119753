// This file is part of the dmn toolkit, a deep material network library
// for concurrent multiscale simulation of fiber reinforced composites.
//
// SPDX-License-Identifier: MIT
//
// Shared constructors for database and simulation test setups.

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dmn/database.hpp"
#include "dmn/training.hpp"

namespace dmn::testing {

/// The four database corner descriptors used throughout the suites.
inline std::vector<Descriptor> paper_corners() {
  return {{0.10, 1.0 / 3.0, 1.0 / 3.0},
          {0.10, 0.5, 0.5},
          {0.10, 1.0, 0.0},
          {0.30, 1.0, 0.0}};
}

/// Anchors that differ by small deterministic nudges from one base network,
/// the shape transfer learning produces in practice.
inline std::vector<Anchor> nudged_anchors(int layers, std::uint64_t seed) {
  const NetworkParams base = init_random(layers, seed);
  const std::vector<Descriptor> xs = paper_corners();
  std::vector<Anchor> anchors;
  for (int i = 0; i < 4; ++i) {
    NetworkParams p = base;
    for (std::size_t k = 0; k < p.z.size(); ++k) {
      p.z[k] += 0.02 * i * ((k % 3) - 1.0);
    }
    for (auto& a : p.angles) {
      a[0] += 0.05 * i;
      a[2] -= 0.03 * i;
    }
    anchors.push_back({xs[i], std::move(p)});
  }
  return anchors;
}

}  // namespace dmn::testing
