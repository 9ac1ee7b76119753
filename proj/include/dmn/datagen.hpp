// This file is part of the dmn toolkit, a deep material network library
// for concurrent multiscale simulation of fiber reinforced composites.
//
// SPDX-License-Identifier: MIT

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>

#include "dmn/dataset.hpp"
#include "dmn/network.hpp"
#include "dmn/plasticity.hpp"

namespace dmn {

/// Draws admissible (fiber, matrix) stiffness pairs covering wide phase
/// contrast. The matrix is isotropic with E normalized to 1 and
/// nu ~ U(0, 0.45). The fiber is orthotropic: axis moduli log-uniform in
/// [1, 1000], shear moduli log-uniform in [sqrt(Ei Ej)/8, sqrt(Ei Ej)/2],
/// Poisson ratios uniform in +-0.5 sqrt(Ei/Ej) (half the pairwise stability
/// bound), the full set rejection-checked for positive definiteness.
class PhaseSampler {
 public:
  explicit PhaseSampler(std::uint64_t seed);

  /// (C_fiber, C_matrix), both SPD; deterministic in the seed and call
  /// sequence. Throws Error(config) after 1000 consecutive rejections.
  std::pair<Stiffness6, Stiffness6> sample_pair();

 private:
  std::mt19937_64 rng_;
};

/// Physical-units constants for the online stage: fiber and matrix
/// elasticity plus the matrix hardening law.
struct OnlineConstants {
  EngineeringConstants fiber;
  double matrix_E = 0.0;
  double matrix_nu = 0.0;
  HardeningLaw hardening;

  static OnlineConstants defaults();
  /// JSON file with objects "fiber", "matrix", "hardening". Throws Error(io)
  /// on unreadable paths, Error(data) on schema violations.
  static OnlineConstants from_json_file(const std::string& path);
  void save(const std::string& path) const;
  /// Both elasticities SPD, hardening admissible. Throws Error(data).
  void validate() const;
};

/// Randomly initialized network whose fiber leaf weights are rescaled so
/// extract_volume_fraction(result) equals vf. Throws Error(config) unless
/// 0 < vf < 1.
NetworkParams make_teacher(int layers, std::uint64_t seed, double vf);

/// Ground-truth dataset: every target is the teacher's own forward output,
/// so a student with the same topology has a known zero-loss optimum.
/// Row order is train block then test block, each in draw order.
Dataset teacher_dataset(const NetworkParams& teacher, PhaseSampler& sampler,
                        int n_train, int n_test);

}  // namespace dmn
