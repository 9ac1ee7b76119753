// This file is part of the dmn toolkit, a deep material network library
// for concurrent multiscale simulation of fiber reinforced composites.
//
// SPDX-License-Identifier: MIT

#pragma once

#include <array>

#include "dmn/mandel.hpp"

namespace dmn {

// Two-phase laminate building block. Child 1 and child 2 are perfectly bonded
// layers sharing the interface normal along axis 3; the homogenized stiffness
// is rotated as a whole afterwards. Index partition used by the closed form:
// P = {11, 22, 12} carries continuous in-plane strain, N = {33, 23, 13}
// carries continuous traction. In the Mandel ordering N is the contiguous
// index range 2..4.

struct BlockInput {
  Stiffness6 C1;
  Stiffness6 C2;
  double f1 = 0.5;  ///< volume fraction of child 1, in [0, 1]
  Rotation rotation;
};

/// Upstream-contracted sensitivities of a block output. dC1/dC2 are full-matrix
/// adjoints: the derivative against a symmetric perturbation of the input pair
/// (i, j), (j, i) is dC(i, j) + dC(j, i) off the diagonal.
struct BlockGrad {
  double df1 = 0;
  std::array<double, 3> dangles{{0, 0, 0}};
  Matrix6 dC1 = Matrix6::Zero();
  Matrix6 dC2 = Matrix6::Zero();
};

/// Exact rank-one homogenization:
///   Cbar = f1 C1 + f2 C2
///          - f1 f2 (C1-C2)[:,N] (f2 C1[N,N] + f1 C2[N,N])^-1 (C1-C2)[N,:]
/// f1 = 0 or 1 short-circuits to the surviving child. Throws Error(solver)
/// when the N-block is numerically singular (reciprocal condition < 1e-14),
/// which only happens for non-SPD input.
Stiffness6 laminate_homogenize(const Stiffness6& C1, const Stiffness6& C2,
                               double f1);

/// rotate_stiffness(laminate_homogenize(C1, C2, f1), rotation).
Stiffness6 block_forward(const BlockInput& b);

/// Reverse-mode derivatives of <upstream, block_forward(b)> with respect to
/// f1, the three Euler angles and both input stiffnesses. Analytic; validated
/// against central finite differences in the test suite. At f1 in {0, 1} the
/// f1 derivative is the one-sided limit of the closed form.
BlockGrad block_backward(const BlockInput& b, const Matrix6& upstream);

}  // namespace dmn
