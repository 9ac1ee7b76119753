// This file is part of the dmn toolkit, a deep material network library
// for concurrent multiscale simulation of fiber reinforced composites.
//
// SPDX-License-Identifier: MIT

#include "dmn/block.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "dmn/error.hpp"

namespace dmn {

namespace {

// Interface (traction-continuous) components occupy Mandel indices 2..4.
constexpr int kN0 = 2;

// Inverse of the interface block K = f2 C1[N,N] + f1 C2[N,N], with the
// conditioning guard shared by forward and backward passes.
Matrix3 interface_inverse(const Stiffness6& C1, const Stiffness6& C2,
                          double f1) {
  const double f2 = 1.0 - f1;
  const Matrix3 K = f2 * C1.block<3, 3>(kN0, kN0) + f1 * C2.block<3, 3>(kN0, kN0);
  Eigen::SelfAdjointEigenSolver<Matrix3> es(K);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 1e-14 * hi) || !(hi > 0.0)) {
    throw Error::solver("laminate interface block is numerically singular");
  }
  return es.eigenvectors() *
         es.eigenvalues().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

}  // namespace

Stiffness6 laminate_homogenize(const Stiffness6& C1, const Stiffness6& C2,
                               double f1) {
  if (f1 < 0.0 || f1 > 1.0 || !std::isfinite(f1)) {
    throw Error::config("laminate volume fraction outside [0, 1]");
  }
  if (f1 == 0.0) return C2;
  if (f1 == 1.0) return C1;

  const double f2 = 1.0 - f1;
  const Matrix3 M = interface_inverse(C1, C2, f1);
  const Eigen::Matrix<double, 6, 3> Dc = (C1 - C2).middleCols<3>(kN0);
  Stiffness6 Cbar = f1 * C1 + f2 * C2 - f1 * f2 * Dc * M * Dc.transpose();
  return 0.5 * (Cbar + Cbar.transpose());
}

Stiffness6 block_forward(const BlockInput& b) {
  return rotate_stiffness(laminate_homogenize(b.C1, b.C2, b.f1), b.rotation);
}

BlockGrad block_backward(const BlockInput& b, const Matrix6& upstream) {
  const double f1 = b.f1;
  if (f1 < 0.0 || f1 > 1.0 || !std::isfinite(f1)) {
    throw Error::config("laminate volume fraction outside [0, 1]");
  }
  const double f2 = 1.0 - f1;

  // Forward quantities (the laminate closed form is smooth on all of [0, 1],
  // so the boundary values need no special casing here).
  const Matrix3 M = interface_inverse(b.C1, b.C2, f1);
  const Eigen::Matrix<double, 6, 3> Dc = (b.C1 - b.C2).middleCols<3>(kN0);
  const Matrix6 T = Dc * M * Dc.transpose();
  const Stiffness6 Clam = f1 * b.C1 + f2 * b.C2 - f1 * f2 * T;

  const Matrix6& Q = b.rotation.matrix6();

  BlockGrad g;

  // Angle sensitivities: out = Q Clam Q^T with Q = mandel(R(a, b, g)).
  {
    const auto dR = zxz_angle_derivatives(b.rotation);
    const Matrix6 ClamQt = Clam * Q.transpose();
    const Matrix6 QClam = Q * Clam;
    for (int k = 0; k < 3; ++k) {
      const Matrix6 dQ = mandel_rotation_derivative(b.rotation.matrix3(), dR[k]);
      g.dangles[k] = (upstream.array() *
                      (dQ * ClamQt + QClam * dQ.transpose()).array())
                         .sum();
    }
  }

  // Adjoint into the unrotated laminate output.
  const Matrix6 A = Q.transpose() * upstream * Q;

  // Laminate adjoints. With K = f2 C1[N,N] + f1 C2[N,N] and M = K^-1:
  //   dL/dK  = f1 f2 M Dc^T A Dc M
  //   dL/dDc = -f1 f2 (A + A^T) Dc M
  const Matrix3 KA = f1 * f2 * M * Dc.transpose() * A * Dc * M;
  const Eigen::Matrix<double, 6, 3> DA =
      -f1 * f2 * (A + A.transpose()) * Dc * M;

  const Matrix3 K1 = b.C1.block<3, 3>(kN0, kN0);
  const Matrix3 K2 = b.C2.block<3, 3>(kN0, kN0);
  g.df1 = (A.array() * (b.C1 - b.C2).array()).sum() -
          (1.0 - 2.0 * f1) * (A.array() * T.array()).sum() +
          (KA.array() * (K2 - K1).array()).sum();

  g.dC1 = f1 * A;
  g.dC1.middleCols<3>(kN0) += DA;
  g.dC1.block<3, 3>(kN0, kN0) += f2 * KA;

  g.dC2 = f2 * A;
  g.dC2.middleCols<3>(kN0) -= DA;
  g.dC2.block<3, 3>(kN0, kN0) += f1 * KA;

  return g;
}

}  // namespace dmn
