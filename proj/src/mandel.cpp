// This file is part of the dmn toolkit, a deep material network library
// for concurrent multiscale simulation of fiber reinforced composites.
//
// SPDX-License-Identifier: MIT

#include "dmn/mandel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>

#include "dmn/error.hpp"

namespace dmn {

namespace {

Matrix3 rot_z(double t) {
  const double c = std::cos(t), s = std::sin(t);
  Matrix3 m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

Matrix3 rot_x(double t) {
  const double c = std::cos(t), s = std::sin(t);
  Matrix3 m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}

Matrix3 drot_z(double t) {
  const double c = std::cos(t), s = std::sin(t);
  Matrix3 m;
  m << -s, -c, 0, c, -s, 0, 0, 0, 0;
  return m;
}

Matrix3 drot_x(double t) {
  const double c = std::cos(t), s = std::sin(t);
  Matrix3 m;
  m << 0, 0, 0, 0, -s, -c, 0, c, -s;
  return m;
}

// Mandel index -> tensor index pair, matching the ordering [11,22,33,23,13,12].
constexpr int kPair[6][2] = {{0, 0}, {1, 1}, {2, 2}, {1, 2}, {0, 2}, {0, 1}};
constexpr double kScale[6] = {1.0, 1.0, 1.0, kSqrt2, kSqrt2, kSqrt2};

}  // namespace

Rotation::Rotation() : Rotation(0.0, 0.0, 0.0) {}

Rotation::Rotation(double alpha, double beta, double gamma) {
  angles_ << alpha, beta, gamma;
  R_ = rot_z(alpha) * rot_x(beta) * rot_z(gamma);
  R6_ = mandel_rotation(R_);
}

Rotation Rotation::from_matrix(const Matrix3& R) {
  if ((R * R.transpose() - Matrix3::Identity()).cwiseAbs().maxCoeff() > 1e-8 ||
      R.determinant() < 0.0) {
    throw Error::data("rotation matrix is not proper orthogonal");
  }
  // For R = Rz(a) Rx(b) Rz(g):
  //   R(2,2) = cos b, R(0,2) = sin a sin b, R(1,2) = -cos a sin b,
  //   R(2,0) = sin b sin g, R(2,1) = sin b cos g.
  const double cb = std::clamp(R(2, 2), -1.0, 1.0);
  const double beta = std::acos(cb);
  double alpha, gamma;
  if (std::abs(std::sin(beta)) > 1e-10) {
    alpha = std::atan2(R(0, 2), -R(1, 2));
    gamma = std::atan2(R(2, 0), R(2, 1));
  } else {
    // Gimbal-degenerate: only alpha +/- gamma is determined; pick gamma = 0.
    alpha = std::atan2(R(1, 0), R(0, 0));
    gamma = 0.0;
  }
  return {alpha, beta, gamma};
}

Rotation Rotation::from_quaternion(double w, double x, double y, double z) {
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (std::abs(n - 1.0) > 1e-8) {
    throw Error::data("quaternion norm deviates from 1");
  }
  w /= n;
  x /= n;
  y /= n;
  z /= n;
  Matrix3 R;
  R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return from_matrix(R);
}

Rotation Rotation::inverse() const { return from_matrix(R_.transpose()); }

Rotation Rotation::compose(const Rotation& other) const {
  return from_matrix(R_ * other.R_);
}

std::array<Matrix3, 3> zxz_angle_derivatives(const Rotation& r) {
  const double a = r.alpha(), b = r.beta(), g = r.gamma();
  const Matrix3 Rza = rot_z(a), Rxb = rot_x(b), Rzg = rot_z(g);
  return {drot_z(a) * Rxb * Rzg, Rza * drot_x(b) * Rzg, Rza * Rxb * drot_z(g)};
}

Matrix6 mandel_rotation(const Matrix3& R) {
  Matrix6 Q;
  for (int I = 0; I < 6; ++I) {
    const int i = kPair[I][0], j = kPair[I][1];
    for (int J = 0; J < 6; ++J) {
      const int k = kPair[J][0], l = kPair[J][1];
      Q(I, J) = 0.5 * kScale[I] * kScale[J] *
                (R(i, k) * R(j, l) + R(i, l) * R(j, k));
    }
  }
  return Q;
}

Matrix6 mandel_rotation_derivative(const Matrix3& R, const Matrix3& dR) {
  Matrix6 dQ;
  for (int I = 0; I < 6; ++I) {
    const int i = kPair[I][0], j = kPair[I][1];
    for (int J = 0; J < 6; ++J) {
      const int k = kPair[J][0], l = kPair[J][1];
      dQ(I, J) = 0.5 * kScale[I] * kScale[J] *
                 (dR(i, k) * R(j, l) + R(i, k) * dR(j, l) + dR(i, l) * R(j, k) +
                  R(i, l) * dR(j, k));
    }
  }
  return dQ;
}

Vector6 mandel_vector(const Matrix3& t) {
  Vector6 v;
  v << t(0, 0), t(1, 1), t(2, 2), kSqrt2 * t(1, 2), kSqrt2 * t(0, 2),
      kSqrt2 * t(0, 1);
  return v;
}

Matrix3 mandel_tensor(const Vector6& v) {
  Matrix3 t;
  const double s = 1.0 / kSqrt2;
  t << v[0], s * v[5], s * v[4], s * v[5], v[1], s * v[3], s * v[4], s * v[3],
      v[2];
  return t;
}

Stiffness6 stiffness_from_engineering(const EngineeringConstants& c) {
  Matrix6 S = Matrix6::Zero();
  S(0, 0) = 1.0 / c.E1;
  S(1, 1) = 1.0 / c.E2;
  S(2, 2) = 1.0 / c.E3;
  S(0, 1) = S(1, 0) = -c.nu12 / c.E1;
  S(0, 2) = S(2, 0) = -c.nu13 / c.E1;
  S(1, 2) = S(2, 1) = -c.nu23 / c.E2;
  // Mandel shear compliance: eps_M = sigma_M / (2 G).
  S(3, 3) = 1.0 / (2.0 * c.G23);
  S(4, 4) = 1.0 / (2.0 * c.G13);
  S(5, 5) = 1.0 / (2.0 * c.G12);

  Eigen::LLT<Matrix6> llt(S);
  if (llt.info() != Eigen::Success) {
    throw Error::data("engineering constants are not thermodynamically admissible");
  }
  Matrix6 C = llt.solve(Matrix6::Identity());
  return 0.5 * (C + C.transpose());
}

EngineeringConstants engineering_from_stiffness(const Stiffness6& C) {
  Eigen::LLT<Matrix6> llt(C);
  if (llt.info() != Eigen::Success) {
    throw Error::data("stiffness is not positive definite");
  }
  const Matrix6 S = llt.solve(Matrix6::Identity());
  EngineeringConstants c;
  c.E1 = 1.0 / S(0, 0);
  c.E2 = 1.0 / S(1, 1);
  c.E3 = 1.0 / S(2, 2);
  c.nu12 = -S(0, 1) / S(0, 0);
  c.nu13 = -S(0, 2) / S(0, 0);
  c.nu23 = -S(1, 2) / S(1, 1);
  c.G23 = 0.5 / S(3, 3);
  c.G13 = 0.5 / S(4, 4);
  c.G12 = 0.5 / S(5, 5);
  return c;
}

Stiffness6 isotropic_stiffness(double E, double nu) {
  return stiffness_from_engineering(EngineeringConstants::isotropic(E, nu));
}

Stiffness6 rotate_stiffness(const Stiffness6& C, const Rotation& r) {
  const Matrix6& Q = r.matrix6();
  return Q * C * Q.transpose();
}

std::pair<Stiffness6, Stiffness6> voigt_reuss_bounds(const Stiffness6& C1,
                                                     const Stiffness6& C2,
                                                     double f1) {
  if (f1 < 0.0 || f1 > 1.0) {
    throw Error::config("volume fraction outside [0, 1]");
  }
  const double f2 = 1.0 - f1;
  const Stiffness6 voigt = f1 * C1 + f2 * C2;

  Eigen::LLT<Matrix6> llt1(C1), llt2(C2);
  if (llt1.info() != Eigen::Success || llt2.info() != Eigen::Success) {
    throw Error::data("Reuss bound requires positive definite phases");
  }
  const Matrix6 Sbar = f1 * llt1.solve(Matrix6::Identity()) +
                       f2 * llt2.solve(Matrix6::Identity());
  Eigen::LLT<Matrix6> llts(Sbar);
  if (llts.info() != Eigen::Success) {
    throw Error::data("averaged compliance is singular");
  }
  Matrix6 reuss = llts.solve(Matrix6::Identity());
  reuss = 0.5 * (reuss + reuss.transpose());
  return {voigt, reuss};
}

Vector6 deviatoric(const Vector6& v) {
  const double mean = (v[0] + v[1] + v[2]) / 3.0;
  Vector6 d = v;
  d[0] -= mean;
  d[1] -= mean;
  d[2] -= mean;
  return d;
}

double von_mises(const Stress6& sigma) {
  return std::sqrt(1.5) * deviatoric(sigma).norm();
}

bool is_symmetric(const Matrix6& m, double rel_tol) {
  const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

bool is_spd(const Matrix6& m, double rel_tol) {
  if (!is_symmetric(m, 1e-8)) return false;
  Eigen::SelfAdjointEigenSolver<Matrix6> es(m, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  return lo > rel_tol * std::max(hi, 0.0) && hi > 0.0;
}

}  // namespace dmn
