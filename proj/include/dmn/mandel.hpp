// This file is part of the dmn toolkit, a deep material network library
// for concurrent multiscale simulation of fiber reinforced composites.
//
// SPDX-License-Identifier: MIT

#pragma once

#include <Eigen/Core>
#include <array>
#include <utility>

namespace dmn {

using Matrix3 = Eigen::Matrix3d;
using Vector3 = Eigen::Vector3d;
using Matrix6 = Eigen::Matrix<double, 6, 6>;
using Vector6 = Eigen::Matrix<double, 6, 1>;

// All 6-dimensional quantities use the orthonormal Mandel convention with
// component ordering [11, 22, 33, 23, 13, 12] and a factor sqrt(2) on the
// shear rows/columns. Consequences relied on throughout the library:
//   - sigma . eps (6-vector dot product) equals the tensor double contraction,
//   - rotations act as orthogonal 6x6 matrices,
//   - the Frobenius norm of a 6-vector equals the tensor norm.
// Stiffness entries are in GPa, strains dimensionless. Axis 3 is reserved as
// the laminate interface normal.

using Stiffness6 = Matrix6;
using Strain6 = Vector6;
using Stress6 = Vector6;

inline constexpr double kSqrt2 = 1.4142135623730950488016887242097;

/// Orthotropic engineering constants (moduli in GPa). nu_ij is the ratio
/// -eps_j/eps_i under uniaxial stress along i, so the compliance entry
/// coupling axes i and j is -nu_ij/E_i.
struct EngineeringConstants {
  double E1 = 0, E2 = 0, E3 = 0;
  double G12 = 0, G13 = 0, G23 = 0;
  double nu12 = 0, nu13 = 0, nu23 = 0;

  static EngineeringConstants isotropic(double E, double nu) {
    const double G = E / (2.0 * (1.0 + nu));
    return {E, E, E, G, G, G, nu, nu, nu};
  }
};

/// Proper rotation stored as intrinsic Z-X-Z Euler angles (alpha, beta, gamma)
/// together with the derived 3x3 matrix and its 6x6 Mandel representation.
/// R = Rz(alpha) * Rx(beta) * Rz(gamma).
class Rotation {
 public:
  Rotation();
  Rotation(double alpha, double beta, double gamma);

  /// Extracts Z-X-Z angles from a proper orthogonal matrix. Throws if R is
  /// not orthogonal with det +1 (tolerance 1e-8).
  static Rotation from_matrix(const Matrix3& R);

  /// Unit quaternion (w, x, y, z); normalized internally. Throws on a
  /// quaternion with norm deviating from 1 by more than 1e-8.
  static Rotation from_quaternion(double w, double x, double y, double z);

  const Vector3& angles() const noexcept { return angles_; }
  double alpha() const noexcept { return angles_[0]; }
  double beta() const noexcept { return angles_[1]; }
  double gamma() const noexcept { return angles_[2]; }

  const Matrix3& matrix3() const noexcept { return R_; }
  const Matrix6& matrix6() const noexcept { return R6_; }

  Rotation inverse() const;

  /// Composition this * other (apply `other` first).
  Rotation compose(const Rotation& other) const;

 private:
  Vector3 angles_;
  Matrix3 R_;
  Matrix6 R6_;
};

/// Derivatives dR/dalpha, dR/dbeta, dR/dgamma of the Z-X-Z matrix map.
std::array<Matrix3, 3> zxz_angle_derivatives(const Rotation& r);

/// 6x6 Mandel representation of a 3x3 rotation; orthogonal by construction.
Matrix6 mandel_rotation(const Matrix3& R);

/// Directional derivative of mandel_rotation at R along dR.
Matrix6 mandel_rotation_derivative(const Matrix3& R, const Matrix3& dR);

/// Symmetric 3x3 tensor to Mandel 6-vector and back.
Vector6 mandel_vector(const Matrix3& t);
Matrix3 mandel_tensor(const Vector6& v);

/// Stiffness as the inverse of the orthotropic compliance assembled from c.
/// Throws Error(data) when the compliance is not positive definite.
Stiffness6 stiffness_from_engineering(const EngineeringConstants& c);

/// Reads engineering constants off the compliance C^-1. Requires orthotropic
/// C expressed in its material frame; throws Error(data) on non-SPD input.
EngineeringConstants engineering_from_stiffness(const Stiffness6& C);

Stiffness6 isotropic_stiffness(double E, double nu);

/// C' = R6 C R6^T. Preserves the eigenvalue spectrum.
Stiffness6 rotate_stiffness(const Stiffness6& C, const Rotation& r);

/// (Voigt, Reuss) = (f1 C1 + f2 C2, (f1 C1^-1 + f2 C2^-1)^-1).
/// Throws Error(data) on singular input.
std::pair<Stiffness6, Stiffness6> voigt_reuss_bounds(const Stiffness6& C1,
                                                     const Stiffness6& C2,
                                                     double f1);

/// Deviatoric part of a Mandel 6-vector.
Vector6 deviatoric(const Vector6& v);

/// Von Mises equivalent stress sqrt(3/2) * |dev(sigma)|.
double von_mises(const Stress6& sigma);

bool is_symmetric(const Matrix6& m, double rel_tol = 1e-12);

/// Positive definiteness via eigenvalues; min eigenvalue must exceed
/// rel_tol * max eigenvalue.
bool is_spd(const Matrix6& m, double rel_tol = 1e-12);

}  // namespace dmn
