// This file is part of the dmn toolkit, a deep material network library
// for concurrent multiscale simulation of fiber reinforced composites.
//
// SPDX-License-Identifier: MIT

#pragma once

#include <string>
#include <vector>

#include "dmn/mandel.hpp"
#include "dmn/network.hpp"

namespace dmn {

/// Microstructure coordinates of the process-guided database: fiber volume
/// fraction plus the two leading principal values of the fiber orientation
/// tensor (the third is implied by the unit trace).
struct Descriptor {
  double vf = 0.0;
  double a11 = 1.0 / 3.0;
  double a22 = 1.0 / 3.0;

  double a33() const { return 1.0 - a11 - a22; }

  /// a11 >= a22 >= a33 >= 0 (tolerance 1e-12) and vf in (0, 1).
  /// Throws Error(config).
  void validate() const;
};

/// Principal orientation values (descending) and the rotation carrying the
/// principal frame into the global frame: A = R diag(a11, a22, a33) R^T.
struct OrientationDecomposition {
  double a11 = 0.0, a22 = 0.0, a33 = 0.0;
  Rotation rotation;
};

/// Eigen-decomposition of an orientation tensor with a deterministic sign
/// convention: the first two eigenvectors point their largest magnitude
/// component positive, the third completes a right-handed frame. Throws
/// Error(data) unless A is symmetric, trace 1 and PSD within 1e-8.
OrientationDecomposition decompose_orientation(const Matrix3& A);

struct Anchor {
  Descriptor x;
  NetworkParams y;
};

/// Four trained networks of one topology pinned at affinely independent
/// descriptors; queries evaluate the exact componentwise affine interpolant
/// of all z and angle parameters. Immutable after the fit, so concurrent
/// queries are safe.
class AnchorSet {
 public:
  const std::vector<Anchor>& anchors() const { return anchors_; }
  int layers() const { return anchors_.front().y.layers; }

  /// Barycentric coordinates of x with respect to the anchor descriptors.
  Eigen::Vector4d barycentric(const Descriptor& x) const;

  /// All barycentric coordinates >= -slack.
  bool contains(const Descriptor& x, double slack = 1e-10) const;

  /// One row per parameter component (z first, then the angle triplets
  /// row-major), columns against the basis [1, vf, a11, a22].
  const Eigen::MatrixXd& coefficients() const { return coeff_; }

 private:
  friend AnchorSet fit_anchors(std::vector<Anchor> anchors);

  std::vector<Anchor> anchors_;
  Eigen::MatrixXd coeff_;
  Eigen::Matrix4d basis_;  ///< column i = [1, vf_i, a11_i, a22_i]
};

/// Solves the 4x4 affine system exactly for every parameter component.
/// Throws Error(config) on a topology mismatch, a descriptor invariant
/// violation, or affinely dependent descriptors.
AnchorSet fit_anchors(std::vector<Anchor> anchors);

/// Affine evaluation at x; bitwise exact when x equals an anchor descriptor.
/// A query outside the anchor hull throws Error(config) unless
/// allow_extrapolation is set, which logs a warning to stderr instead. The
/// returned network carries x in its metadata.
NetworkParams query(const AnchorSet& db, const Descriptor& x,
                    bool allow_extrapolation = false);

/// Versioned JSON bundle of the four anchor models, their descriptors and
/// the fit coefficients. load_database refits from the anchors and rejects a
/// file whose stored coefficients disagree.
void save_database(const AnchorSet& db, const std::string& path);
AnchorSet load_database(const std::string& path);

}  // namespace dmn
