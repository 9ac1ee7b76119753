// This file is part of the dmn toolkit, a deep material network library
// for concurrent multiscale simulation of fiber reinforced composites.
//
// SPDX-License-Identifier: MIT

#include <dmn/database.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <utility>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <json.hpp>

#include <dmn/error.hpp>

namespace dmn {

using nlohmann::json;

void Descriptor::validate() const {
  if (!(vf > 0.0 && vf < 1.0)) {
    throw Error::config("descriptor vf must lie in (0, 1)");
  }
  const double a3 = a33();
  const double tol = 1e-12;
  if (!(a11 + tol >= a22 && a22 + tol >= a3 && a3 >= -tol)) {
    throw Error::config(
        "descriptor orientation values must satisfy a11 >= a22 >= a33 >= 0");
  }
}

OrientationDecomposition decompose_orientation(const Matrix3& A) {
  if (!A.allFinite()) {
    throw Error::data("orientation tensor has non-finite entries");
  }
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-8) {
    throw Error::data("orientation tensor must be symmetric (tolerance 1e-8)");
  }
  if (std::abs(A.trace() - 1.0) > 1e-8) {
    throw Error::data("orientation tensor must have trace 1 (tolerance 1e-8)");
  }
  const Matrix3 S = 0.5 * (A + A.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix3> es(S);
  if (es.info() != Eigen::Success) {
    throw Error::data("orientation tensor eigen-decomposition failed");
  }
  const Vector3 a = es.eigenvalues().reverse();  // descending
  if (a[2] < -1e-8) {
    throw Error::data(
        "orientation tensor must be positive semi-definite (tolerance 1e-8)");
  }

  Matrix3 v;
  v.col(0) = es.eigenvectors().col(2);
  v.col(1) = es.eigenvectors().col(1);
  for (int c = 0; c < 2; ++c) {
    int imax = 0;
    v.col(c).cwiseAbs().maxCoeff(&imax);
    if (v(imax, c) < 0.0) v.col(c) = -v.col(c);
  }
  v.col(2) = v.col(0).cross(v.col(1));  // right handed by construction

  OrientationDecomposition out;
  out.a11 = a[0];
  out.a22 = a[1];
  out.a33 = std::max(a[2], 0.0);
  out.rotation = Rotation::from_matrix(v);
  return out;
}

Eigen::Vector4d AnchorSet::barycentric(const Descriptor& x) const {
  const Eigen::Vector4d rhs(1.0, x.vf, x.a11, x.a22);
  return basis_.partialPivLu().solve(rhs);
}

bool AnchorSet::contains(const Descriptor& x, double slack) const {
  return barycentric(x).minCoeff() >= -slack;
}

AnchorSet fit_anchors(std::vector<Anchor> anchors) {
  if (anchors.size() != 4) {
    throw Error::config("database fit needs exactly 4 anchors, got " +
                        std::to_string(anchors.size()));
  }
  for (const Anchor& a : anchors) {
    a.x.validate();
    a.y.validate();
  }
  const NetworkParams& proto = anchors.front().y;
  for (const Anchor& a : anchors) {
    if (a.y.layers != proto.layers || a.y.leaf_phase != proto.leaf_phase) {
      throw Error::config("anchor networks must share one topology");
    }
  }

  Eigen::Matrix4d basis;
  for (int i = 0; i < 4; ++i) {
    basis.col(i) << 1.0, anchors[i].x.vf, anchors[i].x.a11, anchors[i].x.a22;
  }
  const Eigen::FullPivLU<Eigen::Matrix4d> lu(basis.transpose());
  if (!lu.isInvertible()) {
    throw Error::config("anchor descriptors are affinely dependent");
  }

  const int nz = proto.leaf_count();
  const int nb = proto.block_count();
  Eigen::MatrixXd y(4, nz + 3 * nb);
  for (int i = 0; i < 4; ++i) {
    const NetworkParams& p = anchors[i].y;
    for (int k = 0; k < nz; ++k) y(i, k) = p.z[k];
    for (int n = 0; n < nb; ++n) {
      for (int k = 0; k < 3; ++k) y(i, nz + 3 * n + k) = p.angles[n][k];
    }
  }

  AnchorSet db;
  db.coeff_ = lu.solve(y).transpose();
  db.basis_ = basis;
  db.anchors_ = std::move(anchors);
  return db;
}

NetworkParams query(const AnchorSet& db, const Descriptor& x,
                    bool allow_extrapolation) {
  x.validate();

  // Anchors reproduce bitwise; the affine evaluation would only be exact to
  // solver roundoff.
  for (const Anchor& a : db.anchors()) {
    if (a.x.vf == x.vf && a.x.a11 == x.a11 && a.x.a22 == x.a22) {
      NetworkParams p = a.y;
      p.metadata.descriptor = {{x.vf, x.a11, x.a22}};
      return p;
    }
  }

  if (!db.contains(x)) {
    std::ostringstream where;
    where << "descriptor (" << x.vf << ", " << x.a11 << ", " << x.a22
          << ") lies outside the anchor hull";
    if (!allow_extrapolation) {
      throw Error::config(where.str() +
                          "; enable extrapolation to query anyway");
    }
    std::cerr << "warning: " << where.str()
              << "; extrapolating the material database\n";
  }

  const Eigen::Vector4d basis(1.0, x.vf, x.a11, x.a22);
  const Eigen::VectorXd y = db.coefficients() * basis;

  const NetworkParams& proto = db.anchors().front().y;
  NetworkParams p;
  p.layers = proto.layers;
  p.leaf_phase = proto.leaf_phase;
  const int nz = proto.leaf_count();
  p.z.assign(y.data(), y.data() + nz);
  p.angles.resize(proto.block_count());
  for (int n = 0; n < proto.block_count(); ++n) {
    p.angles[n] = {y[nz + 3 * n], y[nz + 3 * n + 1], y[nz + 3 * n + 2]};
  }
  p.metadata.descriptor = {{x.vf, x.a11, x.a22}};
  p.metadata.note = "database query";
  p.validate();
  return p;
}

void save_database(const AnchorSet& db, const std::string& path) {
  json j;
  j["version"] = 1;
  j["kind"] = "dmn-database";
  json anchors = json::array();
  for (const Anchor& a : db.anchors()) {
    json e;
    e["descriptor"] = {{"vf", a.x.vf}, {"a11", a.x.a11}, {"a22", a.x.a22}};
    e["model"] = json::parse(serialize(a.y));
    anchors.push_back(std::move(e));
  }
  j["anchors"] = std::move(anchors);
  json rows = json::array();
  for (Eigen::Index r = 0; r < db.coefficients().rows(); ++r) {
    rows.push_back(json::array({db.coefficients()(r, 0), db.coefficients()(r, 1),
                                db.coefficients()(r, 2),
                                db.coefficients()(r, 3)}));
  }
  j["coefficients"] = std::move(rows);

  std::ofstream out(path);
  if (!out) throw Error::io("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw Error::io("write failed for '" + path + "'");
}

AnchorSet load_database(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error::io("cannot open database file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();

  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw Error::data(path + " is not valid JSON: " + e.what());
  }

  try {
    for (const char* field : {"version", "kind", "anchors"}) {
      if (!j.contains(field)) {
        throw Error::data(path + ": missing field '" + field + "'");
      }
    }
    if (j["kind"].get<std::string>() != "dmn-database") {
      throw Error::data(path + ": not a material database file");
    }
    const int version = j["version"].get<int>();
    if (version != 1) {
      throw Error::data(path + ": unsupported database version " +
                        std::to_string(version) + " (expected 1)");
    }
    if (!j["anchors"].is_array() || j["anchors"].size() != 4) {
      throw Error::data(path + ": a database holds exactly 4 anchors");
    }

    std::vector<Anchor> anchors;
    for (const auto& e : j["anchors"]) {
      Anchor a;
      a.x.vf = e.at("descriptor").at("vf").get<double>();
      a.x.a11 = e.at("descriptor").at("a11").get<double>();
      a.x.a22 = e.at("descriptor").at("a22").get<double>();
      a.y = deserialize(e.at("model").dump());
      anchors.push_back(std::move(a));
    }

    AnchorSet db = fit_anchors(std::move(anchors));

    // The stored fit is informative, but a file that disagrees with its own
    // anchors was edited and cannot be trusted.
    if (j.contains("coefficients")) {
      const auto& rows = j["coefficients"];
      if (!rows.is_array() ||
          static_cast<Eigen::Index>(rows.size()) != db.coefficients().rows()) {
        throw Error::data(path + ": coefficient table has the wrong shape");
      }
      for (Eigen::Index r = 0; r < db.coefficients().rows(); ++r) {
        for (int c = 0; c < 4; ++c) {
          const double stored = rows[r][c].get<double>();
          const double refit = db.coefficients()(r, c);
          if (std::abs(stored - refit) > 1e-10 * (1.0 + std::abs(refit))) {
            throw Error::data(path +
                              ": stored coefficients do not match the anchors");
          }
        }
      }
    }
    return db;
  } catch (const json::exception& e) {
    throw Error::data(path + ": malformed database file: " + e.what());
  }
}

}  // namespace dmn
