// This file is part of the dmn toolkit, a deep material network library
// for concurrent multiscale simulation of fiber reinforced composites.
//
// SPDX-License-Identifier: MIT

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/LU>
#include <json.hpp>

#include <dmn/database.hpp>
#include <dmn/datagen.hpp>
#include <dmn/error.hpp>
#include <dmn/training.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace dmn;
using dmn::testing::Rng;
using dmn::testing::nudged_anchors;
using dmn::testing::paper_corners;
using dmn::testing::random_rotation;

namespace {

// Seeds 141..159 belong to this suite.

std::vector<double> flatten(const NetworkParams& p) {
  std::vector<double> out = p.z;
  for (const auto& a : p.angles) out.insert(out.end(), a.begin(), a.end());
  return out;
}

Descriptor hull_point(const AnchorSet& db, const Eigen::Vector4d& lambda) {
  Descriptor x{0.0, 0.0, 0.0};
  for (int i = 0; i < 4; ++i) {
    x.vf += lambda[i] * db.anchors()[i].x.vf;
    x.a11 += lambda[i] * db.anchors()[i].x.a11;
    x.a22 += lambda[i] * db.anchors()[i].x.a22;
  }
  return x;
}

Eigen::Vector4d random_barycentric(Rng& rng) {
  std::exponential_distribution<double> exp1(1.0);
  Eigen::Vector4d l;
  for (int i = 0; i < 4; ++i) l[i] = exp1(rng);
  return l / l.sum();
}

}  // namespace

TEST_SUITE("database") {

TEST_CASE("descriptor invariants are enforced") {
  for (const Descriptor& x : paper_corners()) CHECK_NOTHROW(x.validate());

  const Descriptor bad_vf{0.0, 1.0, 0.0};
  CHECK_THROWS_AS(bad_vf.validate(), Error);
  const Descriptor unsorted{0.2, 0.3, 0.5};
  CHECK_THROWS_AS(unsorted.validate(), Error);
  const Descriptor negative_a33{0.2, 0.8, 0.3};
  CHECK_THROWS_AS(negative_a33.validate(), Error);
}

TEST_CASE("orientation decomposition recovers planted principal values") {
  for (std::uint64_t seed : {141, 142, 143, 144, 145}) {
    CAPTURE(seed);
    Rng rng(seed);
    const Rotation r = random_rotation(rng);

    std::exponential_distribution<double> exp1(1.0);
    Vector3 a;
    for (int i = 0; i < 3; ++i) a[i] = exp1(rng);
    a /= a.sum();
    std::sort(a.data(), a.data() + 3, std::greater<double>());

    const Matrix3 planted =
        r.matrix3() * a.asDiagonal() * r.matrix3().transpose();
    const Matrix3 A = 0.5 * (planted + planted.transpose());

    const OrientationDecomposition d = decompose_orientation(A);
    CHECK(std::abs(d.a11 - a[0]) <= 1e-12);
    CHECK(std::abs(d.a22 - a[1]) <= 1e-12);
    CHECK(std::abs(d.a33 - a[2]) <= 1e-12);

    const Matrix3 q = d.rotation.matrix3();
    CHECK((q * q.transpose() - Matrix3::Identity()).norm() <= 1e-12);
    CHECK(std::abs(q.determinant() - 1.0) <= 1e-12);

    const Vector3 eig(d.a11, d.a22, d.a33);
    const Matrix3 rebuilt = q * eig.asDiagonal() * q.transpose();
    CHECK((rebuilt - A).norm() <= 1e-12);
  }
}

TEST_CASE("isotropic and aligned tensors decompose exactly") {
  const OrientationDecomposition iso =
      decompose_orientation(Matrix3::Identity() / 3.0);
  CHECK(std::abs(iso.a11 - 1.0 / 3.0) <= 1e-14);
  CHECK(std::abs(iso.a22 - 1.0 / 3.0) <= 1e-14);
  CHECK(std::abs(iso.a33 - 1.0 / 3.0) <= 1e-14);

  Matrix3 aligned = Matrix3::Zero();
  aligned(0, 0) = 1.0;
  const OrientationDecomposition ali = decompose_orientation(aligned);
  CHECK(ali.a11 == 1.0);
  CHECK(ali.a22 == 0.0);
  CHECK(ali.a33 == 0.0);
  const Matrix3 q = ali.rotation.matrix3();
  const Vector3 eig(ali.a11, ali.a22, ali.a33);
  CHECK((q * eig.asDiagonal() * q.transpose() - aligned).norm() <= 1e-12);

  // the sign convention makes repeated calls bitwise reproducible
  Rng rng(146);
  const Rotation r = random_rotation(rng);
  const Vector3 a(0.6, 0.3, 0.1);
  Matrix3 A = r.matrix3() * a.asDiagonal() * r.matrix3().transpose();
  A = 0.5 * (A + A.transpose());
  const Matrix3 q1 = decompose_orientation(A).rotation.matrix3();
  const Matrix3 q2 = decompose_orientation(A).rotation.matrix3();
  CHECK((q1 - q2).norm() == 0.0);
}

TEST_CASE("invalid orientation tensors are rejected") {
  Matrix3 asym = Matrix3::Identity() / 3.0;
  asym(0, 1) = 1e-6;
  CHECK_THROWS_AS(decompose_orientation(asym), Error);

  const Matrix3 off_trace = 1.02 * Matrix3::Identity() / 3.0;
  CHECK_THROWS_AS(decompose_orientation(off_trace), Error);

  const Matrix3 indefinite = Vector3(0.7, 0.5, -0.2).asDiagonal();
  try {
    decompose_orientation(indefinite);
    FAIL("expected Error(data)");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::data);
  }
}

TEST_CASE("fit is exact at anchors and averages at the centroid") {
  const AnchorSet db = fit_anchors(nudged_anchors(3, 147));

  for (const Anchor& a : db.anchors()) {
    const NetworkParams q = query(db, a.x);
    CHECK(flatten(q) == flatten(a.y));  // bitwise via the anchor shortcut
    REQUIRE(q.metadata.descriptor.has_value());
    CHECK((*q.metadata.descriptor)[0] == a.x.vf);
  }

  Descriptor centroid{0.0, 0.0, 0.0};
  for (const Anchor& a : db.anchors()) {
    centroid.vf += 0.25 * a.x.vf;
    centroid.a11 += 0.25 * a.x.a11;
    centroid.a22 += 0.25 * a.x.a22;
  }
  const std::vector<double> yc = flatten(query(db, centroid));
  for (std::size_t k = 0; k < yc.size(); ++k) {
    double mean = 0.0;
    for (const Anchor& a : db.anchors()) mean += 0.25 * flatten(a.y)[k];
    CHECK(std::abs(yc[k] - mean) <= 1e-12);
  }
}

TEST_CASE("a planted affine law is recovered across the hull") {
  Rng rng(148);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  const int layers = 3;
  const NetworkParams proto = init_random(layers, 148);
  const int ncomp = static_cast<int>(flatten(proto).size());
  Eigen::MatrixXd b_true(ncomp, 4);
  for (int r = 0; r < ncomp; ++r) {
    b_true(r, 0) = 0.5 + 0.2 * u(rng);
    for (int c = 1; c < 4; ++c) b_true(r, c) = 0.3 * u(rng);
  }

  std::vector<Anchor> anchors;
  for (const Descriptor& x : paper_corners()) {
    const Eigen::VectorXd y = b_true * Eigen::Vector4d(1.0, x.vf, x.a11, x.a22);
    NetworkParams p = proto;
    const int nz = proto.leaf_count();
    for (int k = 0; k < nz; ++k) p.z[k] = y[k];
    for (int n = 0; n < proto.block_count(); ++n) {
      p.angles[n] = {y[nz + 3 * n], y[nz + 3 * n + 1], y[nz + 3 * n + 2]};
    }
    anchors.push_back({x, std::move(p)});
  }
  const AnchorSet db = fit_anchors(anchors);

  for (int trial = 0; trial < 20; ++trial) {
    const Descriptor x = hull_point(db, random_barycentric(rng));
    const Eigen::VectorXd expected =
        b_true * Eigen::Vector4d(1.0, x.vf, x.a11, x.a22);
    const std::vector<double> got = flatten(query(db, x));
    for (int k = 0; k < ncomp; ++k) {
      CHECK(std::abs(got[k] - expected[k]) <= 1e-10);
    }
  }
}

TEST_CASE("query is affine along segments") {
  Rng rng(149);
  const AnchorSet db = fit_anchors(nudged_anchors(3, 149));

  const Descriptor p = hull_point(db, random_barycentric(rng));
  const Descriptor q = hull_point(db, random_barycentric(rng));
  const Descriptor mid{0.5 * (p.vf + q.vf), 0.5 * (p.a11 + q.a11),
                       0.5 * (p.a22 + q.a22)};

  const std::vector<double> yp = flatten(query(db, p));
  const std::vector<double> yq = flatten(query(db, q));
  const std::vector<double> ym = flatten(query(db, mid));
  for (std::size_t k = 0; k < ym.size(); ++k) {
    CHECK(std::abs(ym[k] - 0.5 * (yp[k] + yq[k])) <= 1e-12);
  }
}

TEST_CASE("queries outside the hull error unless extrapolation is allowed") {
  const AnchorSet db = fit_anchors(nudged_anchors(3, 150));

  const Descriptor outside{0.05, 1.0, 0.0};  // below every anchor vf
  CHECK_FALSE(db.contains(outside));
  CHECK(db.barycentric(outside).minCoeff() < 0.0);
  try {
    query(db, outside);
    FAIL("expected Error(config)");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config);
  }

  const NetworkParams p = query(db, outside, true);
  const Eigen::VectorXd expected =
      db.coefficients() * Eigen::Vector4d(1.0, outside.vf, outside.a11,
                                          outside.a22);
  const std::vector<double> got = flatten(p);
  for (std::size_t k = 0; k < got.size(); ++k) {
    CHECK(std::abs(got[k] - expected[static_cast<int>(k)]) <= 1e-14);
  }
}

TEST_CASE("topology mismatches and degenerate descriptor sets are rejected") {
  std::vector<Anchor> anchors = nudged_anchors(3, 151);

  std::vector<Anchor> wrong_layers = anchors;
  wrong_layers[2].y = init_random(4, 151);
  CHECK_THROWS_AS(fit_anchors(wrong_layers), Error);

  std::vector<Anchor> wrong_phases = anchors;
  wrong_phases[1].y.leaf_phase[0] = Phase::matrix;
  CHECK_THROWS_AS(fit_anchors(wrong_phases), Error);

  // four descriptors in the vf = 0.10 plane span no volume
  std::vector<Anchor> coplanar = anchors;
  coplanar[3].x = Descriptor{0.10, 0.8, 0.1};
  try {
    fit_anchors(coplanar);
    FAIL("expected Error(config)");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config);
  }
}

TEST_CASE("queried volume fraction varies continuously along a path") {
  const AnchorSet db = fit_anchors(nudged_anchors(4, 152));

  double prev = -1.0;
  for (int k = 0; k <= 20; ++k) {
    const Descriptor x{0.10 + 0.01 * k, 1.0, 0.0};
    const NetworkParams p = query(db, x);
    CHECK_NOTHROW(p.validate());
    CHECK(stats(p).active_dofs > 0);
    const double vf = extract_volume_fraction(p);
    if (k > 0) CHECK(std::abs(vf - prev) <= 0.05);
    prev = vf;
  }
}

TEST_CASE("queried networks stay physically admissible") {
  Rng rng(153);
  const AnchorSet db = fit_anchors(nudged_anchors(3, 153));
  const OnlineConstants k = OnlineConstants::defaults();
  const Stiffness6 cf = stiffness_from_engineering(k.fiber);
  const Stiffness6 cm = isotropic_stiffness(k.matrix_E, k.matrix_nu);

  for (int trial = 0; trial < 5; ++trial) {
    const Descriptor x = hull_point(db, random_barycentric(rng));
    const Stiffness6 c = forward(query(db, x), cf, cm);
    CHECK(is_spd(c));
  }
}

TEST_CASE("database files round trip and reject tampering") {
  Rng rng(154);
  const AnchorSet db = fit_anchors(nudged_anchors(3, 154));
  const std::string name = "tmp_database.json";
  save_database(db, name);

  const AnchorSet loaded = load_database(name);
  for (int i = 0; i < 4; ++i) {
    CHECK(loaded.anchors()[i].x.vf == db.anchors()[i].x.vf);
    CHECK(flatten(loaded.anchors()[i].y) == flatten(db.anchors()[i].y));
  }
  const Descriptor x = hull_point(db, random_barycentric(rng));
  CHECK(flatten(query(loaded, x)) == flatten(query(db, x)));

  CHECK_THROWS_AS(load_database("tmp_database_missing.json"), Error);

  auto rewrite = [&](void (*mutate)(nlohmann::json&)) {
    std::ifstream in(name);
    nlohmann::json j;
    in >> j;
    mutate(j);
    const std::string bad = "tmp_database_bad.json";
    std::ofstream os(bad);
    os << j.dump(2);
    os.close();
    CHECK_THROWS_AS(load_database(bad), Error);
    std::remove(bad.c_str());
  };

  rewrite([](nlohmann::json& j) { j["version"] = 2; });
  rewrite([](nlohmann::json& j) { j["kind"] = "something-else"; });
  rewrite([](nlohmann::json& j) { j["anchors"].erase(3); });
  rewrite([](nlohmann::json& j) {
    j["coefficients"][0][1] = 1.5 * j["coefficients"][0][1].get<double>() + 1.0;
  });

  {
    std::ofstream os("tmp_database_bad.json");
    os << "{ not json";
  }
  CHECK_THROWS_AS(load_database("tmp_database_bad.json"), Error);
  std::remove("tmp_database_bad.json");

  std::remove(name.c_str());
}

}  // TEST_SUITE
