// This file is part of the dmn toolkit, a deep material network library
// for concurrent multiscale simulation of fiber reinforced composites.
//
// SPDX-License-Identifier: MIT

#include <dmn/datagen.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include <dmn/error.hpp>
#include <dmn/training.hpp>

namespace dmn {

PhaseSampler::PhaseSampler(std::uint64_t seed) : rng_(seed) {}

std::pair<Stiffness6, Stiffness6> PhaseSampler::sample_pair() {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  const double nu_m = 0.45 * uniform(rng_);
  const Stiffness6 c_matrix = isotropic_stiffness(1.0, nu_m);

  for (int attempt = 0; attempt < 1000; ++attempt) {
    EngineeringConstants ec;
    ec.E1 = std::pow(10.0, 3.0 * uniform(rng_));
    ec.E2 = std::pow(10.0, 3.0 * uniform(rng_));
    ec.E3 = std::pow(10.0, 3.0 * uniform(rng_));
    auto shear = [&](double ea, double eb) {
      const double mid = std::sqrt(ea * eb);
      const double lo = std::log(mid / 8.0), hi = std::log(mid / 2.0);
      return std::exp(lo + (hi - lo) * uniform(rng_));
    };
    ec.G12 = shear(ec.E1, ec.E2);
    ec.G13 = shear(ec.E1, ec.E3);
    ec.G23 = shear(ec.E2, ec.E3);
    auto poisson = [&](double ea, double eb) {
      return (uniform(rng_) - 0.5) * std::sqrt(ea / eb);
    };
    ec.nu12 = poisson(ec.E1, ec.E2);
    ec.nu13 = poisson(ec.E1, ec.E3);
    ec.nu23 = poisson(ec.E2, ec.E3);

    try {
      const Stiffness6 c_fiber = stiffness_from_engineering(ec);
      if (is_spd(c_fiber)) return {c_fiber, c_matrix};
    } catch (const Error&) {
      // non-SPD draw; retry
    }
  }
  throw Error::config(
      "phase sampler exceeded 1000 rejections; the configured ranges do not "
      "produce admissible orthotropic constants");
}

OnlineConstants OnlineConstants::defaults() {
  OnlineConstants c;
  c.fiber = {245.0, 19.8, 19.8, 29.2, 29.2, 5.9, 0.023, 0.023, 0.670};
  c.matrix_E = 3.8;
  c.matrix_nu = 0.387;
  c.hardening = {140.0, 0.09, 0.12};
  return c;
}

void OnlineConstants::validate() const {
  stiffness_from_engineering(fiber);  // throws Error(data) if inadmissible
  if (!(matrix_E > 0.0) || !(matrix_nu > -1.0) || !(matrix_nu < 0.5)) {
    throw Error::data("online constants: matrix (E, nu) not admissible");
  }
  try {
    hardening.validate();
  } catch (const Error& e) {
    throw Error::data(std::string("online constants: ") + e.what());
  }
}

OnlineConstants OnlineConstants::from_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error::io("cannot open '" + path + "' for reading");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error::data(path + ": " + e.what());
  }
  try {
    OnlineConstants c;
    const auto& f = j.at("fiber");
    c.fiber.E1 = f.at("E1").get<double>();
    c.fiber.E2 = f.at("E2").get<double>();
    c.fiber.E3 = f.at("E3").get<double>();
    c.fiber.G12 = f.at("G12").get<double>();
    c.fiber.G13 = f.at("G13").get<double>();
    c.fiber.G23 = f.at("G23").get<double>();
    c.fiber.nu12 = f.at("nu12").get<double>();
    c.fiber.nu13 = f.at("nu13").get<double>();
    c.fiber.nu23 = f.at("nu23").get<double>();
    c.matrix_E = j.at("matrix").at("E").get<double>();
    c.matrix_nu = j.at("matrix").at("nu").get<double>();
    const auto& h = j.at("hardening");
    c.hardening.a1 = h.at("a1").get<double>();
    c.hardening.a2 = h.at("a2").get<double>();
    c.hardening.a3 = h.at("a3").get<double>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error::data(path + ": " + e.what());
  }
}

void OnlineConstants::save(const std::string& path) const {
  nlohmann::json j;
  j["fiber"] = {{"E1", fiber.E1},   {"E2", fiber.E2},   {"E3", fiber.E3},
                {"G12", fiber.G12}, {"G13", fiber.G13}, {"G23", fiber.G23},
                {"nu12", fiber.nu12}, {"nu13", fiber.nu13},
                {"nu23", fiber.nu23}};
  j["matrix"] = {{"E", matrix_E}, {"nu", matrix_nu}};
  j["hardening"] = {{"a1", hardening.a1}, {"a2", hardening.a2},
                    {"a3", hardening.a3}};
  std::ofstream os(path);
  if (!os) throw Error::io("cannot open '" + path + "' for writing");
  os << j.dump(2) << '\n';
  if (!os) throw Error::io("write failure on '" + path + "'");
}

NetworkParams make_teacher(int layers, std::uint64_t seed, double vf) {
  if (!(vf > 0.0) || !(vf < 1.0)) {
    std::ostringstream msg;
    msg << "teacher volume fraction must lie in (0, 1), got " << vf;
    throw Error::config(msg.str());
  }
  NetworkParams p = init_random(layers, seed);

  // init_random keeps every z strictly positive, so the phase sums are too.
  double fiber_sum = 0.0, matrix_sum = 0.0;
  for (int j = 0; j < p.leaf_count(); ++j) {
    (p.leaf_phase[j] == Phase::fiber ? fiber_sum : matrix_sum) += p.z[j];
  }
  const double scale = vf * matrix_sum / ((1.0 - vf) * fiber_sum);
  for (int j = 0; j < p.leaf_count(); ++j) {
    if (p.leaf_phase[j] == Phase::fiber) p.z[j] *= scale;
  }
  return p;
}

Dataset teacher_dataset(const NetworkParams& teacher, PhaseSampler& sampler,
                        int n_train, int n_test) {
  teacher.validate();
  if (n_train < 0 || n_test < 0) {
    throw Error::config("teacher_dataset: negative sample count");
  }
  Dataset data;
  // The sample CSV stores upper triangles, so matrices are symmetrized here
  // at the data boundary; numeric kernels only guarantee symmetry to
  // roundoff.
  auto symmetrize = [](const Matrix6& m) -> Matrix6 {
    return 0.5 * (m + m.transpose());
  };
  auto emit = [&](std::vector<Sample>& dst, int n) {
    dst.reserve(n);
    for (int i = 0; i < n; ++i) {
      Sample s;
      std::tie(s.c_fiber, s.c_matrix) = sampler.sample_pair();
      s.c_fiber = symmetrize(s.c_fiber);
      s.c_matrix = symmetrize(s.c_matrix);
      s.c_target = symmetrize(forward(teacher, s.c_fiber, s.c_matrix));
      dst.push_back(s);
    }
  };
  emit(data.train, n_train);
  emit(data.test, n_test);
  return data;
}

}  // namespace dmn
