// This file is part of the dmn toolkit, a deep material network library
// for concurrent multiscale simulation of fiber reinforced composites.
//
// SPDX-License-Identifier: MIT

#include <dmn/plasticity.hpp>

#include <cmath>
#include <sstream>

#include <dmn/error.hpp>

namespace dmn {

namespace {

constexpr double kConsistencyTol = 1e-12;  // GPa, on the consistency residual
constexpr int kMaxIterations = 100;

Vector6 trace_direction() {
  Vector6 m;
  m << 1.0, 1.0, 1.0, 0.0, 0.0, 0.0;
  return m;
}

struct IsotropicModuli {
  double bulk;     // K
  double two_g;    // 2G
};

// Recovers (K, 2G) and rejects anything that is not isotropic: the radial
// return below is only valid when the elastic operator commutes with the
// volumetric/deviatoric split.
IsotropicModuli split_isotropic(const Stiffness6& elastic) {
  const Vector6 m = trace_direction();
  IsotropicModuli mod;
  mod.bulk = m.dot(elastic * m) / 9.0;
  mod.two_g = elastic(3, 3);
  const Matrix6 vol = m * m.transpose() / 3.0;
  const Matrix6 rebuilt =
      3.0 * mod.bulk * vol + mod.two_g * (Matrix6::Identity() - vol);
  const double scale = elastic.norm();
  if (!(scale > 0.0) || (rebuilt - elastic).norm() > 1e-10 * scale) {
    throw Error::config(
        "matrix_return_map requires an isotropic elastic stiffness");
  }
  if (!(mod.bulk > 0.0) || !(mod.two_g > 0.0)) {
    throw Error::config("matrix_return_map: elastic stiffness is not SPD");
  }
  return mod;
}

}  // namespace

void HardeningLaw::validate() const {
  if (!(a1 > 0.0) || !(a2 >= 0.0) || !(a3 - a2 > 0.0)) {
    std::ostringstream msg;
    msg << "inadmissible hardening law: a1=" << a1 << " a2=" << a2
        << " a3=" << a3 << " (need a1 > 0, a2 >= 0, a3 - a2 > 0)";
    throw Error::config(msg.str());
  }
}

double yield_stress(const HardeningLaw& law, double ep_bar) {
  return law.a3 - law.a2 * std::exp(-law.a1 * ep_bar);
}

double hardening_slope(const HardeningLaw& law, double ep_bar) {
  return law.a1 * law.a2 * std::exp(-law.a1 * ep_bar);
}

MaterialResponse matrix_return_map(const LeafState& state, const Strain6& d_eps,
                                   const Stiffness6& elastic,
                                   const HardeningLaw& law) {
  law.validate();
  const IsotropicModuli mod = split_isotropic(elastic);

  const Stress6 sigma_trial = state.sigma + elastic * d_eps;
  const Vector6 s_trial = deviatoric(sigma_trial);
  const double q_trial = von_mises(sigma_trial);
  const double f_trial = q_trial - yield_stress(law, state.ep_bar);

  MaterialResponse out;
  out.state = state;
  if (f_trial <= 0.0) {
    out.sigma = sigma_trial;
    out.tangent = elastic;
    out.state.sigma = sigma_trial;
    return out;
  }

  // Consistency: r(dg) = q_trial - 3G dg - sigma_Y(ep_bar + dg) = 0.  r is
  // strictly decreasing, r(0) = f_trial > 0 and r(f_trial / 3G) <= 0 by
  // monotonicity of sigma_Y, so the bracket below always holds.
  const double three_g = 1.5 * mod.two_g;
  double lo = 0.0;
  double hi = f_trial / three_g;
  double dg = hi;
  bool converged = false;
  for (int it = 0; it < kMaxIterations; ++it) {
    const double ep = state.ep_bar + dg;
    const double r = q_trial - three_g * dg - yield_stress(law, ep);
    if (std::abs(r) <= kConsistencyTol) {
      converged = true;
      break;
    }
    if (r > 0.0) {
      lo = dg;
    } else {
      hi = dg;
    }
    const double slope = -three_g - hardening_slope(law, ep);
    double next = dg - r / slope;
    if (!(next > lo) || !(next < hi)) {
      next = 0.5 * (lo + hi);
    }
    dg = next;
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "return map did not converge in " << kMaxIterations
        << " iterations: q_trial=" << q_trial << " GPa, ep_bar=" << state.ep_bar
        << ", bracket [" << lo << ", " << hi << "]";
    throw Error::solver(msg.str());
  }

  // Radial direction in Mandel components; q_trial > sigma_Y(ep) > 0 already
  // guarantees a nonzero deviator.
  const Vector6 n_hat = s_trial / s_trial.norm();
  const Vector6 d_eps_p = dg * std::sqrt(1.5) * n_hat;

  out.sigma = sigma_trial - mod.two_g * d_eps_p;
  out.state.eps_p = state.eps_p + d_eps_p;
  out.state.ep_bar = state.ep_bar + dg;
  out.state.sigma = out.sigma;

  const Vector6 m = trace_direction();
  const Matrix6 vol = m * m.transpose() / 3.0;
  const Matrix6 dev = Matrix6::Identity() - vol;
  const double beta = 1.0 - three_g * dg / q_trial;
  const double hp = hardening_slope(law, out.state.ep_bar);
  out.tangent = 3.0 * mod.bulk * vol + mod.two_g * beta * dev +
                mod.two_g * (hp / (three_g + hp) - beta) *
                    (n_hat * n_hat.transpose());
  return out;
}

MaterialResponse fiber_elastic(const LeafState& state, const Strain6& d_eps,
                               const Stiffness6& c_fiber) {
  MaterialResponse out;
  out.sigma = state.sigma + c_fiber * d_eps;
  out.tangent = c_fiber;
  out.state = state;
  out.state.sigma = out.sigma;
  return out;
}

}  // namespace dmn
