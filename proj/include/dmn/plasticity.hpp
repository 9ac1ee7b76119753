// This file is part of the dmn toolkit, a deep material network library
// for concurrent multiscale simulation of fiber reinforced composites.
//
// SPDX-License-Identifier: MIT

#pragma once

#include <dmn/mandel.hpp>

namespace dmn {

// Exponential isotropic hardening: the flow stress rises from a3 - a2 in the
// virgin state toward the saturation value a3.
struct HardeningLaw {
  double a1 = 140.0;  // saturation rate per unit equivalent plastic strain
  double a2 = 0.09;   // GPa, recoverable hardening range
  double a3 = 0.12;   // GPa, saturation stress

  // Throws Error::config unless a1 > 0, a2 >= 0 and a3 - a2 > 0.
  void validate() const;
};

// sigma_Y(ep) = a3 - a2 * exp(-a1 * ep).  Requires ep_bar >= 0.
double yield_stress(const HardeningLaw& law, double ep_bar);

// d sigma_Y / d ep.  Nonnegative for admissible laws.
double hardening_slope(const HardeningLaw& law, double ep_bar);

// History carried by one leaf material point between committed steps.
struct LeafState {
  Strain6 eps_p = Strain6::Zero();  // plastic strain, always deviatoric
  double ep_bar = 0.0;              // accumulated equivalent plastic strain
  Stress6 sigma = Stress6::Zero();  // last converged stress, GPa
};

// Result of one pure constitutive update.  `state` is the candidate next
// state; callers commit it only once the surrounding solve has accepted the
// step, so a rejected global iteration leaves no trace in the history.
struct MaterialResponse {
  Stress6 sigma = Stress6::Zero();
  Stiffness6 tangent = Stiffness6::Zero();
  LeafState state;
};

// J2 radial return with the exponential hardening law.  `elastic` must be an
// isotropic SPD stiffness; the scalar consistency equation is solved by
// Newton with a bisection safeguard to 1e-12 GPa on the residual.  The
// returned tangent is the algorithmically consistent one, so an outer Newton
// loop built on it converges quadratically.  Throws Error::config for a non
// isotropic elastic stiffness and Error::solver if the scalar solve stalls.
MaterialResponse matrix_return_map(const LeafState& state, const Strain6& d_eps,
                                   const Stiffness6& elastic,
                                   const HardeningLaw& law);

// Orthotropic elastic fiber update: the stress advances by c_fiber * d_eps
// and the tangent is c_fiber itself.  Never yields, never throws.
MaterialResponse fiber_elastic(const LeafState& state, const Strain6& d_eps,
                               const Stiffness6& c_fiber);

}  // namespace dmn
