// This file is part of the dmn toolkit, a deep material network library
// for concurrent multiscale simulation of fiber reinforced composites.
//
// SPDX-License-Identifier: MIT

#pragma once

#include <array>
#include <string>
#include <vector>

#include "dmn/datagen.hpp"
#include "dmn/network.hpp"
#include "dmn/plasticity.hpp"

namespace dmn {

struct SolveReport {
  int iterations = 0;
  double residual = 0.0;  ///< GPa, infinity norm over interface tractions
  bool converged = false;
};

struct StepResult;

/// One material point backed by a (compressed) network: elastic fiber and
/// elasto-plastic matrix leaves, interface strain jumps as solver unknowns.
/// Committed history lives here; trial steps never touch it until commit().
class DmnMaterialPoint {
 public:
  /// `params` is compressed on construction. The override rotation maps the
  /// network frame into the macroscopic frame (orientation of the grain).
  DmnMaterialPoint(const NetworkParams& params, const OnlineConstants& constants,
                   const Rotation& root_override = Rotation());

  int active_leaf_count() const { return static_cast<int>(states_.size()); }
  int jump_block_count() const { return jump_blocks_; }

  const NetworkParams& params() const { return params_; }
  const Rotation& root_override() const { return override_; }
  const Stiffness6& fiber_stiffness() const { return c_fiber_; }
  const Stiffness6& matrix_stiffness() const { return c_matrix_; }
  const HardeningLaw& hardening() const { return law_; }
  double matrix_shear_modulus() const { return 0.5 * c_matrix_(3, 3); }

  /// Committed macroscopic state.
  const Strain6& strain() const { return eps_macro_; }
  const Stress6& stress() const { return sigma_macro_; }

  /// Committed per-leaf state, indexed by active leaf slot. leaf_nodes()
  /// maps slots back to heap indices of params() for cross-checking.
  const std::vector<LeafState>& leaf_states() const { return states_; }
  const std::vector<Strain6>& leaf_strains() const { return leaf_eps_; }
  const std::vector<double>& leaf_weights() const { return leaf_w_; }
  const std::vector<Phase>& leaf_phases() const { return leaf_phase_; }
  const std::vector<int>& leaf_nodes() const { return leaf_heap_; }

  /// Warm-start interface jumps (Mandel components on the interface rows),
  /// one triplet per two-child block.
  const std::vector<Vector3>& jumps() const { return jumps_; }

 private:
  friend class TreeEvaluator;
  friend StepResult dmn_step(const DmnMaterialPoint&, const Strain6&, double,
                             int);
  friend void commit(DmnMaterialPoint&, const StepResult&);

  struct Node {
    enum class Kind { leaf, pass, block } kind = Kind::leaf;
    int left = -1, right = -1;  ///< child node indices
    int leaf = -1;              ///< active leaf slot (leaves only)
    int jump = -1;              ///< jump block index (two-child blocks only)
    double f1 = 0.0;            ///< left child weight fraction
    Rotation rot;               ///< identity on leaves
  };

  int build(int heap, const std::vector<double>& weights);

  NetworkParams params_;
  Rotation override_;
  Stiffness6 c_fiber_, c_matrix_;
  HardeningLaw law_;

  std::vector<Node> nodes_;  ///< nodes_[root_] is the network root
  int root_ = -1;
  int jump_blocks_ = 0;
  std::vector<int> leaf_heap_;
  std::vector<double> leaf_w_;
  std::vector<Phase> leaf_phase_;

  // committed history
  std::vector<LeafState> states_;
  std::vector<Strain6> leaf_eps_;
  std::vector<Vector3> jumps_;
  Strain6 eps_macro_ = Strain6::Zero();
  Stress6 sigma_macro_ = Stress6::Zero();
};

/// Outcome of one (uncommitted) strain-driven step.
struct StepResult {
  Stress6 stress = Stress6::Zero();
  Stiffness6 tangent = Stiffness6::Zero();
  SolveReport report;

  /// Candidate state, applied by commit().
  struct Pending {
    std::vector<LeafState> states;
    std::vector<Strain6> leaf_eps;
    std::vector<Vector3> jumps;
    Strain6 eps_macro = Strain6::Zero();
    Stress6 sigma_macro = Stress6::Zero();
  } pending;
};

/// Advances the material point by a macroscopic strain increment: Newton on
/// all interface jumps until the traction residual drops below tol (default
/// 1e-8 x matrix shear modulus), with up to 8 increment bisections on
/// non-convergence. Pure with respect to `mp`; the returned tangent is the
/// condensed algorithmic one. Throws Error(solver) with the report embedded
/// once substepping is exhausted.
StepResult dmn_step(const DmnMaterialPoint& mp, const Strain6& d_eps,
                    double tol = -1.0, int max_iter = 40);

void commit(DmnMaterialPoint& mp, const StepResult& result);

/// Weight-averaged equivalent plastic strain over active matrix leaves.
/// Throws Error(data) when the network has none.
double weighted_plastic_strain(const DmnMaterialPoint& mp);

/// One step of the mixed-control driver: every component is either strain
/// controlled (target = total strain, tensor convention) or stress controlled
/// (target = stress in GPa). Component order 11, 22, 33, 23, 13, 12.
struct PathStep {
  std::array<bool, 6> strain_controlled{};
  std::array<double, 6> targets{};
};

struct PathPoint {
  int step = 0;
  Strain6 eps = Strain6::Zero();    ///< Mandel components
  Stress6 sigma = Stress6::Zero();  ///< Mandel components
  double ep_bar_weighted = 0.0;
};

/// Drives the point through the path: outer Newton on the stress-controlled
/// strain components using the condensed tangent, inner dmn_step per trial,
/// commit per converged step. Throws Error(solver) naming the step index on
/// outer non-convergence.
std::vector<PathPoint> mixed_control_path(DmnMaterialPoint& mp,
                                          const std::vector<PathStep>& path,
                                          double tol = -1.0);

/// Path CSV: header c11,...,c12,t11,...,t12 where c_* is "strain" or
/// "stress" and t_* the target (tensor strain / GPa). Throws Error(data) on
/// malformed rows (line numbers included) and on an empty path.
std::vector<PathStep> load_path(const std::string& path);

/// History CSV: step, eps_* (tensor components), sigma_* (GPa),
/// ep_bar_weighted.
void save_path_history(const std::vector<PathPoint>& history,
                       const std::string& path);

}  // namespace dmn
