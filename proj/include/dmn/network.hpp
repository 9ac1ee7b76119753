// This file is part of the dmn toolkit, a deep material network library
// for concurrent multiscale simulation of fiber reinforced composites.
//
// SPDX-License-Identifier: MIT

#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "dmn/block.hpp"
#include "dmn/mandel.hpp"

namespace dmn {

/// Leaf phase tags. Phase 1 (fiber) receives C_fiber, phase 2 (matrix)
/// receives C_matrix in the forward pass.
enum class Phase : int { fiber = 0, matrix = 1 };

/// Parameters of a complete balanced binary material network with N layers:
/// 2^(N-1) leaves carrying weight activations z and a phase tag each, and
/// 2^(N-1) - 1 internal blocks carrying Euler angle triplets. Nodes are
/// stored heap style: node n has children 2n+1 and 2n+2, leaf j is node
/// (leaves - 1) + j. The effective weight of a leaf is relu(z); a subtree of
/// total weight zero is inactive and never evaluated.
struct NetworkParams {
  int layers = 0;
  std::vector<double> z;                      ///< per leaf
  std::vector<std::array<double, 3>> angles;  ///< per internal block (alpha, beta, gamma)
  std::vector<Phase> leaf_phase;              ///< per leaf

  struct Metadata {
    std::optional<std::array<double, 3>> descriptor;  ///< (vf, a11, a22) of origin
    std::string training_history_ref;
    std::string note;
  } metadata;

  int leaf_count() const { return 1 << (layers - 1); }
  int block_count() const { return (1 << (layers - 1)) - 1; }
  int node_count() const { return 2 * leaf_count() - 1; }

  /// Structural well-formedness (array sizes versus layers). Throws Error(data).
  void validate() const;
};

/// Alternating phase assignment (even leaf index -> fiber); guarantees both
/// phases are reachable at every depth.
std::vector<Phase> alternating_phases(int layers);

struct NetworkStats {
  int total_dofs = 0;     ///< leaf count of the balanced tree
  int active_dofs = 0;    ///< leaves with relu(z) > 0
  int active_fiber = 0;
  int active_matrix = 0;
  double volume_fraction = 0.0;
  std::vector<double> node_weights;  ///< subtree weight per heap node
};

/// Homogenized stiffness of the network. Leaves carry their phase stiffness;
/// every block mixes its children with f1 = w_left / (w_left + w_right) and
/// applies its rotation; inactive subtrees are skipped. Throws Error(data)
/// when the root weight is zero.
Stiffness6 forward(const NetworkParams& p, const Stiffness6& C_fiber,
                   const Stiffness6& C_matrix);

/// Gradients of <upstream, forward(p)> for all z and angles.
struct NetworkGradients {
  std::vector<double> dz;
  std::vector<std::array<double, 3>> dangles;
};

/// Recorded forward pass: caches per-node stiffness and weights so a backward
/// sweep can run without re-evaluating the tree.
class NetworkTape {
 public:
  NetworkTape(const NetworkParams& p, const Stiffness6& C_fiber,
              const Stiffness6& C_matrix);

  const Stiffness6& output() const { return output_; }

  /// Reverse-mode sweep. relu subgradient at z = 0 is taken as 0, so dead
  /// leaves and dead subtrees receive exactly zero gradient.
  NetworkGradients backward(const Matrix6& upstream) const;

 private:
  const NetworkParams& params_;
  std::vector<double> w_;          // subtree weight per node
  std::vector<Matrix6> C_;         // output stiffness per active node
  Stiffness6 output_;
};

/// forward plus gradients in one call.
std::pair<Stiffness6, NetworkGradients> forward_with_grads(
    const NetworkParams& p, const Stiffness6& C_fiber,
    const Stiffness6& C_matrix, const Matrix6& upstream);

/// Sum of fiber leaf weights over the total weight. Throws Error(data) on a
/// degenerate (zero root weight) network.
double extract_volume_fraction(const NetworkParams& p);

NetworkStats stats(const NetworkParams& p);

/// Canonical pruned form: dead leaves get z = 0, blocks whose whole subtree
/// is inactive get zeroed angles. The forward map is unchanged on all inputs;
/// active structure is reported by stats().
NetworkParams compress(const NetworkParams& p);

/// Versioned JSON serialization (schema documented in the README).
std::string serialize(const NetworkParams& p);
NetworkParams deserialize(const std::string& json_text);

void save_model(const NetworkParams& p, const std::string& path);
NetworkParams load_model(const std::string& path);

}  // namespace dmn
