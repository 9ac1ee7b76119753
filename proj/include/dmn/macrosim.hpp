// This file is part of the dmn toolkit, a deep material network library
// for concurrent multiscale simulation of fiber reinforced composites.
//
// SPDX-License-Identifier: MIT

#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dmn/database.hpp"
#include "dmn/datagen.hpp"
#include "dmn/mandel.hpp"
#include "dmn/online.hpp"

namespace dmn {

/// Small-strain explicit solid mesh: 8-node hexahedra (VTK node ordering),
/// coordinates in m, density in kg/m^3, named boundary node sets.
struct MacroMesh {
  std::vector<Vector3> nodes;
  std::vector<std::array<int, 8>> elements;
  double density = 0.0;
  std::map<std::string, std::vector<int>> node_sets;

  int node_count() const { return static_cast<int>(nodes.size()); }
  int element_count() const { return static_cast<int>(elements.size()); }

  /// Connectivity in range, density > 0, positive Jacobian at every 2x2x2
  /// integration point. Throws Error(data).
  void validate() const;
};

/// Regular box [0,lx]x[0,ly]x[0,lz] split into nx*ny*nz hexahedra, with face
/// node sets "xmin", "xmax", "ymin", "ymax", "zmin", "zmax".
MacroMesh box_mesh(int nx, int ny, int nz, double lx, double ly, double lz,
                   double density);

/// Per-element microstructure: database descriptor plus the rotation from
/// the orientation principal frame into the global frame.
struct ElementDescriptor {
  Descriptor x;
  Rotation orientation;
};

struct DescriptorField {
  std::vector<ElementDescriptor> elements;
};

/// CSV with header element_id,vf,a11,a22,a33,qw,qx,qy,qz. element_id must
/// equal the 0-based row position; a33 must complete the unit trace (1e-8);
/// the quaternion must have unit norm (1e-8). Violations throw Error(data)
/// naming the line.
DescriptorField load_descriptor_field(const std::string& path);
void save_descriptor_field(const DescriptorField& field,
                           const std::string& path);

/// Constant prescribed velocity on a node set; unset components stay free.
struct BoundaryCondition {
  std::string node_set;
  std::array<std::optional<double>, 3> velocity;  ///< m/s per global dof
};

struct SimConfig {
  double end_time = 0.0;  ///< s
  double safety = 0.9;    ///< fraction of the stable time step, in (0, 1]
  std::vector<BoundaryCondition> bcs;
  std::array<double, 3> initial_velocity = {0.0, 0.0, 0.0};  ///< all nodes
  int output_every = 0;  ///< snapshot cadence in steps; 0 disables fields
  int threads = 1;
  bool serial_reference = false;  ///< force the serial element kernel
  bool allow_extrapolation = false;  ///< passed through to database queries
  double step_tol = -1.0;            ///< dmn_step tolerance; -1 = default
  OnlineConstants constants = OnlineConstants::defaults();

  void validate() const;  ///< Throws Error(config).
};

/// Element averages captured every `output_every` steps (plus start and end).
struct FieldSnapshot {
  int step = 0;
  double time = 0.0;
  std::vector<double> von_mises;  ///< GPa, mean over integration points
  std::vector<double> ep_bar;     ///< weighted matrix plastic strain, mean
};

/// Reaction force sum (N) and mean displacement (m) of one boundary set,
/// one entry per completed step.
struct BoundaryHistory {
  std::string node_set;
  std::vector<Vector3> reaction;
  std::vector<Vector3> displacement;
};

struct SimResult {
  double dt = 0.0;
  int steps = 0;
  std::vector<double> times;  ///< end-of-step times, size steps
  std::vector<BoundaryHistory> boundaries;  ///< aligned with cfg.bcs
  std::vector<double> kinetic;          ///< J, per step
  std::vector<double> internal_energy;  ///< J, per step
  std::vector<double> external_work;    ///< J, per step
  std::vector<FieldSnapshot> snapshots;
  std::vector<Vector3> displacement;  ///< final, per node
  std::vector<Vector3> velocity;      ///< final (half step), per node
};

/// Central-difference explicit dynamics with lumped mass and one
/// DmnMaterialPoint per integration point (network queried from the database
/// per element, root override from the field orientation). The stable time
/// step is cfg.safety * min_edge / (sqrt(3) * elastic wave speed), the wave
/// speed taken from each element's homogenized virgin stiffness; sqrt(3)
/// covers the highest mode of a lumped hexahedron in three dimensions.
/// Element kernels run in parallel; assembly is
/// a fixed-order serial reduction, so results are identical across thread
/// counts. Material failures abort with element/step diagnostics.
SimResult run_explicit(const MacroMesh& mesh, const DescriptorField& field,
                       const AnchorSet& db, const SimConfig& cfg);

/// History CSV: time, then R_<set>_{x,y,z} (N) and u_<set>_{x,y,z} (m) per
/// boundary set.
void save_history(const SimResult& result, const std::string& path);

/// Legacy ASCII VTK unstructured grid with cell data arrays "von_mises_GPa"
/// and "ep_bar_weighted".
void write_fields(const MacroMesh& mesh, const FieldSnapshot& snapshot,
                  const std::string& path);

}  // namespace dmn
