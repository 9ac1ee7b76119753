// This file is part of the dmn toolkit, a deep material network library
// for concurrent multiscale simulation of fiber reinforced composites.
//
// SPDX-License-Identifier: MIT

#include <dmn/macrosim.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include <dmn/csv.hpp>
#include <dmn/error.hpp>
#include <dmn/parallel.hpp>

namespace dmn {

namespace {

constexpr double kGPa = 1e9;  ///< stresses carry GPa, nodal forces carry N

// Corner signs of the VTK hexahedron in local (xi, eta, zeta) coordinates.
constexpr double kCorner[8][3] = {{-1, -1, -1}, {1, -1, -1}, {1, 1, -1},
                                  {-1, 1, -1},  {-1, -1, 1}, {1, -1, 1},
                                  {1, 1, 1},    {-1, 1, 1}};

double shape_value(int a, const Vector3& xi) {
  return 0.125 * (1.0 + kCorner[a][0] * xi[0]) * (1.0 + kCorner[a][1] * xi[1]) *
         (1.0 + kCorner[a][2] * xi[2]);
}

Eigen::Matrix<double, 3, 8> shape_gradients(const Vector3& xi) {
  Eigen::Matrix<double, 3, 8> g;
  for (int a = 0; a < 8; ++a) {
    const double sx = kCorner[a][0], sy = kCorner[a][1], sz = kCorner[a][2];
    g(0, a) = 0.125 * sx * (1.0 + sy * xi[1]) * (1.0 + sz * xi[2]);
    g(1, a) = 0.125 * sy * (1.0 + sx * xi[0]) * (1.0 + sz * xi[2]);
    g(2, a) = 0.125 * sz * (1.0 + sx * xi[0]) * (1.0 + sy * xi[1]);
  }
  return g;
}

std::array<Vector3, 8> gauss_points() {
  const double g = 1.0 / std::sqrt(3.0);
  std::array<Vector3, 8> pts;
  for (int a = 0; a < 8; ++a) {
    pts[a] = Vector3(g * kCorner[a][0], g * kCorner[a][1], g * kCorner[a][2]);
  }
  return pts;
}

struct IpGeom {
  Eigen::Matrix<double, 3, 8> grad;  ///< dN/dx at the point
  double wdetj = 0.0;                ///< Gauss weight (1) times det J
  std::array<double, 8> shape{};     ///< N_a at the point
};

std::array<IpGeom, 8> element_geometry(const MacroMesh& mesh, int e) {
  Eigen::Matrix<double, 3, 8> x;
  for (int a = 0; a < 8; ++a) x.col(a) = mesh.nodes[mesh.elements[e][a]];

  std::array<IpGeom, 8> out;
  int q = 0;
  for (const Vector3& xi : gauss_points()) {
    const Eigen::Matrix<double, 3, 8> dn = shape_gradients(xi);
    const Matrix3 jac = x * dn.transpose();
    const double detj = jac.determinant();
    if (!(detj > 0.0)) {
      std::ostringstream msg;
      msg << "element " << e << " has a non-positive Jacobian at integration point "
          << q;
      throw Error::data(msg.str());
    }
    out[q].grad = jac.inverse().transpose() * dn;
    out[q].wdetj = detj;
    for (int a = 0; a < 8; ++a) out[q].shape[a] = shape_value(a, xi);
    ++q;
  }
  return out;
}

double min_edge_length(const MacroMesh& mesh, int e) {
  static constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0},
                                       {4, 5}, {5, 6}, {6, 7}, {7, 4},
                                       {0, 4}, {1, 5}, {2, 6}, {3, 7}};
  double h = std::numeric_limits<double>::infinity();
  for (const auto& ed : kEdge) {
    const Vector3 d = mesh.nodes[mesh.elements[e][ed[0]]] -
                      mesh.nodes[mesh.elements[e][ed[1]]];
    h = std::min(h, d.norm());
  }
  return h;
}

}  // namespace

void MacroMesh::validate() const {
  if (nodes.empty() || elements.empty()) {
    throw Error::data("mesh needs at least one node and one element");
  }
  if (!(density > 0.0)) throw Error::data("mesh density must be positive");
  for (int e = 0; e < element_count(); ++e) {
    for (int a : elements[e]) {
      if (a < 0 || a >= node_count()) {
        throw Error::data("element " + std::to_string(e) +
                          " references a node out of range");
      }
    }
  }
  for (const auto& [name, set] : node_sets) {
    for (int n : set) {
      if (n < 0 || n >= node_count()) {
        throw Error::data("node set '" + name + "' references a node out of range");
      }
    }
  }
  for (int e = 0; e < element_count(); ++e) element_geometry(*this, e);
}

MacroMesh box_mesh(int nx, int ny, int nz, double lx, double ly, double lz,
                   double density) {
  if (nx < 1 || ny < 1 || nz < 1) {
    throw Error::config("box_mesh needs at least one element per direction");
  }
  if (!(lx > 0.0 && ly > 0.0 && lz > 0.0)) {
    throw Error::config("box_mesh needs positive edge lengths");
  }
  if (!(density > 0.0)) throw Error::config("box_mesh needs a positive density");

  MacroMesh m;
  m.density = density;
  const auto id = [&](int i, int j, int k) {
    return i + (nx + 1) * (j + (ny + 1) * k);
  };
  for (int k = 0; k <= nz; ++k) {
    for (int j = 0; j <= ny; ++j) {
      for (int i = 0; i <= nx; ++i) {
        m.nodes.emplace_back(lx * i / nx, ly * j / ny, lz * k / nz);
        if (i == 0) m.node_sets["xmin"].push_back(id(i, j, k));
        if (i == nx) m.node_sets["xmax"].push_back(id(i, j, k));
        if (j == 0) m.node_sets["ymin"].push_back(id(i, j, k));
        if (j == ny) m.node_sets["ymax"].push_back(id(i, j, k));
        if (k == 0) m.node_sets["zmin"].push_back(id(i, j, k));
        if (k == nz) m.node_sets["zmax"].push_back(id(i, j, k));
      }
    }
  }
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        m.elements.push_back({id(i, j, k), id(i + 1, j, k), id(i + 1, j + 1, k),
                              id(i, j + 1, k), id(i, j, k + 1),
                              id(i + 1, j, k + 1), id(i + 1, j + 1, k + 1),
                              id(i, j + 1, k + 1)});
      }
    }
  }
  return m;
}

namespace {

const char* const kFieldHeader[9] = {"element_id", "vf", "a11", "a22", "a33",
                                     "qw",         "qx", "qy",  "qz"};

}  // namespace

DescriptorField load_descriptor_field(const std::string& path) {
  const csv::Table table = csv::read_csv(path);
  if (table.header.size() != 9) {
    throw Error::data(path + ": expected 9 header fields (element_id..qz)");
  }
  for (int k = 0; k < 9; ++k) {
    if (table.header[k] != kFieldHeader[k]) {
      throw Error::data(path + ": unexpected header field '" + table.header[k] +
                        "', expected '" + kFieldHeader[k] + "'");
    }
  }

  DescriptorField field;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const int lineno = table.line_numbers[r];
    std::ostringstream where;
    where << path << ':' << lineno;
    if (row.size() != 9) {
      throw Error::data(where.str() + ": expected 9 fields, got " +
                        std::to_string(row.size()));
    }
    double val[9];
    for (int k = 0; k < 9; ++k) {
      val[k] = csv::parse_number(row[k], where.str() + ": field " +
                                             std::to_string(k + 1));
    }
    if (val[0] != static_cast<double>(r)) {
      throw Error::data(where.str() + ": element_id must equal the row position " +
                        std::to_string(r));
    }
    if (std::abs(val[2] + val[3] + val[4] - 1.0) > 1e-8) {
      throw Error::data(where.str() + ": a11 + a22 + a33 must be 1 (tolerance 1e-8)");
    }
    ElementDescriptor ed;
    ed.x = Descriptor{val[1], val[2], val[3]};
    try {
      ed.x.validate();
      ed.orientation = Rotation::from_quaternion(val[5], val[6], val[7], val[8]);
    } catch (const Error& e) {
      throw Error::data(where.str() + ": " + e.what());
    }
    field.elements.push_back(std::move(ed));
  }
  return field;
}

void save_descriptor_field(const DescriptorField& field,
                           const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error::io("cannot open '" + path + "' for writing");
  os << std::setprecision(17);
  os << "element_id,vf,a11,a22,a33,qw,qx,qy,qz\n";
  for (std::size_t e = 0; e < field.elements.size(); ++e) {
    const ElementDescriptor& ed = field.elements[e];
    Eigen::Quaterniond q(ed.orientation.matrix3());
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();  // canonical sign
    os << e << ',' << ed.x.vf << ',' << ed.x.a11 << ',' << ed.x.a22 << ','
       << ed.x.a33() << ',' << q.w() << ',' << q.x() << ',' << q.y() << ','
       << q.z() << '\n';
  }
  if (!os) throw Error::io("write failed for '" + path + "'");
}

void SimConfig::validate() const {
  if (!(end_time > 0.0)) throw Error::config("simulation end time must be positive");
  if (!(safety > 0.0 && safety <= 1.0)) {
    throw Error::config("time step safety factor must lie in (0, 1]");
  }
  if (threads < 1) throw Error::config("thread count must be at least 1");
  if (output_every < 0) throw Error::config("output cadence must be >= 0");
  for (const BoundaryCondition& bc : bcs) {
    if (bc.node_set.empty()) throw Error::config("boundary condition without a node set");
    for (const auto& vel : bc.velocity) {
      if (vel && !std::isfinite(*vel)) {
        throw Error::config("prescribed velocity must be finite");
      }
    }
  }
  constants.validate();
}

SimResult run_explicit(const MacroMesh& mesh, const DescriptorField& field,
                       const AnchorSet& db, const SimConfig& cfg) {
  mesh.validate();
  cfg.validate();
  const int ne = mesh.element_count();
  const int nn = mesh.node_count();
  if (static_cast<int>(field.elements.size()) != ne) {
    throw Error::data("descriptor field covers " +
                      std::to_string(field.elements.size()) +
                      " elements but the mesh has " + std::to_string(ne));
  }
  for (const BoundaryCondition& bc : cfg.bcs) {
    if (!mesh.node_sets.count(bc.node_set)) {
      throw Error::config("unknown node set '" + bc.node_set + "'");
    }
  }

  std::vector<std::array<IpGeom, 8>> geom(ne);
  for (int e = 0; e < ne; ++e) geom[e] = element_geometry(mesh, e);

  // One material point per integration point; the eight points of an element
  // share the queried network and the orientation override.
  std::vector<DmnMaterialPoint> points;
  points.reserve(8 * ne);
  std::vector<char> elem_has_matrix(ne, 0);
  double dt_stable = std::numeric_limits<double>::infinity();
  for (int e = 0; e < ne; ++e) {
    NetworkParams net;
    try {
      net = query(db, field.elements[e].x, cfg.allow_extrapolation);
    } catch (const Error& err) {
      throw Error(err.code(),
                  "element " + std::to_string(e) + ": " + err.what());
    }
    const DmnMaterialPoint proto(net, cfg.constants,
                                 field.elements[e].orientation);
    for (Phase ph : proto.leaf_phases()) {
      if (ph == Phase::matrix) elem_has_matrix[e] = 1;
    }

    // Elastic wave speed from the homogenized stiffness at the virgin state.
    const Stiffness6 c0 = dmn_step(proto, Strain6::Zero()).tangent;
    const Eigen::SelfAdjointEigenSolver<Matrix6> es(c0);
    const double cmax = es.eigenvalues().maxCoeff();
    if (!(cmax > 0.0)) {
      throw Error::data("element " + std::to_string(e) +
                        " has a non-positive elastic stiffness");
    }
    // The highest lumped-mass hex mode runs at ~2c sqrt(sum 1/h_i^2), so the
    // rod estimate h/c needs the sqrt(3) dimensionality factor to be stable.
    const double wave = std::sqrt(cmax * kGPa / mesh.density);
    dt_stable = std::min(dt_stable,
                         min_edge_length(mesh, e) / (std::sqrt(3.0) * wave));

    for (int q = 0; q < 8; ++q) points.push_back(proto);
  }

  const double dt = cfg.safety * dt_stable;
  const int steps = std::max(1, static_cast<int>(std::ceil(cfg.end_time / dt)));

  // Row-sum lumped mass (kg per node).
  std::vector<double> mass(nn, 0.0);
  for (int e = 0; e < ne; ++e) {
    for (int q = 0; q < 8; ++q) {
      for (int a = 0; a < 8; ++a) {
        mass[mesh.elements[e][a]] +=
            mesh.density * geom[e][q].shape[a] * geom[e][q].wdetj;
      }
    }
  }

  // Constraint table; conflicting prescriptions on shared nodes are an error.
  std::vector<char> constrained(3 * nn, 0);
  std::vector<double> prescribed(3 * nn, 0.0);
  for (const BoundaryCondition& bc : cfg.bcs) {
    for (int n : mesh.node_sets.at(bc.node_set)) {
      for (int d = 0; d < 3; ++d) {
        if (!bc.velocity[d]) continue;
        const int dof = 3 * n + d;
        if (constrained[dof] && prescribed[dof] != *bc.velocity[d]) {
          throw Error::config("node " + std::to_string(n) +
                              " receives conflicting velocity prescriptions");
        }
        constrained[dof] = 1;
        prescribed[dof] = *bc.velocity[d];
      }
    }
  }

  std::vector<Vector3> u(nn, Vector3::Zero());
  std::vector<Vector3> v(nn, Vector3(cfg.initial_velocity[0],
                                     cfg.initial_velocity[1],
                                     cfg.initial_velocity[2]));
  std::vector<Vector3> f_int(nn, Vector3::Zero());
  std::vector<Vector3> r_prev(nn, Vector3::Zero());

  SimResult result;
  result.dt = dt;
  result.steps = steps;
  for (const BoundaryCondition& bc : cfg.bcs) {
    result.boundaries.push_back({bc.node_set, {}, {}});
  }

  struct ElementOut {
    Eigen::Matrix<double, 3, 8> f = Eigen::Matrix<double, 3, 8>::Zero();
    double du_energy = 0.0;
    double vm = 0.0;
    double ep = 0.0;
  };
  std::vector<ElementOut> eout(ne);

  const auto take_snapshot = [&](int step, double time) {
    FieldSnapshot s;
    s.step = step;
    s.time = time;
    s.von_mises.resize(ne);
    s.ep_bar.resize(ne);
    for (int e = 0; e < ne; ++e) {
      double vm = 0.0, ep = 0.0;
      for (int q = 0; q < 8; ++q) {
        const DmnMaterialPoint& mp = points[8 * e + q];
        vm += von_mises(mp.stress()) / 8.0;
        if (elem_has_matrix[e]) ep += weighted_plastic_strain(mp) / 8.0;
      }
      s.von_mises[e] = vm;
      s.ep_bar[e] = ep;
    }
    result.snapshots.push_back(std::move(s));
  };
  if (cfg.output_every > 0) take_snapshot(0, 0.0);

  double energy_internal = 0.0;
  double work_external = 0.0;

  for (int step = 1; step <= steps; ++step) {
    for (int n = 0; n < nn; ++n) {
      for (int d = 0; d < 3; ++d) {
        if (constrained[3 * n + d]) v[n][d] = prescribed[3 * n + d];
      }
    }

    // Element kernel: strain increments, material update, nodal forces.
    // Every worker writes only its own slot; the reduction below is serial
    // and fixed order, so results do not depend on the thread count.
    const auto kernel = [&](int e) {
      ElementOut out;
      const auto& conn = mesh.elements[e];
      Eigen::Matrix<double, 3, 8> du;
      for (int a = 0; a < 8; ++a) du.col(a) = dt * v[conn[a]];
      for (int q = 0; q < 8; ++q) {
        DmnMaterialPoint& mp = points[8 * e + q];
        const IpGeom& g = geom[e][q];
        const Matrix3 h = du * g.grad.transpose();
        const Strain6 d_eps = mandel_vector(0.5 * (h + h.transpose()));
        StepResult sr;
        try {
          sr = dmn_step(mp, d_eps, cfg.step_tol);
        } catch (const Error& err) {
          if (err.code() != ErrorCode::solver) throw;
          std::ostringstream msg;
          msg << "element " << e << ", integration point " << q << ", step "
              << step << ": " << err.what();
          throw Error::solver(msg.str());
        }
        const Stress6 s_old = mp.stress();
        commit(mp, sr);
        const Matrix3 sig = mandel_tensor(mp.stress());
        out.f += (sig * g.grad) * (g.wdetj * kGPa);
        out.du_energy += 0.5 * (s_old + mp.stress()).dot(d_eps) * g.wdetj * kGPa;
        out.vm += von_mises(mp.stress()) / 8.0;
        if (elem_has_matrix[e]) out.ep += weighted_plastic_strain(mp) / 8.0;
      }
      eout[e] = out;
    };
    if (cfg.serial_reference) {
      for (int e = 0; e < ne; ++e) kernel(e);  // reference path, no OpenMP
    } else {
      parallel_for(ne, cfg.threads, kernel);
    }

    for (int n = 0; n < nn; ++n) f_int[n].setZero();
    for (int e = 0; e < ne; ++e) {
      const auto& conn = mesh.elements[e];
      for (int a = 0; a < 8; ++a) f_int[conn[a]] += eout[e].f.col(a);
      energy_internal += eout[e].du_energy;
    }

    for (int n = 0; n < nn; ++n) u[n] += dt * v[n];
    const double t_now = step * dt;

    // Free dofs get the velocity kick; constrained dofs report the reaction
    // m dv/dt + f_int, which is plain f_int under a constant prescription.
    std::vector<Vector3> v_new = v;
    double kinetic = 0.0;
    for (int n = 0; n < nn; ++n) {
      for (int d = 0; d < 3; ++d) {
        if (!constrained[3 * n + d]) {
          v_new[n][d] = v[n][d] - dt * f_int[n][d] / mass[n];
        }
        kinetic += 0.5 * mass[n] * v[n][d] * v_new[n][d];
      }
    }

    for (int n = 0; n < nn; ++n) {
      for (int d = 0; d < 3; ++d) {
        if (!constrained[3 * n + d]) continue;
        const double r_now = f_int[n][d];
        work_external +=
            0.5 * (r_prev[n][d] + r_now) * dt * prescribed[3 * n + d];
        r_prev[n][d] = r_now;
      }
    }

    result.times.push_back(t_now);
    result.kinetic.push_back(kinetic);
    result.internal_energy.push_back(energy_internal);
    result.external_work.push_back(work_external);
    for (std::size_t b = 0; b < cfg.bcs.size(); ++b) {
      const BoundaryCondition& bc = cfg.bcs[b];
      const auto& set = mesh.node_sets.at(bc.node_set);
      Vector3 reaction = Vector3::Zero();
      Vector3 disp = Vector3::Zero();
      for (int n : set) {
        disp += u[n] / static_cast<double>(set.size());
        for (int d = 0; d < 3; ++d) {
          if (bc.velocity[d] && constrained[3 * n + d]) reaction[d] += f_int[n][d];
        }
      }
      result.boundaries[b].reaction.push_back(reaction);
      result.boundaries[b].displacement.push_back(disp);
    }

    if (cfg.output_every > 0 &&
        (step % cfg.output_every == 0 || step == steps)) {
      take_snapshot(step, t_now);
    }
    v = std::move(v_new);
  }

  result.displacement = u;
  result.velocity = v;
  return result;
}

void save_history(const SimResult& result, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error::io("cannot open '" + path + "' for writing");
  os << std::setprecision(17);
  os << "time";
  for (const BoundaryHistory& b : result.boundaries) {
    os << ",R_" << b.node_set << "_x"
       << ",R_" << b.node_set << "_y"
       << ",R_" << b.node_set << "_z"
       << ",u_" << b.node_set << "_x"
       << ",u_" << b.node_set << "_y"
       << ",u_" << b.node_set << "_z";
  }
  os << '\n';
  for (std::size_t k = 0; k < result.times.size(); ++k) {
    os << result.times[k];
    for (const BoundaryHistory& b : result.boundaries) {
      for (int d = 0; d < 3; ++d) os << ',' << b.reaction[k][d];
      for (int d = 0; d < 3; ++d) os << ',' << b.displacement[k][d];
    }
    os << '\n';
  }
  if (!os) throw Error::io("write failed for '" + path + "'");
}

void write_fields(const MacroMesh& mesh, const FieldSnapshot& snapshot,
                  const std::string& path) {
  const int ne = mesh.element_count();
  if (static_cast<int>(snapshot.von_mises.size()) != ne ||
      static_cast<int>(snapshot.ep_bar.size()) != ne) {
    throw Error::data("field snapshot does not match the mesh element count");
  }
  std::ofstream os(path);
  if (!os) throw Error::io("cannot open '" + path + "' for writing");
  os << std::setprecision(17);
  os << "# vtk DataFile Version 3.0\n";
  os << "dmn macroscale fields, step " << snapshot.step << ", time "
     << snapshot.time << " s\n";
  os << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << mesh.node_count() << " double\n";
  for (const Vector3& x : mesh.nodes) {
    os << x[0] << ' ' << x[1] << ' ' << x[2] << '\n';
  }
  os << "CELLS " << ne << ' ' << 9 * ne << '\n';
  for (const auto& conn : mesh.elements) {
    os << 8;
    for (int a : conn) os << ' ' << a;
    os << '\n';
  }
  os << "CELL_TYPES " << ne << '\n';
  for (int e = 0; e < ne; ++e) os << 12 << '\n';
  os << "CELL_DATA " << ne << '\n';
  os << "SCALARS von_mises_GPa double 1\nLOOKUP_TABLE default\n";
  for (double vm : snapshot.von_mises) os << vm << '\n';
  os << "SCALARS ep_bar_weighted double 1\nLOOKUP_TABLE default\n";
  for (double ep : snapshot.ep_bar) os << ep << '\n';
  if (!os) throw Error::io("write failed for '" + path + "'");
}

}  // namespace dmn
