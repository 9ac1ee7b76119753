// This file is part of the dmn toolkit, a deep material network library
// for concurrent multiscale simulation of fiber reinforced composites.
//
// SPDX-License-Identifier: MIT

#include <dmn/online.hpp>

#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <utility>

#include <Eigen/LU>

#include <dmn/csv.hpp>
#include <dmn/error.hpp>

namespace dmn {

namespace {

using MatrixX = Eigen::MatrixXd;
using Matrix6X = Eigen::Matrix<double, 6, Eigen::Dynamic>;

// Mandel components of the interface rows (33, 23, 13): strain jumps and
// traction residuals both live on this subspace.
constexpr int kInterfaceRow = 2;

double mandel_shear_scale(int component) {
  return component >= 3 ? kSqrt2 : 1.0;
}

}  // namespace

DmnMaterialPoint::DmnMaterialPoint(const NetworkParams& params,
                                   const OnlineConstants& constants,
                                   const Rotation& root_override)
    : params_(compress(params)), override_(root_override) {
  constants.validate();
  c_fiber_ = stiffness_from_engineering(constants.fiber);
  c_matrix_ = isotropic_stiffness(constants.matrix_E, constants.matrix_nu);
  law_ = constants.hardening;

  const NetworkStats st = stats(params_);
  if (st.active_dofs == 0) {
    throw Error::data("material point: network has no active leaves");
  }
  root_ = build(0, st.node_weights);
  states_.resize(leaf_heap_.size());
  leaf_eps_.assign(leaf_heap_.size(), Strain6::Zero());
  jumps_.assign(jump_blocks_, Vector3::Zero());
}

int DmnMaterialPoint::build(int heap, const std::vector<double>& weights) {
  if (!(weights[heap] > 0.0)) return -1;
  const int leaves = params_.leaf_count();
  Node node;
  if (heap >= leaves - 1) {
    node.kind = Node::Kind::leaf;
    node.leaf = static_cast<int>(leaf_heap_.size());
    leaf_heap_.push_back(heap);
    leaf_w_.push_back(weights[heap]);
    leaf_phase_.push_back(params_.leaf_phase[heap - (leaves - 1)]);
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size()) - 1;
  }
  const int l = build(2 * heap + 1, weights);
  const int r = build(2 * heap + 2, weights);
  node.rot = Rotation(params_.angles[heap][0], params_.angles[heap][1],
                      params_.angles[heap][2]);
  if (l >= 0 && r >= 0) {
    node.kind = Node::Kind::block;
    node.left = l;
    node.right = r;
    node.f1 =
        weights[2 * heap + 1] / (weights[2 * heap + 1] + weights[2 * heap + 2]);
    node.jump = jump_blocks_++;
  } else {
    // exactly one live child: the rotation still applies
    node.kind = Node::Kind::pass;
    node.left = l >= 0 ? l : r;
  }
  nodes_.push_back(node);
  return static_cast<int>(nodes_.size()) - 1;
}

namespace {

struct EvalOut {
  Stress6 sigma = Stress6::Zero();
  Matrix6 T = Matrix6::Zero();  // total d sigma / d eps_macro
  Matrix6X D;                   // total d sigma / d jumps, 6 x 3B
  Eigen::VectorXd residual;     // interface traction mismatch, 3B
  MatrixX jac;                  // d residual / d jumps
  MatrixX w;                    // d residual / d eps_macro, 3B x 6
  std::vector<LeafState> states;
  std::vector<Strain6> leaf_eps;
};

}  // namespace

/// One full de-homogenize / return-map / homogenize sweep at fixed jumps,
/// with total derivatives against the jumps (A chain) and the macroscopic
/// strain (P chain) assembled on the way up.
class TreeEvaluator {
 public:
  TreeEvaluator(const DmnMaterialPoint& mp, const std::vector<LeafState>& base,
                const std::vector<Strain6>& base_eps)
      : mp_(mp), base_(base), base_eps_(base_eps),
        dim_(3 * mp.jump_block_count()) {}

  EvalOut run(const std::vector<Vector3>& jumps, const Strain6& eps_macro) {
    x_ = &jumps;
    out_ = EvalOut{};
    out_.states.resize(base_.size());
    out_.leaf_eps.resize(base_.size());
    out_.D = Matrix6X::Zero(6, dim_);
    out_.residual = Eigen::VectorXd::Zero(dim_);
    out_.jac = MatrixX::Zero(dim_, dim_);
    out_.w = MatrixX::Zero(dim_, 6);

    const Matrix6 qo = mp_.override_.matrix6();
    const Matrix6 qot = qo.transpose();
    const Frame root = eval(mp_.root_, qot * eps_macro,
                            Matrix6X::Zero(6, dim_), qot);
    out_.sigma = qo * root.sigma;
    out_.T = qo * root.T;
    out_.D = qo * root.D;
    return std::move(out_);
  }

 private:
  struct Frame {
    Stress6 sigma;
    Matrix6 T;
    Matrix6X D;
  };

  Frame eval(int ni, const Vector6& eps, const Matrix6X& A, const Matrix6& P) {
    const auto& node = mp_.nodes_[ni];
    using Kind = DmnMaterialPoint::Node::Kind;

    if (node.kind == Kind::leaf) {
      const int s = node.leaf;
      const Strain6 d_eps = eps - base_eps_[s];
      const MaterialResponse r =
          mp_.leaf_phases()[s] == Phase::fiber
              ? fiber_elastic(base_[s], d_eps, mp_.fiber_stiffness())
              : matrix_return_map(base_[s], d_eps, mp_.matrix_stiffness(),
                                  mp_.hardening());
      out_.states[s] = r.state;
      out_.leaf_eps[s] = eps;
      return {r.sigma, r.tangent * P, r.tangent * A};
    }

    const Matrix6& q = node.rot.matrix6();
    const Matrix6 qt = q.transpose();
    if (node.kind == Kind::pass) {
      const Frame c = eval(node.left, qt * eps, qt * A, qt * P);
      return {q * c.sigma, q * c.T, q * c.D};
    }

    const double f1 = node.f1;
    const double f2 = 1.0 - f1;
    const Vector3& a = (*x_)[node.jump];
    const int col = 3 * node.jump;

    Vector6 e1 = qt * eps;
    Vector6 e2 = e1;
    e1.segment<3>(kInterfaceRow) += f2 * a;
    e2.segment<3>(kInterfaceRow) -= f1 * a;

    Matrix6X a1 = qt * A;
    Matrix6X a2 = a1;
    a1.block<3, 3>(kInterfaceRow, col) += f2 * Matrix3::Identity();
    a2.block<3, 3>(kInterfaceRow, col) -= f1 * Matrix3::Identity();

    const Matrix6 pc = qt * P;
    const Frame c1 = eval(node.left, e1, a1, pc);
    const Frame c2 = eval(node.right, e2, a2, pc);

    out_.residual.segment<3>(col) =
        (c1.sigma - c2.sigma).segment<3>(kInterfaceRow);
    out_.jac.middleRows<3>(col) = (c1.D - c2.D).middleRows<3>(kInterfaceRow);
    out_.w.middleRows<3>(col) = (c1.T - c2.T).middleRows<3>(kInterfaceRow);

    return {q * (f1 * c1.sigma + f2 * c2.sigma),
            q * (f1 * c1.T + f2 * c2.T), q * (f1 * c1.D + f2 * c2.D)};
  }

  const DmnMaterialPoint& mp_;
  const std::vector<LeafState>& base_;
  const std::vector<Strain6>& base_eps_;
  const int dim_;
  const std::vector<Vector3>* x_ = nullptr;
  EvalOut out_;
};

namespace {

struct Working {
  std::vector<LeafState> states;
  std::vector<Strain6> leaf_eps;
  std::vector<Vector3> jumps;
  Strain6 eps = Strain6::Zero();
};

struct Attempt {
  bool ok = false;
  int iterations = 0;
  double residual = 0.0;
  Stress6 sigma = Stress6::Zero();
  Stiffness6 tangent = Stiffness6::Zero();
  std::vector<Vector3> jumps;
  EvalOut out;
};

Attempt try_newton(const DmnMaterialPoint& mp, const Working& work,
                   const Strain6& d_eps, double tol, int max_iter) {
  TreeEvaluator ev(mp, work.states, work.leaf_eps);
  const Strain6 eps_new = work.eps + d_eps;
  const int nb = mp.jump_block_count();
  std::vector<Vector3> x = work.jumps;

  Attempt at;
  EvalOut out;
  try {
    out = ev.run(x, eps_new);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::solver) throw;
    return at;  // leaf-level failure; let the caller cut the increment
  }
  double rnorm = nb > 0 ? out.residual.lpNorm<Eigen::Infinity>() : 0.0;

  for (int it = 0;; ++it) {
    if (rnorm < tol) {
      at.ok = true;
      at.iterations = it;
      at.residual = rnorm;
      at.sigma = out.sigma;
      if (nb > 0) {
        at.tangent = out.T - out.D * out.jac.partialPivLu().solve(out.w);
      } else {
        at.tangent = out.T;
      }
      at.jumps = std::move(x);
      at.out = std::move(out);
      return at;
    }
    if (it >= max_iter) {
      at.iterations = it;
      at.residual = rnorm;
      return at;
    }

    const Eigen::VectorXd dx = out.jac.partialPivLu().solve(-out.residual);
    if (!dx.allFinite()) {
      at.iterations = it;
      at.residual = rnorm;
      return at;
    }

    // backtracking on the residual norm; a stalled search aborts the attempt
    double step = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 9 && !improved; ++ls, step *= 0.5) {
      std::vector<Vector3> xt = x;
      for (int b = 0; b < nb; ++b) xt[b] += step * dx.segment<3>(3 * b);
      EvalOut trial;
      try {
        trial = ev.run(xt, eps_new);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::solver) throw;
        continue;
      }
      const double tn = trial.residual.lpNorm<Eigen::Infinity>();
      if (tn < rnorm) {
        x = std::move(xt);
        out = std::move(trial);
        rnorm = tn;
        improved = true;
      }
    }
    if (!improved) {
      at.iterations = it + 1;
      at.residual = rnorm;
      return at;
    }
  }
}

}  // namespace

StepResult dmn_step(const DmnMaterialPoint& mp, const Strain6& d_eps,
                    double tol, int max_iter) {
  if (!d_eps.allFinite()) throw Error::config("dmn_step: non-finite strain increment");
  if (max_iter < 1) throw Error::config("dmn_step: max_iter must be >= 1");
  if (!(tol > 0.0)) tol = 1e-8 * mp.matrix_shear_modulus();

  Working work{mp.leaf_states(), mp.leaf_strains(), mp.jumps(), mp.strain()};
  SolveReport report;
  Stress6 sigma = mp.stress();
  Stiffness6 tangent = Stiffness6::Zero();

  const std::function<void(const Strain6&, int)> advance =
      [&](const Strain6& d, int depth) {
        Attempt at = try_newton(mp, work, d, tol, max_iter);
        report.iterations += at.iterations;
        if (at.ok) {
          work.states = std::move(at.out.states);
          work.leaf_eps = std::move(at.out.leaf_eps);
          work.jumps = std::move(at.jumps);
          work.eps += d;
          sigma = at.sigma;
          tangent = at.tangent;
          report.residual = at.residual;
          return;
        }
        if (depth >= 8) {
          std::ostringstream msg;
          msg << "dmn_step did not converge after 8 increment bisections"
              << " (iterations=" << report.iterations
              << ", residual=" << at.residual << " GPa, tol=" << tol << ")";
          throw Error::solver(msg.str());
        }
        const Strain6 half = 0.5 * d;
        advance(half, depth + 1);
        advance(half, depth + 1);
      };
  advance(d_eps, 0);

  report.converged = true;
  StepResult result;
  result.stress = sigma;
  result.tangent = tangent;
  result.report = report;
  result.pending.states = std::move(work.states);
  result.pending.leaf_eps = std::move(work.leaf_eps);
  result.pending.jumps = std::move(work.jumps);
  result.pending.eps_macro = work.eps;
  result.pending.sigma_macro = sigma;
  return result;
}

void commit(DmnMaterialPoint& mp, const StepResult& result) {
  if (result.pending.states.size() != mp.states_.size() ||
      result.pending.jumps.size() != mp.jumps_.size()) {
    throw Error::config("commit: step result does not match this point");
  }
  mp.states_ = result.pending.states;
  mp.leaf_eps_ = result.pending.leaf_eps;
  mp.jumps_ = result.pending.jumps;
  mp.eps_macro_ = result.pending.eps_macro;
  mp.sigma_macro_ = result.pending.sigma_macro;
}

double weighted_plastic_strain(const DmnMaterialPoint& mp) {
  double wsum = 0.0;
  double acc = 0.0;
  for (int s = 0; s < mp.active_leaf_count(); ++s) {
    if (mp.leaf_phases()[s] == Phase::matrix) {
      wsum += mp.leaf_weights()[s];
      acc += mp.leaf_weights()[s] * mp.leaf_states()[s].ep_bar;
    }
  }
  if (!(wsum > 0.0)) {
    throw Error::data("weighted_plastic_strain: no active matrix leaves");
  }
  return acc / wsum;
}

std::vector<PathPoint> mixed_control_path(DmnMaterialPoint& mp,
                                          const std::vector<PathStep>& path,
                                          double tol) {
  std::vector<PathPoint> history;
  history.reserve(path.size());

  bool has_matrix = false;
  for (Phase ph : mp.leaf_phases()) has_matrix = has_matrix || ph == Phase::matrix;

  for (std::size_t s = 0; s < path.size(); ++s) {
    const PathStep& ps = path[s];
    std::vector<int> free_comp;
    Strain6 eps_goal = mp.strain();
    for (int k = 0; k < 6; ++k) {
      if (ps.strain_controlled[k]) {
        eps_goal[k] = mandel_shear_scale(k) * ps.targets[k];
      } else {
        free_comp.push_back(k);
      }
    }

    StepResult res;
    bool done = false;
    for (int it = 0; it < 30 && !done; ++it) {
      res = dmn_step(mp, eps_goal - mp.strain(), tol);
      if (free_comp.empty()) {
        done = true;
        break;
      }
      const int m = static_cast<int>(free_comp.size());
      Eigen::VectorXd rho(m);
      for (int i = 0; i < m; ++i) {
        rho[i] = res.stress[free_comp[i]] -
                 mandel_shear_scale(free_comp[i]) * ps.targets[free_comp[i]];
      }
      const double out_tol =
          std::max(1e-12, 1e-9 * res.stress.lpNorm<Eigen::Infinity>());
      if (rho.lpNorm<Eigen::Infinity>() < out_tol) {
        done = true;
        break;
      }
      MatrixX jf(m, m);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
          jf(i, j) = res.tangent(free_comp[i], free_comp[j]);
      const Eigen::VectorXd du = jf.partialPivLu().solve(-rho);
      if (!du.allFinite()) break;
      for (int i = 0; i < m; ++i) eps_goal[free_comp[i]] += du[i];
    }
    if (!done) {
      std::ostringstream msg;
      msg << "mixed control did not converge at path step " << (s + 1);
      throw Error::solver(msg.str());
    }
    commit(mp, res);

    PathPoint pt;
    pt.step = static_cast<int>(s + 1);
    pt.eps = mp.strain();
    pt.sigma = mp.stress();
    pt.ep_bar_weighted = has_matrix ? weighted_plastic_strain(mp) : 0.0;
    history.push_back(pt);
  }
  return history;
}

namespace {

const char* const kPathHeader[12] = {"c11", "c22", "c33", "c23", "c13", "c12",
                                     "t11", "t22", "t33", "t23", "t13", "t12"};
const char* const kComponentName[6] = {"11", "22", "33", "23", "13", "12"};

}  // namespace

std::vector<PathStep> load_path(const std::string& path) {
  const csv::Table table = csv::read_csv(path);
  if (table.header.size() != 12) {
    throw Error::data(path + ": expected 12 header fields (c11..c12,t11..t12)");
  }
  for (int k = 0; k < 12; ++k) {
    if (table.header[k] != kPathHeader[k]) {
      throw Error::data(path + ": unexpected header field '" +
                        table.header[k] + "', expected '" + kPathHeader[k] +
                        "'");
    }
  }
  if (table.rows.empty()) throw Error::data(path + ": empty path");

  std::vector<PathStep> steps;
  steps.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const int lineno = table.line_numbers[r];
    if (row.size() != 12) {
      std::ostringstream msg;
      msg << path << ':' << lineno << ": expected 12 fields, got "
          << row.size();
      throw Error::data(msg.str());
    }
    PathStep step;
    for (int k = 0; k < 6; ++k) {
      if (row[k] == "strain") {
        step.strain_controlled[k] = true;
      } else if (row[k] == "stress") {
        step.strain_controlled[k] = false;
      } else {
        std::ostringstream msg;
        msg << path << ':' << lineno << ": control flag " << (k + 1)
            << " must be 'strain' or 'stress', got '" << row[k] << "'";
        throw Error::data(msg.str());
      }
      std::ostringstream ctx;
      ctx << path << ':' << lineno << ": field " << (k + 7);
      step.targets[k] = csv::parse_number(row[k + 6], ctx.str());
    }
    steps.push_back(step);
  }
  return steps;
}

void save_path_history(const std::vector<PathPoint>& history,
                       const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error::io("cannot open '" + path + "' for writing");
  os << std::setprecision(17);
  os << "step";
  for (const char* c : kComponentName) os << ",eps_" << c;
  for (const char* c : kComponentName) os << ",sigma_" << c;
  os << ",ep_bar_weighted\n";
  for (const PathPoint& pt : history) {
    os << pt.step;
    for (int k = 0; k < 6; ++k)
      os << ',' << pt.eps[k] / mandel_shear_scale(k);
    for (int k = 0; k < 6; ++k)
      os << ',' << pt.sigma[k] / mandel_shear_scale(k);
    os << ',' << pt.ep_bar_weighted << '\n';
  }
  if (!os) throw Error::io("write failure on '" + path + "'");
}

}  // namespace dmn
