// This file is part of the dmn toolkit, a deep material network library
// for concurrent multiscale simulation of fiber reinforced composites.
//
// SPDX-License-Identifier: MIT

#include "dmn/network.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "dmn/error.hpp"

namespace dmn {

namespace {

using nlohmann::json;

double relu(double z) { return z > 0.0 ? z : 0.0; }

// Subtree weights for all heap nodes; leaves carry relu(z).
std::vector<double> node_weights(const NetworkParams& p) {
  const int L = p.leaf_count();
  std::vector<double> w(p.node_count(), 0.0);
  for (int j = 0; j < L; ++j) w[L - 1 + j] = relu(p.z[j]);
  for (int n = L - 2; n >= 0; --n) w[n] = w[2 * n + 1] + w[2 * n + 2];
  return w;
}

Rotation block_rotation(const NetworkParams& p, int n) {
  const auto& a = p.angles[n];
  return Rotation(a[0], a[1], a[2]);
}

// Evaluates the subtree below node n. `cache`, when given, receives the
// stiffness of every active node.
Matrix6 eval_node(const NetworkParams& p, const std::vector<double>& w, int n,
                  const Stiffness6& Cf, const Stiffness6& Cm,
                  std::vector<Matrix6>* cache) {
  const int L = p.leaf_count();
  Matrix6 C;
  if (n >= L - 1) {
    const int leaf = n - (L - 1);
    C = p.leaf_phase[leaf] == Phase::fiber ? Cf : Cm;
  } else {
    const int l = 2 * n + 1, r = 2 * n + 2;
    const Rotation rot = block_rotation(p, n);
    if (w[l] > 0.0 && w[r] > 0.0) {
      const Matrix6 Cl = eval_node(p, w, l, Cf, Cm, cache);
      const Matrix6 Cr = eval_node(p, w, r, Cf, Cm, cache);
      C = block_forward({Cl, Cr, w[l] / (w[l] + w[r]), rot});
    } else {
      const int live = w[l] > 0.0 ? l : r;
      C = rotate_stiffness(eval_node(p, w, live, Cf, Cm, cache), rot);
    }
  }
  if (cache) (*cache)[n] = C;
  return C;
}

}  // namespace

void NetworkParams::validate() const {
  if (layers < 1) throw Error::data("network needs at least one layer");
  const int L = leaf_count();
  if (static_cast<int>(z.size()) != L)
    throw Error::data("z array size does not match layer count");
  if (static_cast<int>(leaf_phase.size()) != L)
    throw Error::data("leaf_phase array size does not match layer count");
  if (static_cast<int>(angles.size()) != block_count())
    throw Error::data("angles array size does not match layer count");
  for (double v : z)
    if (!std::isfinite(v)) throw Error::data("non-finite z value");
  for (const auto& a : angles)
    for (double v : a)
      if (!std::isfinite(v)) throw Error::data("non-finite angle value");
}

std::vector<Phase> alternating_phases(int layers) {
  const int L = 1 << (layers - 1);
  std::vector<Phase> ph(L);
  for (int j = 0; j < L; ++j) ph[j] = (j % 2 == 0) ? Phase::fiber : Phase::matrix;
  return ph;
}

Stiffness6 forward(const NetworkParams& p, const Stiffness6& Cf,
                   const Stiffness6& Cm) {
  p.validate();
  const auto w = node_weights(p);
  if (!(w[0] > 0.0)) throw Error::data("degenerate network: zero root weight");
  return eval_node(p, w, 0, Cf, Cm, nullptr);
}

NetworkTape::NetworkTape(const NetworkParams& p, const Stiffness6& Cf,
                         const Stiffness6& Cm)
    : params_(p), w_(node_weights(p)), C_(p.node_count(), Matrix6::Zero()) {
  p.validate();
  if (!(w_[0] > 0.0)) throw Error::data("degenerate network: zero root weight");
  output_ = eval_node(p, w_, 0, Cf, Cm, &C_);
}

NetworkGradients NetworkTape::backward(const Matrix6& upstream) const {
  const NetworkParams& p = params_;
  const int L = p.leaf_count();

  NetworkGradients g;
  g.dz.assign(L, 0.0);
  g.dangles.assign(p.block_count(), {0.0, 0.0, 0.0});

  // Parents precede children in heap order, so a single ascending sweep
  // propagates the stiffness adjoints G and the weight adjoints wadj.
  std::vector<Matrix6> G(p.node_count(), Matrix6::Zero());
  std::vector<double> wadj(p.node_count(), 0.0);
  G[0] = upstream;

  for (int n = 0; n < L - 1; ++n) {
    if (!(w_[n] > 0.0)) continue;
    const int l = 2 * n + 1, r = 2 * n + 2;
    const Rotation rot = block_rotation(p, n);
    if (w_[l] > 0.0 && w_[r] > 0.0) {
      const double w = w_[l] + w_[r];
      const double f1 = w_[l] / w;
      const BlockGrad bg = block_backward({C_[l], C_[r], f1, rot}, G[n]);
      g.dangles[n] = bg.dangles;
      G[l] = bg.dC1;
      G[r] = bg.dC2;
      wadj[l] = wadj[n] + bg.df1 * (w_[r] / (w * w));
      wadj[r] = wadj[n] - bg.df1 * (w_[l] / (w * w));
    } else {
      // Single live child: output = Q C_live Q^T. The dead subtree cannot
      // influence the loss (its leaves all sit on the flat side of relu),
      // so it is skipped entirely.
      const int live = w_[l] > 0.0 ? l : r;
      const Matrix6& Q = rot.matrix6();
      const auto dR = zxz_angle_derivatives(rot);
      const Matrix6 CQt = C_[live] * Q.transpose();
      const Matrix6 QC = Q * C_[live];
      for (int k = 0; k < 3; ++k) {
        const Matrix6 dQ = mandel_rotation_derivative(rot.matrix3(), dR[k]);
        g.dangles[n][k] =
            (G[n].array() * (dQ * CQt + QC * dQ.transpose()).array()).sum();
      }
      G[live] = Q.transpose() * G[n] * Q;
      wadj[live] = wadj[n];
    }
  }

  for (int j = 0; j < L; ++j) {
    g.dz[j] = p.z[j] > 0.0 ? wadj[L - 1 + j] : 0.0;
  }
  return g;
}

std::pair<Stiffness6, NetworkGradients> forward_with_grads(
    const NetworkParams& p, const Stiffness6& Cf, const Stiffness6& Cm,
    const Matrix6& upstream) {
  NetworkTape tape(p, Cf, Cm);
  return {tape.output(), tape.backward(upstream)};
}

double extract_volume_fraction(const NetworkParams& p) {
  p.validate();
  double fiber = 0.0, total = 0.0;
  for (int j = 0; j < p.leaf_count(); ++j) {
    const double w = std::max(p.z[j], 0.0);
    total += w;
    if (p.leaf_phase[j] == Phase::fiber) fiber += w;
  }
  if (!(total > 0.0)) throw Error::data("degenerate network: zero root weight");
  return fiber / total;
}

NetworkStats stats(const NetworkParams& p) {
  p.validate();
  NetworkStats s;
  s.total_dofs = p.leaf_count();
  s.node_weights = node_weights(p);
  for (int j = 0; j < p.leaf_count(); ++j) {
    if (p.z[j] > 0.0) {
      ++s.active_dofs;
      if (p.leaf_phase[j] == Phase::fiber)
        ++s.active_fiber;
      else
        ++s.active_matrix;
    }
  }
  s.volume_fraction = extract_volume_fraction(p);
  return s;
}

NetworkParams compress(const NetworkParams& p) {
  p.validate();
  const auto w = node_weights(p);
  if (!(w[0] > 0.0)) throw Error::data("degenerate network: zero root weight");
  NetworkParams q = p;
  for (int j = 0; j < p.leaf_count(); ++j) {
    if (!(q.z[j] > 0.0)) q.z[j] = 0.0;
  }
  for (int n = 0; n < p.block_count(); ++n) {
    if (!(w[n] > 0.0)) q.angles[n] = {0.0, 0.0, 0.0};
  }
  return q;
}

std::string serialize(const NetworkParams& p) {
  p.validate();
  json j;
  j["version"] = 1;
  j["layers"] = p.layers;
  json ph = json::array();
  for (Phase f : p.leaf_phase) ph.push_back(static_cast<int>(f));
  j["leaf_phase"] = std::move(ph);
  j["z"] = p.z;
  json an = json::array();
  for (const auto& a : p.angles) an.push_back(json::array({a[0], a[1], a[2]}));
  j["angles"] = std::move(an);
  json md;
  if (p.metadata.descriptor) {
    const auto& d = *p.metadata.descriptor;
    md["descriptor"] = json::array({d[0], d[1], d[2]});
  } else {
    md["descriptor"] = nullptr;
  }
  md["training_history_ref"] = p.metadata.training_history_ref;
  md["note"] = p.metadata.note;
  j["metadata"] = std::move(md);
  return j.dump(2) + "\n";
}

NetworkParams deserialize(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error::data(std::string("model file is not valid JSON: ") + e.what());
  }
  for (const char* field : {"version", "layers", "leaf_phase", "z", "angles"}) {
    if (!j.contains(field)) {
      throw Error::data(std::string("model file missing field '") + field + "'");
    }
  }
  try {
    const int version = j["version"].get<int>();
    if (version != 1) {
      throw Error::data("unsupported model version " + std::to_string(version) +
                        " (expected 1)");
    }
    NetworkParams p;
    p.layers = j["layers"].get<int>();
    for (const auto& v : j["leaf_phase"]) {
      const int f = v.get<int>();
      if (f != 0 && f != 1) throw Error::data("leaf_phase entries must be 0 or 1");
      p.leaf_phase.push_back(static_cast<Phase>(f));
    }
    p.z = j["z"].get<std::vector<double>>();
    for (const auto& a : j["angles"]) {
      if (!a.is_array() || a.size() != 3) {
        throw Error::data("angles entries must be [alpha, beta, gamma] triplets");
      }
      p.angles.push_back({a[0].get<double>(), a[1].get<double>(), a[2].get<double>()});
    }
    if (j.contains("metadata")) {
      const auto& md = j["metadata"];
      if (md.contains("descriptor") && !md["descriptor"].is_null()) {
        const auto& d = md["descriptor"];
        if (!d.is_array() || d.size() != 3) {
          throw Error::data("metadata.descriptor must be [vf, a11, a22]");
        }
        p.metadata.descriptor = {{d[0].get<double>(), d[1].get<double>(),
                                  d[2].get<double>()}};
      }
      if (md.contains("training_history_ref")) {
        p.metadata.training_history_ref = md["training_history_ref"].get<std::string>();
      }
      if (md.contains("note")) p.metadata.note = md["note"].get<std::string>();
    }
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw Error::data(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const NetworkParams& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error::io("cannot open '" + path + "' for writing");
  out << serialize(p);
  if (!out) throw Error::io("write failed for '" + path + "'");
}

NetworkParams load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error::io("cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace dmn
