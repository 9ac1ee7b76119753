// This file is part of the dmn toolkit, a deep material network library
// for concurrent multiscale simulation of fiber reinforced composites.
//
// SPDX-License-Identifier: MIT

#include <dmn/training.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <dmn/error.hpp>
#include <dmn/parallel.hpp>

namespace dmn {

namespace {

double target_denominator(const Stiffness6& target) {
  double denom = 0.0;
  for (int i = 0; i < 6; ++i)
    for (int j = i; j < 6; ++j) denom += std::abs(target(i, j));
  if (!(denom > 0.0)) throw Error::data("loss target has zero norm");
  return denom;
}

/// dL/dC for the scaled-MAE loss; nonzero on the upper triangle only, which
/// is exactly the convention NetworkTape::backward expects for its upstream.
Matrix6 loss_upstream(const Stiffness6& pred, const Stiffness6& target) {
  const double denom = target_denominator(target);
  Matrix6 g = Matrix6::Zero();
  for (int i = 0; i < 6; ++i) {
    for (int j = i; j < 6; ++j) {
      const double d = pred(i, j) - target(i, j);
      if (d > 0.0) g(i, j) = 1.0 / denom;
      if (d < 0.0) g(i, j) = -1.0 / denom;
    }
  }
  return g;
}

}  // namespace

double loss(const Stiffness6& pred, const Stiffness6& target) {
  const double denom = target_denominator(target);
  double num = 0.0;
  for (int i = 0; i < 6; ++i)
    for (int j = i; j < 6; ++j) num += std::abs(pred(i, j) - target(i, j));
  return num / denom;
}

void TrainConfig::validate(std::size_t train_size) const {
  std::ostringstream msg;
  if (epochs < 0) {
    msg << "epochs must be >= 0, got " << epochs;
  } else if (mini_batch_count < 1 ||
             static_cast<std::size_t>(mini_batch_count) > train_size) {
    msg << "mini_batch_count must be in [1, train size " << train_size
        << "], got " << mini_batch_count;
  } else if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    msg << "learning_rate must be positive and finite, got " << learning_rate;
  } else if (threads < 1) {
    msg << "threads must be >= 1, got " << threads;
  } else {
    return;
  }
  throw Error::config("train config: " + msg.str());
}

NetworkParams init_random(int layers, const std::vector<Phase>& leaf_phase,
                          std::uint64_t seed) {
  NetworkParams p;
  p.layers = layers;
  if (layers < 1 || layers > 24) {
    throw Error::config("init_random: layers must be in [1, 24]");
  }
  if (leaf_phase.size() != static_cast<std::size_t>(p.leaf_count())) {
    throw Error::config("init_random: leaf_phase size does not match layers");
  }
  p.leaf_phase = leaf_phase;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> zdist(0.2, 0.8);
  std::uniform_real_distribution<double> adist(-M_PI / 4.0, M_PI / 4.0);
  p.z.resize(p.leaf_count());
  for (double& z : p.z) z = zdist(rng);
  p.angles.resize(p.block_count());
  for (auto& a : p.angles) {
    a[0] = adist(rng);
    a[1] = adist(rng);
    a[2] = adist(rng);
  }
  p.validate();
  return p;
}

NetworkParams init_random(int layers, std::uint64_t seed) {
  return init_random(layers, alternating_phases(layers), seed);
}

NetworkParams transfer_init(const NetworkParams& pretrained, int target_layers) {
  pretrained.validate();
  if (pretrained.layers != target_layers) {
    std::ostringstream msg;
    msg << "transfer_init: pretrained model has " << pretrained.layers
        << " layers but the target network has " << target_layers
        << "; parameters do not carry across topologies";
    throw Error::config(msg.str());
  }
  return pretrained;
}

double dataset_error(const NetworkParams& p, const std::vector<Sample>& samples,
                     int threads) {
  if (samples.empty()) return 0.0;
  p.validate();
  const int n = static_cast<int>(samples.size());
  std::vector<double> per(n);
  parallel_for(n, threads, [&](int k) {
    const Sample& s = samples[k];
    per[k] = loss(forward(p, s.c_fiber, s.c_matrix), s.c_target);
  });
  double sum = 0.0;
  for (double v : per) sum += v;
  return sum / n;
}

BatchGradient batch_gradient(const NetworkParams& p,
                             const std::vector<Sample>& samples,
                             const std::vector<int>& indices, int threads) {
  p.validate();
  if (indices.empty()) throw Error::config("batch_gradient: empty batch");
  for (int idx : indices) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= samples.size()) {
      throw Error::config("batch_gradient: sample index out of range");
    }
  }

  const int n = static_cast<int>(indices.size());
  std::vector<double> per_loss(n);
  std::vector<NetworkGradients> per_grad(n);
  parallel_for(n, threads, [&](int k) {
    const Sample& s = samples[indices[k]];
    const NetworkTape tape(p, s.c_fiber, s.c_matrix);
    const double denom = target_denominator(s.c_target);
    double num = 0.0;
    for (int i = 0; i < 6; ++i)
      for (int j = i; j < 6; ++j)
        num += std::abs(tape.output()(i, j) - s.c_target(i, j));
    per_loss[k] = num / denom;
    per_grad[k] = tape.backward(loss_upstream(tape.output(), s.c_target));
  });

  BatchGradient out;
  out.grad.dz.assign(p.leaf_count(), 0.0);
  out.grad.dangles.assign(p.block_count(), {0.0, 0.0, 0.0});
  for (int k = 0; k < n; ++k) {
    bool finite = std::isfinite(per_loss[k]);
    for (double g : per_grad[k].dz) finite = finite && std::isfinite(g);
    for (const auto& a : per_grad[k].dangles)
      finite = finite && std::isfinite(a[0]) && std::isfinite(a[1]) &&
               std::isfinite(a[2]);
    if (!finite) {
      std::ostringstream msg;
      msg << "non-finite loss or gradient at sample " << indices[k];
      throw Error::solver(msg.str());
    }
    out.loss += per_loss[k];
    for (std::size_t i = 0; i < per_grad[k].dz.size(); ++i)
      out.grad.dz[i] += per_grad[k].dz[i];
    for (std::size_t b = 0; b < per_grad[k].dangles.size(); ++b)
      for (int c = 0; c < 3; ++c)
        out.grad.dangles[b][c] += per_grad[k].dangles[b][c];
  }
  out.loss /= n;
  for (double& g : out.grad.dz) g /= n;
  for (auto& a : out.grad.dangles)
    for (int c = 0; c < 3; ++c) a[c] /= n;
  return out;
}

namespace {

/// Flattened view over (z, angles) so the optimizers can treat parameters as
/// one vector. Order: all z, then angle triplets block by block.
struct FlatParams {
  explicit FlatParams(NetworkParams& p) : p_(p) {}
  int size() const { return p_.leaf_count() + 3 * p_.block_count(); }
  double get(int i) const {
    const int nz = p_.leaf_count();
    return i < nz ? p_.z[i] : p_.angles[(i - nz) / 3][(i - nz) % 3];
  }
  void add(int i, double delta) {
    const int nz = p_.leaf_count();
    if (i < nz) {
      p_.z[i] += delta;
    } else {
      p_.angles[(i - nz) / 3][(i - nz) % 3] += delta;
    }
  }
  double grad(const NetworkGradients& g, int i) const {
    const int nz = p_.leaf_count();
    return i < nz ? g.dz[i] : g.dangles[(i - nz) / 3][(i - nz) % 3];
  }

 private:
  NetworkParams& p_;
};

}  // namespace

std::pair<NetworkParams, TrainHistory> train(const NetworkParams& p0,
                                             const Dataset& data,
                                             const TrainConfig& cfg) {
  p0.validate();
  data.validate();
  cfg.validate(data.train.size());

  NetworkParams p = p0;
  FlatParams x(p);
  const int dim = x.size();
  std::vector<double> adam_m(dim, 0.0), adam_v(dim, 0.0), momentum(dim, 0.0);
  int step_count = 0;
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

  auto apply_step = [&](const NetworkGradients& g) {
    ++step_count;
    for (int i = 0; i < dim; ++i) {
      const double gi = x.grad(g, i);
      if (cfg.optimizer == TrainConfig::Optimizer::adam) {
        adam_m[i] = kBeta1 * adam_m[i] + (1.0 - kBeta1) * gi;
        adam_v[i] = kBeta2 * adam_v[i] + (1.0 - kBeta2) * gi * gi;
        const double mhat = adam_m[i] / (1.0 - std::pow(kBeta1, step_count));
        const double vhat = adam_v[i] / (1.0 - std::pow(kBeta2, step_count));
        x.add(i, -cfg.learning_rate * mhat / (std::sqrt(vhat) + kEps));
      } else {
        momentum[i] = 0.9 * momentum[i] - cfg.learning_rate * gi;
        x.add(i, momentum[i]);
      }
    }
  };

  TrainHistory hist;
  const auto t_start = std::chrono::steady_clock::now();
  const int n = static_cast<int>(data.train.size());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(cfg.seed);

  // The start point participates in best-so-far selection, so a run that
  // never improves still returns a meaningful model.
  NetworkParams best = p0;
  double best_test = data.test.empty() ? dataset_error(p0, data.train, cfg.threads)
                                       : dataset_error(p0, data.test, cfg.threads);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), rng);
    double loss_sum = 0.0;
    for (int b = 0; b < cfg.mini_batch_count; ++b) {
      const int lo = static_cast<int>(static_cast<long>(b) * n /
                                      cfg.mini_batch_count);
      const int hi = static_cast<int>(static_cast<long>(b + 1) * n /
                                      cfg.mini_batch_count);
      const std::vector<int> indices(perm.begin() + lo, perm.begin() + hi);
      BatchGradient g;
      try {
        g = batch_gradient(p, data.train, indices, cfg.threads);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::solver) throw;
        std::ostringstream msg;
        msg << e.what() << " (epoch " << epoch << ", learning rate "
            << cfg.learning_rate << ")";
        throw Error::solver(msg.str());
      }
      loss_sum += g.loss * static_cast<double>(indices.size());
      apply_step(g.grad);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_error = loss_sum / n;
    rec.test_error = data.test.empty()
                         ? rec.train_error
                         : dataset_error(p, data.test, cfg.threads);
    rec.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t_start)
                      .count();
    hist.epochs.push_back(rec);

    if (rec.test_error < best_test) {
      best_test = rec.test_error;
      best = p;
    }
    if (cfg.stop_at_train_error > 0.0 &&
        rec.train_error <= cfg.stop_at_train_error) {
      break;
    }
    if (cfg.early_stop_plateau && hist.epochs.size() > 200) {
      const double before =
          hist.epochs[hist.epochs.size() - 201].train_error;
      if (before - rec.train_error < 1e-5 * std::max(before, 1e-300)) break;
    }
  }

  hist.best_test_error = best_test;
  hist.final_stats = stats(best);
  return {std::move(best), std::move(hist)};
}

void save_history(const TrainHistory& h, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error::io("cannot open '" + path + "' for writing");
  os << std::setprecision(10);
  os << "epoch,train_error,test_error,seconds\n";
  for (const EpochRecord& r : h.epochs) {
    os << r.epoch << ',' << r.train_error << ',' << r.test_error << ','
       << r.seconds << '\n';
  }
  if (!os) throw Error::io("write failure on '" + path + "'");
}

}  // namespace dmn
