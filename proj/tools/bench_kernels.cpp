// SPDX-License-Identifier: MIT
//
// Micro-benchmark for the OpenMP kernels against their serial reference
// paths: dataset loss, batch gradient, and the explicit-dynamics element
// loop.  Prints best-of-N wall times and the speedup; it asserts nothing,
// so it is a tool target rather than a test.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include <dmn/database.hpp>
#include <dmn/datagen.hpp>
#include <dmn/macrosim.hpp>
#include <dmn/network.hpp>
#include <dmn/training.hpp>

using namespace dmn;

namespace {

template <typename Fn>
double best_seconds(int repeat, Fn&& fn) {
  double best = 1e300;
  for (int r = 0; r < repeat; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const double s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    best = std::min(best, s);
  }
  return best;
}

void report(const char* name, double serial, double parallel) {
  std::printf("%-22s %10.4f s %10.4f s %8.2fx\n", name, serial, parallel,
              serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bench_kernels: serial reference vs OpenMP kernels"};
  int threads = std::max(1u, std::thread::hardware_concurrency());
  int repeat = 3;
  int samples = 256;
  int side = 6;
  int layers = 5;
  app.add_option("--threads", threads, "parallel thread count");
  app.add_option("--repeat", repeat, "timing repetitions, best is kept");
  app.add_option("--samples", samples, "training samples for the loss bench");
  app.add_option("--side", side, "macro mesh elements per edge");
  app.add_option("--layers", layers, "network depth");
  CLI11_PARSE(app, argc, argv);

  std::printf("threads: %d, repeat: %d\n", threads, repeat);
  std::printf("%-22s %12s %12s %9s\n", "kernel", "serial", "parallel",
              "speedup");

  // Training kernels.
  const NetworkParams net = make_teacher(layers, 7, 0.30);
  PhaseSampler sampler(11);
  const Dataset data = teacher_dataset(net, sampler, samples, 8);
  std::vector<int> all(data.train.size());
  std::iota(all.begin(), all.end(), 0);

  report("dataset_error",
         best_seconds(repeat, [&] { dataset_error(net, data.train, 1); }),
         best_seconds(repeat, [&] { dataset_error(net, data.train, threads); }));
  report("batch_gradient",
         best_seconds(repeat,
                      [&] { batch_gradient(net, data.train, all, 1); }),
         best_seconds(repeat, [&] {
           batch_gradient(net, data.train, all, threads);
         }));

  // Explicit-dynamics element loop.  Interior descriptor so every element
  // pays for a real database interpolation on setup.
  const double corners[4][3] = {{0.10, 1.0 / 3.0, 1.0 / 3.0},
                                {0.10, 0.5, 0.5},
                                {0.10, 1.0, 0.0},
                                {0.30, 1.0, 0.0}};
  std::vector<Anchor> anchors(4);
  for (int i = 0; i < 4; ++i) {
    anchors[i].x = Descriptor{corners[i][0], corners[i][1], corners[i][2]};
    anchors[i].y = init_random(layers, 30 + static_cast<std::uint64_t>(i));
  }
  const AnchorSet db = fit_anchors(anchors);

  const MacroMesh mesh = box_mesh(side, side, side, side * 1e-3, side * 1e-3,
                                  side * 1e-3, 1600.0);
  DescriptorField field;
  field.elements.resize(mesh.elements.size());
  for (auto& ed : field.elements) ed.x = Descriptor{0.18, 0.8, 0.15};

  SimConfig cfg;
  cfg.bcs.push_back({"zmin", {0.0, 0.0, 0.0}});
  cfg.bcs.push_back({"zmax", {std::nullopt, std::nullopt, -0.1}});
  cfg.output_every = 0;

  // One probing step fixes dt, then both variants run the same step count.
  cfg.end_time = 1e-30;
  cfg.serial_reference = true;
  const double dt = run_explicit(mesh, field, db, cfg).dt;
  cfg.end_time = 6.0 * dt * 0.999;

  const double serial = best_seconds(repeat, [&] {
    cfg.serial_reference = true;
    cfg.threads = 1;
    run_explicit(mesh, field, db, cfg);
  });
  const double parallel = best_seconds(repeat, [&] {
    cfg.serial_reference = false;
    cfg.threads = threads;
    run_explicit(mesh, field, db, cfg);
  });
  report("explicit_step", serial, parallel);
  return 0;
}
