// This file is part of the dmn toolkit, a deep material network library
// for concurrent multiscale simulation of fiber reinforced composites.
//
// SPDX-License-Identifier: MIT
//
// Operator surface: one static binary with subcommands wiring the pipeline
// end to end. Parameters come from a JSON config file; flags override
// individual fields. Logs go to stderr, data to files, and every run drops
// a manifest (config hash, versions, seed) next to its outputs so results
// stay attributable. Primary outputs are byte-reproducible for a fixed
// config and seed; wall-clock timestamps live only in the manifest.

#include <array>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <dmn/database.hpp>
#include <dmn/datagen.hpp>
#include <dmn/dataset.hpp>
#include <dmn/error.hpp>
#include <dmn/macrosim.hpp>
#include <dmn/network.hpp>
#include <dmn/online.hpp>
#include <dmn/training.hpp>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dmn;

constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Config plumbing

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream is(path);
  if (!is) throw Error::io("cannot read config file '" + path + "'");
  json cfg;
  try {
    cfg = json::parse(is);
  } catch (const json::exception& e) {
    throw Error::config("config file '" + path + "': " + e.what());
  }
  if (!cfg.is_object()) {
    throw Error::config("config file '" + path + "' must hold a JSON object");
  }
  return cfg;
}

[[noreturn]] void bad_field(const std::string& path, const char* expected) {
  throw Error::config("config field '" + path + "' must be " + expected);
}

double get_num(const json& j, const std::string& key, double dflt,
               const std::string& ctx) {
  if (!j.contains(key) || j[key].is_null()) return dflt;
  if (!j[key].is_number()) bad_field(ctx + key, "a number");
  return j[key].get<double>();
}

int get_int(const json& j, const std::string& key, int dflt,
            const std::string& ctx) {
  if (!j.contains(key) || j[key].is_null()) return dflt;
  if (!j[key].is_number_integer()) bad_field(ctx + key, "an integer");
  return j[key].get<int>();
}

bool get_bool(const json& j, const std::string& key, bool dflt,
              const std::string& ctx) {
  if (!j.contains(key) || j[key].is_null()) return dflt;
  if (!j[key].is_boolean()) bad_field(ctx + key, "a boolean");
  return j[key].get<bool>();
}

std::string get_str(const json& j, const std::string& key,
                    const std::string& dflt, const std::string& ctx) {
  if (!j.contains(key) || j[key].is_null()) return dflt;
  if (!j[key].is_string()) bad_field(ctx + key, "a string");
  return j[key].get<std::string>();
}

std::string require_str(const json& j, const std::string& key,
                        const std::string& ctx) {
  const std::string s = get_str(j, key, "", ctx);
  if (s.empty()) {
    throw Error::config("config field '" + ctx + key + "' is required");
  }
  return s;
}

// ---------------------------------------------------------------------------
// Run context: merged config, output directory, common flags

struct Ctx {
  json cfg;
  fs::path out;
  std::uint64_t seed = 0;
  int threads = 1;
  std::vector<std::string> outputs;  ///< files written, for the manifest

  fs::path path(const std::string& name) {
    outputs.push_back(name);
    return out / name;
  }
};

void prepare_out(const fs::path& dir) {
  if (!fs::exists(dir)) {
    fs::create_directories(dir);
    std::cerr << "dmn: created output directory '" << dir.string() << "'\n";
  }
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

// The manifest is the only output allowed to differ between identical runs.
void write_manifest(Ctx& ctx, const std::string& command) {
  json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["seed"] = ctx.seed;
  m["threads"] = ctx.threads;
  m["config"] = ctx.cfg;
  {
    std::ostringstream h;
    h << std::hex << fnv1a64(ctx.cfg.dump());
    m["config_hash"] = "fnv1a64:" + h.str();
  }
  m["outputs"] = ctx.outputs;
  m["created_utc"] = utc_now();
  std::ofstream os(ctx.out / "manifest.json");
  if (!os) throw Error::io("cannot write manifest in '" + ctx.out.string() + "'");
  os << m.dump(2) << '\n';
}

OnlineConstants constants_from(const json& cfg, const std::string& ctx) {
  const std::string path = get_str(cfg, "constants", "", ctx);
  return path.empty() ? OnlineConstants::defaults()
                      : OnlineConstants::from_json_file(path);
}

Rotation orientation_from(const json& cfg, const std::string& ctx) {
  if (!cfg.contains("orientation") || cfg["orientation"].is_null()) {
    return Rotation();
  }
  const json& q = cfg["orientation"];
  if (!q.is_array() || q.size() != 4) {
    bad_field(ctx + "orientation", "a [qw, qx, qy, qz] array");
  }
  for (const auto& v : q) {
    if (!v.is_number()) bad_field(ctx + "orientation", "numeric");
  }
  return Rotation::from_quaternion(q[0].get<double>(), q[1].get<double>(),
                                   q[2].get<double>(), q[3].get<double>());
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_gen_data(Ctx& ctx) {
  const int layers = get_int(ctx.cfg, "layers", 4, "");
  const double vf = get_num(ctx.cfg, "vf", 0.30, "");
  const int n_train = get_int(ctx.cfg, "train_samples", 400, "");
  const int n_test = get_int(ctx.cfg, "test_samples", 100, "");

  const NetworkParams teacher = make_teacher(layers, ctx.seed, vf);
  PhaseSampler sampler(ctx.seed + 1);
  const Dataset data = teacher_dataset(teacher, sampler, n_train, n_test);

  save_model(teacher, ctx.path("teacher.json").string());
  save_samples(data.train, ctx.path("train.csv").string());
  save_samples(data.test, ctx.path("test.csv").string());
  std::cerr << "dmn: wrote " << data.train.size() << " train and "
            << data.test.size() << " test samples (teacher vf "
            << extract_volume_fraction(teacher) << ")\n";
}

NetworkParams starting_point(Ctx& ctx, const std::string& command) {
  const int layers = get_int(ctx.cfg, "layers", 4, "");
  if (command == "transfer") {
    const std::string source = require_str(ctx.cfg, "source", "");
    const NetworkParams pre = load_model(source);
    return transfer_init(pre, get_int(ctx.cfg, "layers", pre.layers, ""));
  }
  const std::string init = get_str(ctx.cfg, "init_model", "", "");
  if (!init.empty()) return load_model(init);
  return init_random(layers, ctx.seed);
}

void cmd_train(Ctx& ctx, const std::string& command) {
  Dataset data;
  data.train = load_samples(require_str(ctx.cfg, "train_data", ""));
  const std::string test_path = get_str(ctx.cfg, "test_data", "", "");
  if (!test_path.empty()) data.test = load_samples(test_path);

  TrainConfig tc;
  tc.epochs = get_int(ctx.cfg, "epochs", tc.epochs, "");
  tc.mini_batch_count = get_int(ctx.cfg, "batches", tc.mini_batch_count, "");
  tc.learning_rate = get_num(ctx.cfg, "learning_rate", tc.learning_rate, "");
  tc.stop_at_train_error =
      get_num(ctx.cfg, "stop_at_train_error", tc.stop_at_train_error, "");
  tc.early_stop_plateau =
      get_bool(ctx.cfg, "early_stop_plateau", tc.early_stop_plateau, "");
  const std::string opt = get_str(ctx.cfg, "optimizer", "adam", "");
  if (opt == "adam") {
    tc.optimizer = TrainConfig::Optimizer::adam;
  } else if (opt == "sgd") {
    tc.optimizer = TrainConfig::Optimizer::sgd;
  } else {
    bad_field("optimizer", "\"adam\" or \"sgd\"");
  }
  tc.seed = ctx.seed;
  tc.threads = ctx.threads;

  NetworkParams p0 = starting_point(ctx, command);
  auto [best, history] = train(p0, data, tc);
  best.metadata.training_history_ref = "history.csv";

  save_model(best, ctx.path("model.json").string());
  save_history(history, ctx.path("history.csv").string());

  const double final_train =
      history.epochs.empty() ? dataset_error(best, data.train, ctx.threads)
                             : history.epochs.back().train_error;
  std::cerr << "dmn: " << command << " finished after "
            << history.epochs.size() << " epochs, final train error "
            << 100.0 * final_train << "%\n";
}

void cmd_build_db(Ctx& ctx) {
  if (!ctx.cfg.contains("anchors") || !ctx.cfg["anchors"].is_array()) {
    bad_field("anchors", "an array of {vf, a11, a22, model} objects");
  }
  std::vector<Anchor> anchors;
  int i = 0;
  for (const json& a : ctx.cfg["anchors"]) {
    const std::string ctx_path = "anchors[" + std::to_string(i++) + "].";
    Anchor anchor;
    anchor.x.vf = get_num(a, "vf", -1.0, ctx_path);
    anchor.x.a11 = get_num(a, "a11", -1.0, ctx_path);
    anchor.x.a22 = get_num(a, "a22", -1.0, ctx_path);
    anchor.y = load_model(require_str(a, "model", ctx_path));
    anchors.push_back(std::move(anchor));
  }
  const AnchorSet db = fit_anchors(anchors);
  save_database(db, ctx.path("database.json").string());
  std::cerr << "dmn: database over " << anchors.size() << " anchors written\n";
}

void cmd_query(Ctx& ctx) {
  const AnchorSet db = load_database(require_str(ctx.cfg, "database", ""));
  Descriptor x;
  x.vf = get_num(ctx.cfg, "vf", -1.0, "");
  x.a11 = get_num(ctx.cfg, "a11", -1.0, "");
  x.a22 = get_num(ctx.cfg, "a22", -1.0, "");
  const bool extrapolate = get_bool(ctx.cfg, "allow_extrapolation", false, "");

  const NetworkParams net = query(db, x, extrapolate);
  save_model(net, ctx.path("model.json").string());
  const NetworkStats s = stats(net);
  std::cerr << "dmn: query (" << x.vf << ", " << x.a11 << ", " << x.a22
            << ") -> " << s.active_dofs << " active dofs, inferred vf "
            << s.volume_fraction << "\n";
}

void cmd_predict(Ctx& ctx) {
  const NetworkParams net = load_model(require_str(ctx.cfg, "model", ""));
  const std::vector<PathStep> path =
      load_path(require_str(ctx.cfg, "path", ""));
  const OnlineConstants constants = constants_from(ctx.cfg, "");
  const Rotation orientation = orientation_from(ctx.cfg, "");
  const double tol = get_num(ctx.cfg, "tol", -1.0, "");

  DmnMaterialPoint mp(net, constants, orientation);
  const std::vector<PathPoint> response = mixed_control_path(mp, path, tol);
  save_path_history(response, ctx.path("response.csv").string());
  std::cerr << "dmn: predicted " << response.size()
            << " path steps, final weighted plastic strain "
            << response.back().ep_bar_weighted << "\n";
}

void cmd_simulate(Ctx& ctx) {
  if (!ctx.cfg.contains("mesh") || !ctx.cfg["mesh"].is_object()) {
    bad_field("mesh", "an object {nx, ny, nz, lx, ly, lz, density}");
  }
  const json& m = ctx.cfg["mesh"];
  const MacroMesh mesh = box_mesh(
      get_int(m, "nx", 1, "mesh."), get_int(m, "ny", 1, "mesh."),
      get_int(m, "nz", 1, "mesh."), get_num(m, "lx", 0.0, "mesh."),
      get_num(m, "ly", 0.0, "mesh."), get_num(m, "lz", 0.0, "mesh."),
      get_num(m, "density", 0.0, "mesh."));

  const DescriptorField field =
      load_descriptor_field(require_str(ctx.cfg, "field", ""));
  const AnchorSet db = load_database(require_str(ctx.cfg, "database", ""));

  SimConfig sim;
  sim.end_time = get_num(ctx.cfg, "end_time", 0.0, "");
  sim.safety = get_num(ctx.cfg, "safety", sim.safety, "");
  sim.output_every = get_int(ctx.cfg, "output_every", 0, "");
  sim.threads = ctx.threads;
  sim.serial_reference =
      get_bool(ctx.cfg, "serial_reference", false, "");
  sim.allow_extrapolation =
      get_bool(ctx.cfg, "allow_extrapolation", false, "");
  sim.step_tol = get_num(ctx.cfg, "step_tol", sim.step_tol, "");
  sim.constants = constants_from(ctx.cfg, "");
  if (ctx.cfg.contains("initial_velocity")) {
    const json& v = ctx.cfg["initial_velocity"];
    if (!v.is_array() || v.size() != 3) {
      bad_field("initial_velocity", "a [vx, vy, vz] array");
    }
    for (int d = 0; d < 3; ++d) {
      if (!v[d].is_number()) bad_field("initial_velocity", "numeric");
      sim.initial_velocity[d] = v[d].get<double>();
    }
  }
  if (ctx.cfg.contains("bcs")) {
    if (!ctx.cfg["bcs"].is_array()) {
      bad_field("bcs", "an array of {set, vx?, vy?, vz?} objects");
    }
    int i = 0;
    for (const json& b : ctx.cfg["bcs"]) {
      const std::string ctx_path = "bcs[" + std::to_string(i++) + "].";
      BoundaryCondition bc;
      bc.node_set = require_str(b, "set", ctx_path);
      const char* comp[3] = {"vx", "vy", "vz"};
      for (int d = 0; d < 3; ++d) {
        if (!b.contains(comp[d]) || b[comp[d]].is_null()) continue;
        if (!b[comp[d]].is_number()) bad_field(ctx_path + comp[d], "a number");
        bc.velocity[d] = b[comp[d]].get<double>();
      }
      sim.bcs.push_back(std::move(bc));
    }
  }

  const SimResult res = run_explicit(mesh, field, db, sim);
  save_history(res, ctx.path("history.csv").string());
  for (const FieldSnapshot& snap : res.snapshots) {
    char name[32];
    std::snprintf(name, sizeof name, "fields_%06d.vtk", snap.step);
    write_fields(mesh, snap, ctx.path(name).string());
  }
  std::cerr << "dmn: simulated " << res.steps << " steps (dt " << res.dt
            << " s), " << res.snapshots.size() << " field snapshots\n";
}

void cmd_inspect(Ctx& ctx) {
  const NetworkParams net = load_model(require_str(ctx.cfg, "model", ""));
  const NetworkStats s = stats(net);

  std::ostringstream report;
  report << "layers: " << net.layers << '\n'
         << "total_dofs: " << s.total_dofs << '\n'
         << "active_dofs: " << s.active_dofs << '\n'
         << "active_fiber: " << s.active_fiber << '\n'
         << "active_matrix: " << s.active_matrix << '\n';
  {
    char vf[16];
    std::snprintf(vf, sizeof vf, "%.4f", s.volume_fraction);
    report << "volume_fraction: " << vf << '\n';
  }
  std::cout << report.str();

  std::ofstream os(ctx.path("node_weights.csv"));
  if (!os) throw Error::io("cannot write node weights CSV");
  os << std::setprecision(17) << "node,weight\n";
  for (std::size_t n = 0; n < s.node_weights.size(); ++n) {
    os << n << ',' << s.node_weights[n] << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dmn: deep material network toolkit"};
  app.require_subcommand(1);

  struct Flags {
    std::string config;
    std::string out = "dmn_out";
    std::optional<std::int64_t> seed;
    std::optional<int> threads;
    std::optional<int> layers;
    std::optional<int> epochs;
    std::optional<double> lr;
    std::optional<double> num[4];
    std::optional<std::string> str[4];
    bool flag = false;
  } f;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON config file");
    sub->add_option("--out", f.out, "output directory (default dmn_out)");
    sub->add_option("--seed", f.seed, "random seed override");
    sub->add_option("--threads", f.threads, "worker thread count");
    return sub;
  };

  CLI::App* gen = common(app.add_subcommand(
      "gen-data", "sample a teacher network and write train/test data"));
  gen->add_option("--layers", f.layers, "teacher depth");
  gen->add_option("--vf", f.num[0], "teacher fiber volume fraction");
  gen->add_option("--train-samples", f.num[1], "training rows");
  gen->add_option("--test-samples", f.num[2], "test rows");

  CLI::App* train_cmd = common(app.add_subcommand(
      "train", "fit a network to sampled stiffness data"));
  train_cmd->add_option("--train-data", f.str[0], "training sample CSV");
  train_cmd->add_option("--test-data", f.str[1], "test sample CSV");
  train_cmd->add_option("--layers", f.layers, "network depth");
  train_cmd->add_option("--epochs", f.epochs, "training epochs");
  train_cmd->add_option("--learning-rate", f.lr, "optimizer step size");
  train_cmd->add_option("--stop-at", f.num[0], "early stop train error");

  CLI::App* transfer = common(app.add_subcommand(
      "transfer", "train starting from a pretrained model"));
  transfer->add_option("--source", f.str[2], "pretrained model path");
  transfer->add_option("--train-data", f.str[0], "training sample CSV");
  transfer->add_option("--test-data", f.str[1], "test sample CSV");
  transfer->add_option("--epochs", f.epochs, "training epochs");
  transfer->add_option("--learning-rate", f.lr, "optimizer step size");
  transfer->add_option("--stop-at", f.num[0], "early stop train error");

  CLI::App* build = common(app.add_subcommand(
      "build-db", "fit the interpolation database over four anchors"));

  CLI::App* query_cmd = common(app.add_subcommand(
      "query", "interpolate a network at a microstructure descriptor"));
  query_cmd->add_option("--database", f.str[0], "database JSON path");
  query_cmd->add_option("--vf", f.num[0], "fiber volume fraction");
  query_cmd->add_option("--a11", f.num[1], "first orientation eigenvalue");
  query_cmd->add_option("--a22", f.num[2], "second orientation eigenvalue");
  query_cmd->add_flag("--extrapolate", f.flag,
                      "allow descriptors outside the anchor hull");

  CLI::App* predict = common(app.add_subcommand(
      "predict", "run a mixed-control loading path on one material point"));
  predict->add_option("--model", f.str[0], "network model path");
  predict->add_option("--path", f.str[1], "loading path CSV");
  predict->add_option("--constants", f.str[2], "material constants JSON");

  CLI::App* simulate = common(app.add_subcommand(
      "simulate", "explicit multiscale dynamics on a box mesh"));
  simulate->add_option("--field", f.str[0], "descriptor field CSV");
  simulate->add_option("--database", f.str[1], "database JSON path");
  simulate->add_option("--end-time", f.num[0], "simulated time in s");
  simulate->add_flag("--serial-reference", f.flag,
                     "use the serial reference kernel");

  CLI::App* inspect = common(app.add_subcommand(
      "inspect", "report structure statistics of a model file"));
  inspect->add_option("--model", f.str[0], "network model path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // flag misuse is a config error
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();

    Ctx ctx;
    ctx.cfg = load_config(f.config);
    ctx.out = f.out;

    // Flag overrides beat config fields, which beat built-in defaults.
    const auto override_num = [&](const char* key,
                                  const std::optional<double>& v) {
      if (v) ctx.cfg[key] = *v;
    };
    const auto override_str = [&](const char* key,
                                  const std::optional<std::string>& v) {
      if (v) ctx.cfg[key] = *v;
    };
    if (f.layers) ctx.cfg["layers"] = *f.layers;
    if (f.epochs) ctx.cfg["epochs"] = *f.epochs;
    if (f.lr) ctx.cfg["learning_rate"] = *f.lr;
    if (name == "gen-data") {
      override_num("vf", f.num[0]);
      if (f.num[1]) ctx.cfg["train_samples"] = static_cast<int>(*f.num[1]);
      if (f.num[2]) ctx.cfg["test_samples"] = static_cast<int>(*f.num[2]);
    } else if (name == "train" || name == "transfer") {
      override_str("train_data", f.str[0]);
      override_str("test_data", f.str[1]);
      override_str("source", f.str[2]);
      override_num("stop_at_train_error", f.num[0]);
    } else if (name == "query") {
      override_str("database", f.str[0]);
      override_num("vf", f.num[0]);
      override_num("a11", f.num[1]);
      override_num("a22", f.num[2]);
      if (f.flag) ctx.cfg["allow_extrapolation"] = true;
    } else if (name == "predict") {
      override_str("model", f.str[0]);
      override_str("path", f.str[1]);
      override_str("constants", f.str[2]);
    } else if (name == "simulate") {
      override_str("field", f.str[0]);
      override_str("database", f.str[1]);
      override_num("end_time", f.num[0]);
      if (f.flag) ctx.cfg["serial_reference"] = true;
    } else if (name == "inspect") {
      override_str("model", f.str[0]);
    }

    ctx.seed = f.seed ? static_cast<std::uint64_t>(*f.seed)
                      : static_cast<std::uint64_t>(
                            get_num(ctx.cfg, "seed", 0.0, ""));
    const bool parallel_default = (name == "simulate" || name == "train" ||
                                   name == "transfer");
    const int hw = static_cast<int>(std::thread::hardware_concurrency());
    ctx.threads = f.threads ? *f.threads
                            : get_int(ctx.cfg, "threads",
                                      parallel_default ? std::max(1, hw) : 1,
                                      "");
    if (ctx.threads < 1) throw Error::config("thread count must be >= 1");

    prepare_out(ctx.out);

    if (name == "gen-data") {
      cmd_gen_data(ctx);
    } else if (name == "train" || name == "transfer") {
      cmd_train(ctx, name);
    } else if (name == "build-db") {
      (void)build;
      cmd_build_db(ctx);
    } else if (name == "query") {
      cmd_query(ctx);
    } else if (name == "predict") {
      cmd_predict(ctx);
    } else if (name == "simulate") {
      cmd_simulate(ctx);
    } else if (name == "inspect") {
      cmd_inspect(ctx);
    }

    write_manifest(ctx, name);
    return 0;
  } catch (const Error& e) {
    std::cerr << "dmn: error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "dmn: unexpected error: " << e.what() << '\n';
    return 1;
  }
}
