// Copyright 2026 The LRB Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// lrb: command-line front end for bench generation, training, evaluation,
// anchors, theory certificates and experiment grids.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lrb/config.hpp"
#include "lrb/experiment.hpp"
#include "lrb/matrix_io.hpp"
#include "lrb/metrics.hpp"
#include "lrb/model_io.hpp"
#include "lrb/trainer.hpp"
#include "lrb/verify.hpp"

namespace fs = std::filesystem;
using namespace lrb;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitCertificate = 3;

struct Globals {
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string out = "lrb_out";
};

ExperimentConfig config_or_default(const std::string& path) {
  return path.empty() ? default_config() : load_config(path);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << text;
}

struct GenOptions {
  std::string config;
  std::optional<Index> n, n_p, n_r, samples;
  std::optional<double> sparsity, interference;
  std::string pairing;
};

int run_gen(const Globals& g, const GenOptions& o) {
  ExperimentConfig cfg = config_or_default(o.config);
  BenchConfig& b = cfg.bench;
  if (o.n) b.n = *o.n;
  if (o.n_p) b.n_p = *o.n_p;
  if (o.n_r) b.n_r = *o.n_r;
  if (o.samples) b.n_samples = *o.samples;
  if (o.sparsity) b.sparsity = *o.sparsity;
  if (o.interference) b.max_interference = *o.interference;
  if (!o.pairing.empty()) b.pairing = pairing_from_string(o.pairing);
  if (g.seed) b.seed = *g.seed;
  b.validate();

  const BenchDataset data = generate_bench(b);
  const fs::path dir = g.out;
  fs::create_directories(dir);
  io::write_matrix(dir / "inputs.f32", data.inputs, "input", b.seed);
  io::write_matrix(dir / "targets.f32", data.targets, "target", b.seed);
  io::write_matrix(dir / "w_p.f32", data.w_p.data, "w_p", b.seed);
  io::write_matrix(dir / "w_r.f32", data.w_r.data, "w_r", b.seed);
  io::write_matrix(dir / "coeffs.f32", data.coeffs.coeffs, "coeffs", b.seed);
  save_config(cfg, (dir / "config.json").string());

  std::cout << "samples=" << data.inputs.rows() << '\n'
            << "input_dim=" << data.inputs.cols() << '\n'
            << "target_dim=" << data.targets.cols() << '\n'
            << "interference_p=" << data.achieved_interference_p << '\n'
            << "interference_r=" << data.achieved_interference_r << '\n'
            << "out=" << dir.string() << '\n';
  return kExitOk;
}

FeatureMatrix load_features(const fs::path& path, MatrixRole role) {
  FeatureMatrix f;
  f.data = io::read_matrix(path);
  f.role = role;
  f.column_norm = f.data.cols() > 0 ? f.data.col(0).norm() : 1.0;
  return f;
}

struct TrainOptions {
  std::string config;
  std::string method;
  std::string data;
  bool anchored = false;
  std::optional<int> steps;
  std::optional<double> lr;
};

int run_train(const Globals& g, const TrainOptions& o) {
  ExperimentConfig cfg = config_or_default(o.config);
  if (o.steps) cfg.train.steps = *o.steps;
  if (o.lr) cfg.train.lr = *o.lr;
  const std::uint64_t seed = g.seed.value_or(cfg.seeds.front());
  cfg.seeds = {seed};
  cfg.validate();

  const MethodSpec* method = &cfg.methods.front();
  if (!o.method.empty()) {
    method = nullptr;
    for (const auto& m : cfg.methods) {
      if (m.name == o.method) method = &m;
    }
    require(method != nullptr, "train: no method named '" + o.method + "' in the config");
  }

  BenchPair bench;
  if (o.data.empty()) {
    BenchConfig b = cfg.bench;
    b.seed = seed;
    bench = make_bench(b, cfg.metrics.eval_samples);
  } else {
    const fs::path dir = o.data;
    bench.train.inputs = io::read_matrix(dir / "inputs.f32");
    bench.train.targets = io::read_matrix(dir / "targets.f32");
    bench.train.w_p = load_features(dir / "w_p.f32", MatrixRole::input);
    bench.train.w_r = load_features(dir / "w_r.f32", MatrixRole::target);
    bench.train.config = cfg.bench;
    bench.eval_inputs = bench.train.inputs;
    bench.eval_targets = bench.train.targets;
  }

  const RunOutcome run = run_cell(cfg, *method, o.anchored, seed, bench);
  const fs::path dir = g.out;
  io::save_model(dir / "model", run.model, seed);
  std::ostringstream curve;
  curve << "step,mse,total,mean_l0,dead\n";
  for (const auto& r : run.history.records) {
    curve << r.step << ',' << r.loss.mse << ',' << r.loss.total << ',' << r.mean_l0 << ','
          << r.dead_count << '\n';
  }
  write_text(dir / "history.csv", curve.str());

  std::cout << "method=" << method->name << (o.anchored ? "+FA" : "") << '\n'
            << "seed=" << seed << '\n'
            << "final_mse=" << run.final_loss.mse << '\n'
            << "final_total=" << run.final_loss.total << '\n';
  for (const auto& r : run.recovery) {
    std::cout << "m_gt@" << r.tau << '=' << r.gt_recovery << '\n';
  }
  std::cout << "m_ip=" << run.recovery.front().max_inner_product << '\n'
            << "mean_l0=" << run.recovery.front().mean_l0 << '\n'
            << "dead=" << run.recovery.front().dead_count << '\n'
            << "model=" << (dir / "model").string() << '\n';
  return kExitOk;
}

struct EvalOptions {
  std::string model;
  std::string data;
  std::vector<double> taus{0.9, 0.95};
};

int run_eval(const EvalOptions& o) {
  const SdlModel model = io::load_model(o.model);
  const fs::path dir = o.data;
  const Matrix inputs = io::read_matrix(dir / "inputs.f32");
  const FeatureMatrix w_p = load_features(dir / "w_p.f32", MatrixRole::input);
  for (double t : o.taus) require(t > 0.0 && t <= 1.0, "eval: tau must lie in (0, 1]");
  const auto reports = evaluate_model(model, w_p, inputs, o.taus);
  for (const auto& r : reports) std::cout << "m_gt@" << r.tau << '=' << r.gt_recovery << '\n';
  std::cout << "m_ip=" << reports.front().max_inner_product << '\n'
            << "mean_l0=" << reports.front().mean_l0 << '\n'
            << "dead=" << reports.front().dead_count << '\n';
  if (fs::exists(dir / "targets.f32")) {
    const Matrix targets = io::read_matrix(dir / "targets.f32");
    std::cout << "mse=" << sdl_loss(model, inputs, targets, LossConfig{}).mse << '\n';
  }
  return kExitOk;
}

struct AnchorOptions {
  std::string data;
  Index k = 20;
  std::string embeddings;
  std::string labels;
};

int run_anchors(const Globals& g, const AnchorOptions& o) {
  AnchorSet a;
  if (!o.labels.empty()) {
    require(!o.embeddings.empty(), "anchors: --labels needs --embeddings");
    a = subpopulation_anchors(io::read_matrix(o.embeddings), read_labels(o.labels));
  } else {
    require(!o.data.empty(), "anchors: give --data or --embeddings with --labels");
    const fs::path dir = o.data;
    a = gt_anchors(load_features(dir / "w_p.f32", MatrixRole::input),
                   load_features(dir / "w_r.f32", MatrixRole::target), o.k, g.seed.value_or(0));
  }
  const fs::path dir = g.out;
  fs::create_directories(dir);
  io::write_matrix(dir / "anchor_p.f32", a.anchor_p, "anchor_p", g.seed.value_or(0));
  io::write_matrix(dir / "anchor_r.f32", a.anchor_r, "anchor_r", g.seed.value_or(0));
  std::cout << "count=" << a.count() << '\n' << "indices=";
  for (std::size_t i = 0; i < a.indices.size(); ++i) std::cout << (i ? "," : "") << a.indices[i];
  std::cout << '\n';
  if (!a.skipped.empty()) {
    std::cout << "skipped=";
    for (std::size_t i = 0; i < a.skipped.size(); ++i) std::cout << (i ? "," : "") << a.skipped[i];
    std::cout << '\n';
  }
  return kExitOk;
}

int run_verify_cmd(const Globals& g, const std::string& suite, const std::string& config,
                   bool write) {
  const ExperimentConfig cfg = config_or_default(config);
  const VerifyReport rep = run_verify(suite, cfg.verify, g.seed.value_or(0));
  std::cout << rep.to_kv() << '\n' << rep.to_table();
  if (write) write_text(fs::path(g.out) / ("verify_" + suite + ".txt"), rep.to_kv());
  return rep.pass() ? kExitOk : kExitCertificate;
}

int run_experiment_cmd(const Globals& g, const std::string& config, const std::string& preset_name) {
  require(config.empty() != preset_name.empty(), "experiment: give exactly one of --config or --preset");
  std::vector<ExperimentConfig> cfgs = config.empty() ? preset(preset_name) : std::vector{load_config(config)};
  for (auto& c : cfgs) {
    if (g.seed) c.seeds = {*g.seed};
    c.validate();
  }
  // Everything is computed before anything is written, so a failed stage
  // leaves no partial outputs behind.
  std::vector<ReportTable> tables;
  for (const auto& c : cfgs) {
    tables.push_back(run_experiment(c, g.threads, [](const std::string& line) {
      std::cerr << line << std::endl;
    }));
  }
  const fs::path dir = g.out;
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    const auto& c = cfgs[i];
    const fs::path csv = c.report.csv.empty() ? dir / (c.name + ".csv") : fs::path(c.report.csv);
    const fs::path txt = c.report.text.empty() ? dir / (c.name + ".txt") : fs::path(c.report.text);
    write_text(csv, tables[i].to_csv());
    write_text(txt, tables[i].to_text());
    std::cout << tables[i].to_text() << '\n';
  }
  return kExitOk;
}

int run_config(bool defaults, const std::string& preset_name, const std::string& check) {
  if (!check.empty()) {
    const ExperimentConfig cfg = load_config(check);
    std::cout << "valid: " << cfg.name << '\n';
    return kExitOk;
  }
  if (!preset_name.empty()) {
    nlohmann::json all = nlohmann::json::array();
    for (const auto& c : preset(preset_name)) all.push_back(to_json(c));
    std::cout << (all.size() == 1 ? all[0] : all).dump(2) << '\n';
    return kExitOk;
  }
  require(defaults, "config: give --defaults, --preset or --check");
  std::cout << to_json(default_config()).dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linear Representation Bench toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "RNG seed");
  app.add_option("--threads", g.threads, "worker threads for experiment grids")->check(CLI::PositiveNumber);
  auto* out_opt = app.add_option("--out", g.out, "output directory");

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a bench dataset");
  gen_cmd->add_option("--config", gen.config, "experiment config (JSON)");
  gen_cmd->add_option("--n", gen.n, "number of features");
  gen_cmd->add_option("--n-p", gen.n_p, "input dimension");
  gen_cmd->add_option("--n-r", gen.n_r, "target dimension");
  gen_cmd->add_option("--samples", gen.samples, "number of samples");
  gen_cmd->add_option("--sparsity", gen.sparsity, "per-feature inactivity probability");
  gen_cmd->add_option("--interference", gen.interference, "max off-diagonal inner product");
  gen_cmd->add_option("--pairing", gen.pairing, "sae | transcoder | crosscoder");

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "train one method");
  train_cmd->add_option("--config", tr.config, "experiment config (JSON)");
  train_cmd->add_option("--method", tr.method, "method name from the config");
  train_cmd->add_option("--data", tr.data, "directory written by `lrb gen`");
  train_cmd->add_flag("--anchored", tr.anchored, "add feature anchoring");
  train_cmd->add_option("--steps", tr.steps, "override training steps");
  train_cmd->add_option("--lr", tr.lr, "override learning rate");

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "recovery metrics for a saved model");
  eval_cmd->add_option("--model", ev.model, "model directory")->required();
  eval_cmd->add_option("--data", ev.data, "directory written by `lrb gen`")->required();
  eval_cmd->add_option("--tau", ev.taus, "similarity thresholds");

  AnchorOptions an;
  auto* anchors_cmd = app.add_subcommand("anchors", "build feature anchors");
  anchors_cmd->add_option("--data", an.data, "directory written by `lrb gen`");
  anchors_cmd->add_option("--k", an.k, "ground-truth anchor count")->check(CLI::NonNegativeNumber);
  anchors_cmd->add_option("--embeddings", an.embeddings, "f32 matrix of embeddings, one per row");
  anchors_cmd->add_option("--labels", an.labels, "text file with one class label per row");

  std::string suite, verify_config;
  auto* verify_cmd = app.add_subcommand("verify", "run a theory certificate suite");
  verify_cmd->add_option("--suite", suite, "global | partial | absorption | biconvex | gap | all")->required();
  verify_cmd->add_option("--config", verify_config, "experiment config supplying verify settings");

  std::string exp_config, exp_preset;
  auto* exp_cmd = app.add_subcommand("experiment", "run an experiment grid");
  exp_cmd->add_option("--config", exp_config, "experiment config (JSON)");
  exp_cmd->add_option("--preset", exp_preset, "named preset");

  bool defaults = false;
  std::string cfg_preset, cfg_check;
  auto* config_cmd = app.add_subcommand("config", "print or check configurations");
  config_cmd->add_flag("--defaults", defaults, "print the default config");
  config_cmd->add_option("--preset", cfg_preset, "print a preset's config");
  config_cmd->add_option("--check", cfg_check, "validate a config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*gen_cmd) return run_gen(g, gen);
    if (*train_cmd) return run_train(g, tr);
    if (*eval_cmd) return run_eval(ev);
    if (*anchors_cmd) return run_anchors(g, an);
    if (*verify_cmd) return run_verify_cmd(g, suite, verify_config, out_opt->count() > 0);
    if (*exp_cmd) return run_experiment_cmd(g, exp_config, exp_preset);
    if (*config_cmd) return run_config(defaults, cfg_preset, cfg_check);
  } catch (const ValidationError& e) {
    std::cerr << "lrb: error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "lrb: runtime failure: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitValidation;
}
