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

#include "lrb/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace lrb {

using nlohmann::json;

Activation ModelSpec::make_activation() const {
  switch (activation) {
    case Activation::Kind::relu: return Activation::relu();
    case Activation::Kind::jumprelu: return Activation::jumprelu(n_q, theta0);
    case Activation::Kind::topk: return Activation::topk(k, compose_relu);
    case Activation::Kind::batch_topk: return Activation::batch_topk(k, compose_relu);
    case Activation::Kind::jump: return Activation::jump(c);
  }
  return Activation::relu();
}

LossConfig LossSpec::make_loss() const {
  LossConfig cfg;
  if (l1_lambda) cfg.l1 = L1Penalty{*l1_lambda};
  if (l0_lambda) cfg.l0 = L0Penalty{*l0_lambda, l0_bandwidth};
  cfg.aux = aux;
  if (!matryoshka_levels.empty()) cfg.matryoshka = MatryoshkaLoss{matryoshka_levels, matryoshka_weights};
  return cfg;
}

void ExperimentConfig::validate() const {
  bench.validate();
  train.validate();
  require(!methods.empty(), "config: at least one method is required");
  require(!seeds.empty(), "config: at least one seed is required");
  std::set<std::string> names;
  for (const auto& m : methods) {
    require(!m.name.empty(), "config: method names must be non-empty");
    require(names.insert(m.name).second, "config: duplicate method name '" + m.name + "'");
    const std::string where = "config: method '" + m.name + "': ";
    require(m.model.n_q >= 1, where + "n_q must be >= 1");
    m.model.make_activation().validate(m.model.n_q);
    if (m.model.kind == ModelKind::crosscoder) {
      require(bench.pairing == PairingMode::crosscoder, where + "crosscoder model needs crosscoder pairing");
    }
    if (m.model.kind == ModelKind::sae) {
      require(bench.pairing != PairingMode::transcoder, where + "sae model cannot train on transcoder pairing");
    }
    if (m.loss.l1_lambda) require(*m.loss.l1_lambda >= 0.0, where + "l1_lambda must be >= 0");
    if (m.loss.l0_lambda) require(*m.loss.l0_lambda >= 0.0, where + "l0_lambda must be >= 0");
    require(m.loss.l0_bandwidth > 0.0, where + "l0_bandwidth must be > 0");
    if (m.loss.aux) {
      require(m.loss.aux->k_aux >= 1 && m.loss.aux->k_aux <= m.model.n_q, where + "k_aux must lie in [1, n_q]");
      require(m.loss.aux->lambda >= 0.0, where + "aux lambda must be >= 0");
    }
    if (!m.loss.matryoshka_levels.empty()) {
      require(m.model.activation == Activation::Kind::topk || m.model.activation == Activation::Kind::batch_topk,
              where + "matryoshka levels need a topk-family activation");
      for (std::size_t i = 0; i < m.loss.matryoshka_levels.size(); ++i) {
        const Index k = m.loss.matryoshka_levels[i];
        require(k >= 1 && k <= m.model.n_q, where + "matryoshka level outside [1, n_q]");
        if (i > 0) require(k > m.loss.matryoshka_levels[i - 1], where + "matryoshka levels must increase");
      }
      require(m.loss.matryoshka_weights.empty() ||
                  m.loss.matryoshka_weights.size() == m.loss.matryoshka_levels.size(),
              where + "matryoshka weights and levels differ in length");
    }
    if (paired) {
      require(anchors.k <= std::min(m.model.n_q, bench.n), where + "anchor k exceeds min(n_q, n)");
    }
  }
  require(anchors.k >= 0, "config: anchors.k must be >= 0");
  require(anchors.lambda >= 0.0, "config: anchors.lambda must be >= 0");
  require(!metrics.taus.empty(), "config: at least one tau is required");
  for (double t : metrics.taus) require(t > 0.0 && t < 1.0, "config: tau must lie in (0, 1)");
  require(metrics.eval_samples >= 1, "config: eval_samples must be >= 1");
  require(verify.gap_sparsities.size() >= 3, "config: gap suite needs at least three sparsity values");
  require(verify.gap_samples >= 1, "config: gap_samples must be >= 1");
  require(verify.gap_n >= 2 && verify.gap_n_p >= 1, "config: gap instance dimensions too small");
  require(verify.partial_trials >= 1 && verify.absorption_trials >= 1 && verify.probe_trials >= 1,
          "config: verify trial counts must be >= 1");
}

namespace {

// Reads an object field by field and rejects keys nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ValidationError(where_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ValidationError(where_ + "." + key + ": " + e.what());
    }
  }

  template <typename T>
  void get_optional(const char* key, std::optional<T>& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    if (j_.at(key).is_null()) {
      out.reset();
      return;
    }
    T v{};
    get(key, v);
    out = v;
  }

  const json* child(const char* key) {
    used_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null() ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) throw ValidationError(where_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

json bench_json(const BenchConfig& b) {
  return json{{"n", b.n},
              {"n_p", b.n_p},
              {"n_r", b.n_r},
              {"n_samples", b.n_samples},
              {"sparsity", b.sparsity},
              {"max_interference", b.max_interference},
              {"c_min", b.c_min},
              {"beta", b.beta},
              {"eps_tol", b.eps_tol},
              {"reg_lambda", b.reg_lambda},
              {"step_eta", b.step_eta},
              {"max_iters", b.max_iters},
              {"seed", b.seed},
              {"pairing", to_string(b.pairing)},
              {"sources", b.sources}};
}

BenchConfig bench_from(const json& j) {
  BenchConfig b;
  Fields f(j, "bench");
  f.get("n", b.n);
  f.get("n_p", b.n_p);
  f.get("n_r", b.n_r);
  f.get("n_samples", b.n_samples);
  f.get("sparsity", b.sparsity);
  f.get("max_interference", b.max_interference);
  f.get("c_min", b.c_min);
  f.get("beta", b.beta);
  f.get("eps_tol", b.eps_tol);
  f.get("reg_lambda", b.reg_lambda);
  f.get("step_eta", b.step_eta);
  f.get("max_iters", b.max_iters);
  f.get("seed", b.seed);
  std::string pairing = to_string(b.pairing);
  f.get("pairing", pairing);
  b.pairing = pairing_from_string(pairing);
  f.get("sources", b.sources);
  f.finish();
  return b;
}

json method_json(const MethodSpec& m) {
  json model{{"kind", to_string(m.model.kind)},
             {"n_q", m.model.n_q},
             {"activation", to_string(m.model.activation)},
             {"k", m.model.k},
             {"theta0", m.model.theta0},
             {"c", m.model.c},
             {"compose_relu", m.model.compose_relu}};
  json loss{{"l1_lambda", m.loss.l1_lambda ? json(*m.loss.l1_lambda) : json(nullptr)},
            {"l0_lambda", m.loss.l0_lambda ? json(*m.loss.l0_lambda) : json(nullptr)},
            {"l0_bandwidth", m.loss.l0_bandwidth},
            {"matryoshka_levels", m.loss.matryoshka_levels},
            {"matryoshka_weights", m.loss.matryoshka_weights}};
  if (m.loss.aux) {
    loss["aux"] = json{{"k_aux", m.loss.aux->k_aux},
                       {"lambda", m.loss.aux->lambda},
                       {"separate_decoder", m.loss.aux->separate_decoder}};
  } else {
    loss["aux"] = nullptr;
  }
  return json{{"name", m.name}, {"model", model}, {"loss", loss}};
}

MethodSpec method_from(const json& j, std::size_t idx) {
  const std::string where = "methods[" + std::to_string(idx) + "]";
  MethodSpec m;
  Fields f(j, where);
  f.get("name", m.name);
  if (const json* mj = f.child("model")) {
    Fields g(*mj, where + ".model");
    std::string kind = to_string(m.model.kind);
    std::string act = to_string(m.model.activation);
    g.get("kind", kind);
    g.get("n_q", m.model.n_q);
    g.get("activation", act);
    g.get("k", m.model.k);
    g.get("theta0", m.model.theta0);
    g.get("c", m.model.c);
    g.get("compose_relu", m.model.compose_relu);
    g.finish();
    m.model.kind = model_kind_from_string(kind);
    m.model.activation = activation_kind_from_string(act);
  }
  if (const json* lj = f.child("loss")) {
    Fields g(*lj, where + ".loss");
    g.get_optional("l1_lambda", m.loss.l1_lambda);
    g.get_optional("l0_lambda", m.loss.l0_lambda);
    g.get("l0_bandwidth", m.loss.l0_bandwidth);
    g.get("matryoshka_levels", m.loss.matryoshka_levels);
    g.get("matryoshka_weights", m.loss.matryoshka_weights);
    if (const json* aj = g.child("aux")) {
      Fields h(*aj, where + ".loss.aux");
      AuxLoss aux;
      h.get("k_aux", aux.k_aux);
      h.get("lambda", aux.lambda);
      h.get("separate_decoder", aux.separate_decoder);
      h.finish();
      m.loss.aux = aux;
    }
    g.finish();
  }
  f.finish();
  return m;
}

json train_json(const TrainConfig& t) {
  return json{{"steps", t.steps},
              {"batch_size", t.batch_size},
              {"lr", t.lr},
              {"decay_start", t.decay_start},
              {"adam_beta1", t.adam_beta1},
              {"adam_beta2", t.adam_beta2},
              {"adam_eps", t.adam_eps},
              {"seed", t.seed},
              {"dead_window", t.dead_window},
              {"resample_at", t.resample_at},
              {"resample_scale", t.resample_scale},
              {"grad_clip", t.grad_clip ? json(*t.grad_clip) : json(nullptr)},
              {"eval_every", t.eval_every}};
}

TrainConfig train_from(const json& j) {
  TrainConfig t;
  Fields f(j, "train");
  f.get("steps", t.steps);
  f.get("batch_size", t.batch_size);
  f.get("lr", t.lr);
  f.get("decay_start", t.decay_start);
  f.get("adam_beta1", t.adam_beta1);
  f.get("adam_beta2", t.adam_beta2);
  f.get("adam_eps", t.adam_eps);
  f.get("seed", t.seed);
  f.get("dead_window", t.dead_window);
  f.get("resample_at", t.resample_at);
  f.get("resample_scale", t.resample_scale);
  f.get_optional("grad_clip", t.grad_clip);
  f.get("eval_every", t.eval_every);
  f.finish();
  return t;
}

}  // namespace

json to_json(const ExperimentConfig& cfg) {
  json methods = json::array();
  for (const auto& m : cfg.methods) methods.push_back(method_json(m));
  return json{{"name", cfg.name},
              {"bench", bench_json(cfg.bench)},
              {"methods", methods},
              {"train", train_json(cfg.train)},
              {"anchors", {{"k", cfg.anchors.k}, {"lambda", cfg.anchors.lambda}}},
              {"paired", cfg.paired},
              {"seeds", cfg.seeds},
              {"metrics", {{"taus", cfg.metrics.taus}, {"eval_samples", cfg.metrics.eval_samples}}},
              {"report", {{"csv", cfg.report.csv}, {"text", cfg.report.text}}},
              {"verify",
               {{"gap_sparsities", cfg.verify.gap_sparsities},
                {"gap_samples", cfg.verify.gap_samples},
                {"gap_n", cfg.verify.gap_n},
                {"gap_n_p", cfg.verify.gap_n_p},
                {"partial_trials", cfg.verify.partial_trials},
                {"absorption_trials", cfg.verify.absorption_trials},
                {"probe_trials", cfg.verify.probe_trials}}}};
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg = default_config();
  Fields f(j, "config");
  f.get("name", cfg.name);
  if (const json* b = f.child("bench")) cfg.bench = bench_from(*b);
  if (const json* m = f.child("methods")) {
    if (!m->is_array()) throw ValidationError("config.methods: expected an array");
    cfg.methods.clear();
    for (std::size_t i = 0; i < m->size(); ++i) cfg.methods.push_back(method_from((*m)[i], i));
  }
  if (const json* t = f.child("train")) cfg.train = train_from(*t);
  if (const json* a = f.child("anchors")) {
    Fields g(*a, "anchors");
    g.get("k", cfg.anchors.k);
    g.get("lambda", cfg.anchors.lambda);
    g.finish();
  }
  f.get("paired", cfg.paired);
  f.get("seeds", cfg.seeds);
  if (const json* m = f.child("metrics")) {
    Fields g(*m, "metrics");
    g.get("taus", cfg.metrics.taus);
    g.get("eval_samples", cfg.metrics.eval_samples);
    g.finish();
  }
  if (const json* r = f.child("report")) {
    Fields g(*r, "report");
    g.get("csv", cfg.report.csv);
    g.get("text", cfg.report.text);
    g.finish();
  }
  if (const json* v = f.child("verify")) {
    Fields g(*v, "verify");
    g.get("gap_sparsities", cfg.verify.gap_sparsities);
    g.get("gap_samples", cfg.verify.gap_samples);
    g.get("gap_n", cfg.verify.gap_n);
    g.get("gap_n_p", cfg.verify.gap_n_p);
    g.get("partial_trials", cfg.verify.partial_trials);
    g.get("absorption_trials", cfg.verify.absorption_trials);
    g.get("probe_trials", cfg.verify.probe_trials);
    g.finish();
  }
  f.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeFailure("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return config_from_json(j);
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write config file: " + path);
  out << to_json(cfg).dump(2) << '\n';
}

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  MethodSpec topk;
  topk.name = "topk";
  cfg.methods.push_back(topk);
  return cfg;
}

}  // namespace lrb
