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

#include "lrb/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <sstream>
#include <thread>

namespace lrb {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string tau_label(double tau) { return fmt("%g", tau); }

// Re-raises an exception with the failing stage prefixed, keeping its kind.
template <typename F>
auto staged(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ValidationError& e) {
    throw ValidationError(stage + ": " + e.what());
  } catch (const RuntimeFailure& e) {
    throw RuntimeFailure(stage + ": " + e.what());
  }
}

}  // namespace

const ReportRow* ReportTable::median(const std::string& method) const {
  for (const auto& r : rows) {
    if (r.aggregate && r.method == method) return &r;
  }
  return nullptr;
}

std::string ReportTable::to_csv() const {
  std::ostringstream os;
  os << "method,seed";
  for (double t : taus) os << ",m_gt@" << tau_label(t);
  os << ",m_ip,mean_l0,final_loss,dead\n";
  for (const auto& r : rows) {
    os << r.method << ',' << r.seed;
    for (double g : r.m_gt) os << ',' << fmt("%.6f", g);
    os << ',' << fmt("%.6f", r.m_ip) << ',' << fmt("%.4f", r.mean_l0) << ','
       << fmt("%.8g", r.final_loss) << ',' << fmt("%g", r.dead_count) << '\n';
  }
  return os.str();
}

std::string ReportTable::to_text() const {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> head{"method", "seed"};
  for (double t : taus) head.push_back("M_GT@" + tau_label(t) + " (%)");
  for (const char* h : {"M_IP", "L0", "loss", "dead"}) head.emplace_back(h);
  cells.push_back(head);
  for (const auto& r : rows) {
    std::vector<std::string> line{r.method, r.seed};
    for (double g : r.m_gt) line.push_back(fmt("%.2f", 100.0 * g));
    line.push_back(fmt("%.3f", r.m_ip));
    line.push_back(fmt("%.1f", r.mean_l0));
    line.push_back(fmt("%.4g", r.final_loss));
    line.push_back(fmt("%g", r.dead_count));
    cells.push_back(line);
  }
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  }
  std::ostringstream os;
  if (!title.empty()) os << title << '\n';
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::size_t c = 0; c < cells[i].size(); ++c) {
      const auto& s = cells[i][c];
      const std::string pad(width[c] - s.size(), ' ');
      os << (c ? "  " : "") << (c < 2 ? s + pad : pad + s);
    }
    os << '\n';
    if (i == 0) {
      std::size_t total = 0;
      for (std::size_t w : width) total += w + 2;
      os << std::string(total - 2, '-') << '\n';
    }
  }
  return os.str();
}

BenchPair make_bench(const BenchConfig& cfg, Index eval_samples) {
  BenchPair out;
  out.train = generate_bench(cfg);
  BenchConfig held = cfg;
  held.n_samples = eval_samples;
  held.seed = mix_seed(cfg.seed, 0xE7A1);
  const BenchDataset eval = synthesize(out.train.w_p, out.train.w_r, sample_features(held));
  out.eval_inputs = eval.inputs;
  out.eval_targets = eval.targets;
  return out;
}

RunOutcome run_cell(const ExperimentConfig& cfg, const MethodSpec& method, bool anchored,
                    std::uint64_t seed, const BenchPair& bench) {
  const BenchDataset& data = bench.train;
  const Index n_p = data.inputs.cols();
  const Index n_r = data.targets.cols();
  const int sources = method.model.kind == ModelKind::crosscoder ? cfg.bench.sources : 1;
  SdlModel model = staged("init", [&] {
    return init_model(n_p, method.model.n_q, n_r, method.model.make_activation(), method.model.kind,
                      seed, sources);
  });
  LossConfig loss = method.loss.make_loss();
  if (loss.aux && loss.aux->separate_decoder) model.w_d_aux = model.w_d;
  if (anchored && cfg.anchors.k > 0) {
    const AnchorSet a = staged("anchors", [&] { return gt_anchors(data.w_p, data.w_r, cfg.anchors.k, seed); });
    loss.anchoring = AnchorLoss{a.count(), cfg.anchors.lambda, a.anchor_p, a.anchor_r};
  }
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  TrainResult tr = staged("train", [&] { return train(std::move(model), data, loss, tc); });

  RunOutcome out;
  out.model = std::move(tr.model);
  out.history = std::move(tr.history);
  staged("eval", [&] {
    out.recovery = evaluate_model(out.model, data.w_p, bench.eval_inputs, cfg.metrics.taus);
    out.final_loss = sdl_loss(out.model, bench.eval_inputs, bench.eval_targets, loss);
    return 0;
  });
  return out;
}

ReportTable run_experiment(const ExperimentConfig& cfg, int threads, const ProgressFn& progress) {
  cfg.validate();
  require(threads >= 1, "experiment: threads must be >= 1");

  struct Cell {
    std::size_t method;
    bool anchored;
    std::string label;
  };
  std::vector<Cell> cells;
  for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
    cells.push_back({m, false, cfg.methods[m].name});
    if (cfg.paired) cells.push_back({m, true, cfg.methods[m].name + "+FA"});
  }
  std::vector<std::uint64_t> seeds = cfg.seeds;
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());

  // results[cell][seed]
  std::vector<std::vector<ReportRow>> results(cells.size(), std::vector<ReportRow>(seeds.size()));
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    BenchConfig bc = cfg.bench;
    bc.seed = seeds[s];
    const BenchPair bench = staged("gen", [&] { return make_bench(bc, cfg.metrics.eval_samples); });

    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(cells.size());
    auto worker = [&] {
      for (std::size_t c = next++; c < cells.size(); c = next++) {
        try {
          const auto t0 = std::chrono::steady_clock::now();
          const Cell& cell = cells[c];
          const RunOutcome out = run_cell(cfg, cfg.methods[cell.method], cell.anchored, seeds[s], bench);
          ReportRow row;
          row.method = cell.label;
          row.seed = std::to_string(seeds[s]);
          for (const auto& r : out.recovery) row.m_gt.push_back(r.gt_recovery);
          row.m_ip = out.recovery.front().max_inner_product;
          row.mean_l0 = out.recovery.front().mean_l0;
          row.dead_count = static_cast<double>(out.recovery.front().dead_count);
          row.final_loss = out.final_loss.total;
          results[c][s] = row;
          if (progress) {
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::ostringstream os;
            os << cfg.name << " seed " << row.seed << ' ' << row.method << ": M_GT "
               << fmt("%.2f%%", 100.0 * row.m_gt.front()) << ", M_IP " << fmt("%.3f", row.m_ip) << ", L0 "
               << fmt("%.1f", row.mean_l0) << " (" << fmt("%.1f", secs) << " s)";
            progress(os.str());
          }
        } catch (...) {
          errors[c] = std::current_exception();
        }
      }
    };
    const int pool = std::min<int>(threads, static_cast<int>(cells.size()));
    if (pool <= 1) {
      worker();
    } else {
      std::vector<std::thread> ts;
      for (int t = 0; t < pool; ++t) ts.emplace_back(worker);
      for (auto& t : ts) t.join();
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  ReportTable table;
  table.title = cfg.name;
  table.taus = cfg.metrics.taus;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    ReportRow agg;
    agg.method = cells[c].label;
    agg.seed = "median";
    agg.aggregate = true;
    std::vector<double> ip, l0, loss, dead;
    std::vector<std::vector<double>> gt(table.taus.size());
    for (const auto& r : results[c]) {
      table.rows.push_back(r);
      for (std::size_t t = 0; t < gt.size(); ++t) gt[t].push_back(r.m_gt[t]);
      ip.push_back(r.m_ip);
      l0.push_back(r.mean_l0);
      loss.push_back(r.final_loss);
      dead.push_back(r.dead_count);
    }
    for (auto& g : gt) agg.m_gt.push_back(median(g));
    agg.m_ip = median(ip);
    agg.mean_l0 = median(l0);
    agg.final_loss = median(loss);
    agg.dead_count = median(dead);
    table.rows.push_back(agg);
  }
  return table;
}

std::vector<std::string> preset_names() {
  return {"desk-table1", "ablation-superposition", "ablation-sparsity", "ablation-interference", "smoke"};
}

namespace {

MethodSpec method(const std::string& name, Activation::Kind act, Index n_q, Index k) {
  MethodSpec m;
  m.name = name;
  m.model.n_q = n_q;
  m.model.activation = act;
  m.model.k = k;
  return m;
}

ExperimentConfig desk_table1() {
  ExperimentConfig cfg;
  cfg.name = "desk-table1";
  cfg.bench.n = 200;
  cfg.bench.n_p = 128;
  cfg.bench.n_r = 128;
  cfg.bench.n_samples = 20000;
  cfg.bench.sparsity = 0.99;
  cfg.bench.max_interference = 0.1;
  const Index n_q = 2000;
  const Index k = 6;
  MethodSpec relu = method("relu", Activation::Kind::relu, n_q, k);
  relu.loss.l1_lambda = 0.1;
  MethodSpec jump = method("jumprelu", Activation::Kind::jumprelu, n_q, k);
  jump.loss.l0_lambda = 0.001;
  MethodSpec matry = method("matryoshka", Activation::Kind::topk, n_q, k);
  matry.loss.matryoshka_levels = {2, 4};
  cfg.methods = {relu, jump, method("topk", Activation::Kind::topk, n_q, k),
                 method("batch_topk", Activation::Kind::batch_topk, n_q, k), matry};
  cfg.train.steps = 1000;
  cfg.train.batch_size = 256;
  cfg.train.lr = 1e-3;
  cfg.train.decay_start = 0.0;
  cfg.anchors.k = 20;
  cfg.anchors.lambda = 1.0;
  cfg.seeds = {0, 1, 2};
  cfg.metrics.eval_samples = 10000;
  return cfg;
}

ExperimentConfig small_topk(const std::string& name, Index n, Index n_p, double s, double m) {
  ExperimentConfig cfg;
  cfg.name = name;
  cfg.bench.n = n;
  cfg.bench.n_p = n_p;
  cfg.bench.n_r = n_p;
  cfg.bench.n_samples = 20000;
  cfg.bench.sparsity = s;
  cfg.bench.max_interference = m;
  cfg.methods = {method("topk", Activation::Kind::topk, 4 * n, 4)};
  cfg.train.steps = 1500;
  cfg.train.batch_size = 256;
  cfg.train.lr = 2e-3;
  cfg.train.decay_start = 0.0;
  cfg.anchors.k = std::max<Index>(1, n / 10);
  cfg.seeds = {0, 1, 2};
  cfg.metrics.eval_samples = 5000;
  return cfg;
}

}  // namespace

std::vector<ExperimentConfig> preset(const std::string& name) {
  if (name == "desk-table1") return {desk_table1()};
  if (name == "ablation-superposition") {
    std::vector<ExperimentConfig> out;
    for (Index n : {48, 96, 192}) out.push_back(small_topk("ablation-superposition n=" + std::to_string(n), n, 32, 0.99, 0.3));
    return out;
  }
  if (name == "ablation-sparsity") {
    std::vector<ExperimentConfig> out;
    for (double s : {0.95, 0.99, 0.995}) out.push_back(small_topk("ablation-sparsity S=" + fmt("%g", s), 96, 32, s, 0.3));
    return out;
  }
  if (name == "ablation-interference") {
    std::vector<ExperimentConfig> out;
    for (double m : {0.2, 0.3, 0.4}) out.push_back(small_topk("ablation-interference M=" + fmt("%g", m), 96, 32, 0.99, m));
    return out;
  }
  if (name == "smoke") {
    ExperimentConfig cfg = small_topk("smoke", 16, 8, 0.9, 0.5);
    cfg.bench.n_samples = 2000;
    cfg.train.steps = 200;
    cfg.seeds = {0};
    cfg.metrics.eval_samples = 500;
    return {cfg};
  }
  throw ValidationError("unknown preset '" + name + "'");
}

}  // namespace lrb
