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

#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "lrb/experiment.hpp"
#include "test_support.hpp"

using namespace lrb;
using namespace lrb::testing;

namespace {

ExperimentConfig tiny() {
  ExperimentConfig cfg = preset("smoke").front();
  cfg.bench.n = 10;
  cfg.bench.n_p = 8;
  cfg.bench.n_r = 8;
  cfg.bench.n_samples = 400;
  cfg.train.steps = 30;
  cfg.train.batch_size = 32;
  cfg.metrics.eval_samples = 100;
  cfg.anchors.k = 2;
  MethodSpec relu;
  relu.name = "relu";
  relu.model.n_q = 20;
  relu.model.activation = Activation::Kind::relu;
  relu.loss.l1_lambda = 0.01;
  cfg.methods.front().model.n_q = 20;
  cfg.methods.push_back(relu);
  cfg.seeds = {5, 2, 5, 9};
  return cfg;
}

double ref_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v.size() % 2 ? v[v.size() / 2] : (v[v.size() / 2 - 1] + v[v.size() / 2]) / 2.0;
}

}  // namespace

TEST_CASE("report rows are grouped by cell with sorted unique seeds") {
  const ExperimentConfig cfg = tiny();
  std::vector<std::string> progress;
  const ReportTable t = run_experiment(cfg, 1, [&](const std::string& s) { progress.push_back(s); });
  const std::vector<std::string> labels{"topk", "topk+FA", "relu", "relu+FA"};
  REQUIRE(t.rows.size() == labels.size() * 4);
  CHECK(progress.size() == labels.size() * 3);
  for (std::size_t c = 0; c < labels.size(); ++c) {
    const std::vector<std::string> seeds{"2", "5", "9", "median"};
    for (std::size_t s = 0; s < 4; ++s) {
      const ReportRow& r = t.rows[c * 4 + s];
      CHECK(r.method == labels[c]);
      CHECK(r.seed == seeds[s]);
      CHECK(r.aggregate == (s == 3));
      CHECK(r.m_gt.size() == cfg.metrics.taus.size());
    }
    const ReportRow* agg = t.median(labels[c]);
    REQUIRE(agg != nullptr);
    std::vector<double> ip, loss;
    for (std::size_t s = 0; s < 3; ++s) {
      ip.push_back(t.rows[c * 4 + s].m_ip);
      loss.push_back(t.rows[c * 4 + s].final_loss);
    }
    CHECK(agg->m_ip == ref_median(ip));
    CHECK(agg->final_loss == ref_median(loss));
  }
  CHECK(t.median("gelu") == nullptr);

  std::istringstream csv(t.to_csv());
  std::string line;
  std::getline(csv, line);
  CHECK(line == "method,seed,m_gt@0.9,m_gt@0.95,m_ip,mean_l0,final_loss,dead");
  int lines = 0;
  while (std::getline(csv, line)) ++lines;
  CHECK(lines == 16);
}

TEST_CASE("worker count does not change the results") {
  ExperimentConfig cfg = tiny();
  cfg.seeds = {1};
  const ReportTable a = run_experiment(cfg, 1);
  const ReportTable b = run_experiment(cfg, 3);
  CHECK(a.to_csv() == b.to_csv());
}

TEST_CASE("plain and anchored cells share one bench per seed") {
  ExperimentConfig cfg = tiny();
  const BenchPair p1 = make_bench(cfg.bench, 50);
  const BenchPair p2 = make_bench(cfg.bench, 50);
  CHECK(p1.train.inputs == p2.train.inputs);
  CHECK(p1.eval_inputs == p2.eval_inputs);
  CHECK(p1.eval_inputs.topRows(10) != p1.train.inputs.topRows(10));
  // With anchoring disabled the paired cell must match the plain one exactly.
  cfg.anchors.lambda = 0.0;
  const RunOutcome plain = run_cell(cfg, cfg.methods.front(), false, 3, p1);
  const RunOutcome fa = run_cell(cfg, cfg.methods.front(), true, 3, p1);
  CHECK(plain.model.w_e == fa.model.w_e);
  CHECK(plain.recovery.front().max_inner_product == fa.recovery.front().max_inner_product);
}

TEST_CASE("experiment validation") {
  ExperimentConfig cfg = tiny();
  cfg.methods.clear();
  CHECK_THROWS_AS(run_experiment(cfg), ValidationError);
  cfg = tiny();
  CHECK_THROWS_AS(run_experiment(cfg, 0), ValidationError);
  cfg.methods.front().model.k = 50;
  CHECK_THROWS_AS(run_experiment(cfg), ValidationError);
}

TEST_CASE("text report lines up its columns") {
  ReportTable t;
  t.title = "demo";
  t.taus = {0.9};
  t.rows.push_back(ReportRow{"topk", "0", {0.5}, 0.75, 4.0, 0.1, 2.0, false});
  t.rows.push_back(ReportRow{"topk", "median", {0.5}, 0.75, 4.0, 0.1, 2.0, true});
  std::istringstream text(t.to_text());
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(text, line)) lines.push_back(line);
  REQUIRE(lines.size() == 5);
  CHECK(lines[0] == "demo");
  CHECK(lines[2].find_first_not_of('-') == std::string::npos);
  CHECK(lines[1].size() == lines[3].size());
  CHECK(lines[3].find("50.00") != std::string::npos);
}
