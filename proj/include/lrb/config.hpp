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

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "lrb/bench.hpp"
#include "lrb/losses.hpp"
#include "lrb/sdl.hpp"
#include "lrb/trainer.hpp"

namespace lrb {

struct ModelSpec {
  ModelKind kind = ModelKind::sae;
  Index n_q = 2000;
  Activation::Kind activation = Activation::Kind::topk;
  Index k = 8;                // topk / batch_topk
  double theta0 = 0.001;      // jumprelu initial threshold
  double c = 0.0;             // jump threshold
  bool compose_relu = true;

  Activation make_activation() const;
};

/// Data-independent loss settings; anchors are filled in at run time.
struct LossSpec {
  std::optional<double> l1_lambda;
  std::optional<double> l0_lambda;
  double l0_bandwidth = 0.001;
  std::optional<AuxLoss> aux;
  std::vector<Index> matryoshka_levels;
  std::vector<double> matryoshka_weights;

  LossConfig make_loss() const;
};

struct MethodSpec {
  std::string name;
  ModelSpec model;
  LossSpec loss;
};

struct AnchorSpec {
  Index k = 20;
  double lambda = 1.0;
};

struct MetricsSpec {
  std::vector<double> taus{0.9, 0.95};
  Index eval_samples = 10000;
};

struct ReportSpec {
  std::string csv;   // empty: not written
  std::string text;  // empty: not written
};

struct VerifySpec {
  std::vector<double> gap_sparsities{0.99, 0.995, 0.999};
  Index gap_samples = 1000000;
  Index gap_n = 20;
  Index gap_n_p = 16;
  int partial_trials = 20;
  int absorption_trials = 50;
  int probe_trials = 100;
};

struct ExperimentConfig {
  std::string name = "experiment";
  BenchConfig bench;
  std::vector<MethodSpec> methods;
  TrainConfig train;
  AnchorSpec anchors;
  bool paired = true;  // also run every method with feature anchoring
  std::vector<std::uint64_t> seeds{0};
  MetricsSpec metrics;
  ReportSpec report;
  VerifySpec verify;

  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);

ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

/// Defaults with a single TopK method.
ExperimentConfig default_config();

}  // namespace lrb
