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

#include <functional>
#include <string>
#include <vector>

#include "lrb/bench.hpp"
#include "lrb/config.hpp"
#include "lrb/metrics.hpp"
#include "lrb/trainer.hpp"

namespace lrb {

struct ReportRow {
  std::string method;   // "topk" or "topk+FA"
  std::string seed;     // decimal seed, or "median" for aggregate rows
  std::vector<double> m_gt;  // one per tau
  double m_ip = 0.0;
  double mean_l0 = 0.0;
  double final_loss = 0.0;
  double dead_count = 0.0;
  bool aggregate = false;
};

struct ReportTable {
  std::string title;
  std::vector<double> taus;
  std::vector<ReportRow> rows;

  /// Aggregate row of a method, or nullptr.
  const ReportRow* median(const std::string& method) const;
  std::string to_csv() const;
  std::string to_text() const;
};

/// Everything one (method, variant, seed) cell produced.
struct RunOutcome {
  SdlModel model;
  TrainHistory history;
  std::vector<RecoveryReport> recovery;  // one per tau
  LossBreakdown final_loss;
};

/// Bench plus held-out evaluation samples drawn from the same dictionaries.
struct BenchPair {
  BenchDataset train;
  Matrix eval_inputs;
  Matrix eval_targets;
};

BenchPair make_bench(const BenchConfig& cfg, Index eval_samples);

RunOutcome run_cell(const ExperimentConfig& cfg, const MethodSpec& method, bool anchored,
                    std::uint64_t seed, const BenchPair& bench);

using ProgressFn = std::function<void(const std::string& line)>;

/// Every method (and its anchored twin when cfg.paired) on every seed.
/// Cells run on up to `threads` workers. Rows are grouped by cell in method
/// order (plain before anchored); each group lists its seeds in ascending
/// order and ends with the median row.
ReportTable run_experiment(const ExperimentConfig& cfg, int threads = 1,
                           const ProgressFn& progress = {});

std::vector<std::string> preset_names();

/// One config per table; throws ValidationError for unknown names.
std::vector<ExperimentConfig> preset(const std::string& name);

}  // namespace lrb
