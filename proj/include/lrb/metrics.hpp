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

#include <span>
#include <string>
#include <vector>

#include "lrb/bench.hpp"
#include "lrb/sdl.hpp"

namespace lrb {

struct Similarity {
  Matrix values;                  // n_q x n, |cos| between learned and true directions
  std::vector<Index> zero_columns;  // learned directions with zero norm (rows left at 0)
};

/// Normalizes each learned column (n_p x n_q) and returns |W_learned^T W_true|.
Similarity similarity_matrix(const Matrix& learned, const FeatureMatrix& truth);

struct RecoveryReport {
  double gt_recovery = 0.0;        // fraction of s_i > tau
  double max_inner_product = 0.0;  // mean of s_i
  Vector per_feature_best;
  std::vector<Index> best_match_index;
  double mean_l0 = 0.0;
  Index dead_count = 0;
  double tau = 0.9;
};

/// s_i = column max of sim; L0 and dead neurons from the evaluation latents.
RecoveryReport recovery_metrics(const Matrix& sim, double tau, const LatentBatch& latents);

/// Encoder rows as learned directions, latents from a forward pass on `inputs`.
RecoveryReport evaluate_model(const SdlModel& model, const FeatureMatrix& truth,
                              const Matrix& inputs, double tau);

/// One forward pass shared across several thresholds.
std::vector<RecoveryReport> evaluate_model(const SdlModel& model, const FeatureMatrix& truth,
                                           const Matrix& inputs, std::span<const double> taus);

enum class AnchorSource { ground_truth, subpopulation };

struct AnchorSet {
  Matrix anchor_p;  // k x n_p
  Matrix anchor_r;  // n_r x k
  AnchorSource source = AnchorSource::ground_truth;
  std::vector<Index> indices;        // feature indices or class labels, in anchor order
  std::vector<Index> skipped;        // classes dropped for a zero-norm mean
  Index count() const { return anchor_p.rows(); }
};

/// Uniform random k-subset of the features, in ascending index order.
AnchorSet gt_anchors(const FeatureMatrix& w_p, const FeatureMatrix& w_r, Index k,
                     std::uint64_t seed);

/// Normalized per-class mean rows; anchor_r is anchor_p transposed, for
/// self-reconstruction. Classes are visited in ascending label order.
AnchorSet subpopulation_anchors(const Matrix& embeddings, const std::vector<Index>& labels);

/// One integer label per non-empty line.
std::vector<Index> read_labels(const std::string& path);

}  // namespace lrb
