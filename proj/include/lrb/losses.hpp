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
#include <span>
#include <vector>

#include "lrb/bench.hpp"
#include "lrb/sdl.hpp"

namespace lrb {

struct L1Penalty {
  double lambda = 0.0;
};

/// L0 penalty on active latents. The reported value is the exact count; the
/// threshold gradient uses a rectangle-kernel straight-through estimator of
/// width `bandwidth`.
struct L0Penalty {
  double lambda = 0.0;
  double bandwidth = 0.001;
};

/// Reconstruction of the main residual from the top-k_aux dead latents.
struct AuxLoss {
  Index k_aux = 1;
  double lambda = 0.0;
  bool separate_decoder = false;  // use model.w_d_aux instead of the shared decoder
};

/// Extra reconstruction terms at several TopK levels.
struct MatryoshkaLoss {
  std::vector<Index> k_levels;
  std::vector<double> level_weights;  // empty -> uniform 1/m
};

/// Penalty pulling the first k encoder rows / decoder columns to anchors.
struct AnchorLoss {
  Index k_anchors = 0;
  double lambda = 0.0;
  Matrix anchor_p;  // k x n_p, one anchor per row
  Matrix anchor_r;  // n_r x k, one anchor per column
};

struct LossConfig {
  std::optional<L1Penalty> l1;
  std::optional<L0Penalty> l0;
  std::optional<AuxLoss> aux;
  std::optional<MatryoshkaLoss> matryoshka;
  std::optional<AnchorLoss> anchoring;

  void validate(const SdlModel& model) const;
  std::vector<double> matryoshka_weights() const;
};

struct LossBreakdown {
  double mse = 0.0;
  double l1 = 0.0;
  double l0 = 0.0;  // lambda_l0 * exact mean active count
  double aux = 0.0;
  double matryoshka = 0.0;
  double anchor = 0.0;
  double total = 0.0;
  double mean_l0 = 0.0;  // exact mean active count per sample
};

/// Training-time state some terms depend on: which latents count as dead.
struct LossContext {
  std::span<const char> dead;  // length n_q, nonzero = dead; empty = none dead
};

struct Gradients {
  Matrix w_e;
  Matrix w_d;
  Vector theta;                 // jumprelu thresholds, else empty
  std::optional<Matrix> w_d_aux;
};

/// Batch-mean objective and its breakdown.
LossBreakdown sdl_loss(const SdlModel& model, const Matrix& inputs, const Matrix& targets,
                       const LossConfig& cfg, const LossContext& ctx = {});

namespace detail {

/// Shared evaluation for sdl_loss and the trainer's gradients(). The active
/// set of every activation is treated as locally constant. When `fired` is
/// given it receives, per latent, whether it was active on any batch row.
LossBreakdown evaluate(const SdlModel& model, const Matrix& inputs, const Matrix& targets,
                       const LossConfig& cfg, const LossContext& ctx, Gradients* grads,
                       std::vector<char>* fired = nullptr);

}  // namespace detail

/// Per-feature weights M_d of the approximate loss.
struct FeatureWeights {
  Vector m_d;
  bool degenerate = false;  // S = 1: every weight is zero
};

/// Closed form for the bench distribution:
/// M_d = (1 - S) S^(n-1) (beta^2 + (c_min + beta)^2).
FeatureWeights compute_m_d(const BenchConfig& cfg);

/// Monte Carlo estimate of M_d = Pr(x = x_d e_d) E[x_d^2 | x_d > 0].
FeatureWeights estimate_m_d(const BenchConfig& cfg, Index samples, std::uint64_t seed);

/// sigma(W_E w_p^d) for every feature d, each evaluated in isolation;
/// column d of the result is the latent vector for feature d.
Matrix isolated_latents(const SdlModel& model, const Matrix& w_p);

/// Per-feature residual norms ||w_r^d - W_D sigma(W_E w_p^d)||.
Vector feature_residual_norms(const SdlModel& model, const FeatureMatrix& w_p,
                              const FeatureMatrix& w_r);

/// sum_d M_d ||w_r^d - W_D sigma(W_E w_p^d)||^2.
double approx_loss(const SdlModel& model, const FeatureMatrix& w_p, const FeatureMatrix& w_r,
                   const FeatureWeights& weights);

struct GapPoint {
  double sparsity = 0.0;
  double approx = 0.0;      // approximate loss at this S
  double exact = 0.0;       // Monte Carlo estimate of the exact expected loss
  double gap = 0.0;         // E[loss; >= 2 active], an unbiased estimate of exact - approx
  double gap_stderr = 0.0;
  double naive_gap = 0.0;   // plain Monte Carlo mean minus the closed-form approx loss
  Index multi_active = 0;   // samples with >= 2 active features
};

struct GapReport {
  std::vector<GapPoint> points;
  std::optional<double> slope;  // d log|gap| / d log(1 - S)
  bool below_noise_floor = false;
};

/// Estimates L_SDL - approx_loss over a sparsity grid using common random
/// numbers across S, then fits the log-log slope against (1 - S).
GapReport approximation_gap(const SdlModel& model, const FeatureMatrix& w_p,
                            const FeatureMatrix& w_r, const BenchConfig& base,
                            std::span<const double> sparsities, Index samples,
                            std::uint64_t seed);

}  // namespace lrb
