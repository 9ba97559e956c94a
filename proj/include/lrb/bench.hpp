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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lrb/common.hpp"

namespace lrb {

enum class PairingMode { sae, transcoder, crosscoder };

std::string to_string(PairingMode mode);
PairingMode pairing_from_string(const std::string& s);

/// Parameters of the Linear Representation Bench. For crosscoder pairing,
/// `n_p` is the per-source block dimension and the stacked input has
/// `sources * n_p` rows.
struct BenchConfig {
  Index n = 1000;
  Index n_p = 768;
  Index n_r = 768;
  Index n_samples = 100000;
  double sparsity = 0.99;
  double max_interference = 0.1;
  double c_min = 0.5;
  double beta = 1.0;
  double eps_tol = 0.01;
  double reg_lambda = 0.01;
  double step_eta = 0.1;
  int max_iters = 20000;
  std::uint64_t seed = 0;
  PairingMode pairing = PairingMode::sae;
  int sources = 2;

  void validate() const;
  Index input_dim() const;
  Index target_dim() const;
};

enum class MatrixRole { input, target };

/// Ground-truth dictionary: columns are feature directions. Columns have
/// norm `column_norm` (1 for a single source, sqrt(m) for m stacked
/// crosscoder blocks of unit-norm columns).
struct FeatureMatrix {
  Matrix data;
  MatrixRole role = MatrixRole::input;
  double column_norm = 1.0;

  Index dim() const { return data.rows(); }
  Index count() const { return data.cols(); }
  auto column(Index d) const { return data.col(d); }
};

/// Largest off-diagonal Gram entry max_{i != j} <col_i, col_j>, computed from
/// the full Gram matrix. Returns -inf for fewer than two columns.
double max_interference(const Matrix& columns);

/// N x n non-negative ground-truth coefficients, one sample per row.
struct FeatureBatch {
  Matrix coeffs;
};

struct BenchDataset {
  Matrix inputs;   // N x input_dim
  Matrix targets;  // N x target_dim
  FeatureMatrix w_p;
  FeatureMatrix w_r;
  FeatureBatch coeffs;
  BenchConfig config;
  double achieved_interference_p = 0.0;
  double achieved_interference_r = 0.0;
};

struct HierarchySpec {
  std::vector<Index> parents;
  std::vector<std::vector<Index>> children;

  void validate(Index n) const;
};

/// dim x n matrix of i.i.d. standard normals with unit-norm columns.
FeatureMatrix init_feature_matrix(Index dim, Index n, std::uint64_t seed,
                                  MatrixRole role = MatrixRole::input);

struct InterferenceResult {
  FeatureMatrix matrix;
  double achieved = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Thrown when projected descent cannot reach the interference bound.
class NonConvergence : public RuntimeFailure {
 public:
  NonConvergence(double achieved, double target, int iters);
  double achieved() const { return achieved_; }
  double target() const { return target_; }

 private:
  double achieved_;
  double target_;
};

/// Interference loss: hinge above (M - eps) plus lambda-weighted penalty on
/// positive dot products, summed over ordered pairs i != j.
double interference_loss(const Matrix& w, double bound, double eps, double lambda);
Matrix interference_gradient(const Matrix& w, double bound, double eps, double lambda);

/// Projected gradient descent on the interference loss with column
/// renormalization after every step. Never throws on non-convergence.
InterferenceResult run_interference_descent(FeatureMatrix w, const BenchConfig& cfg);

/// As run_interference_descent, but throws NonConvergence when the bound is
/// not met within cfg.max_iters.
InterferenceResult minimize_interference(FeatureMatrix w, const BenchConfig& cfg);

/// Mask ~ Bernoulli(1 - S) times (c_min + Exp(beta)); rows are generated in
/// blocks whose RNG streams derive from (seed, block index).
FeatureBatch sample_features(const BenchConfig& cfg);

/// As sample_features, then each parent coefficient is replaced by a fresh
/// magnitude draw when any of its children is active, else 0.
FeatureBatch sample_hierarchical(const BenchConfig& cfg, const HierarchySpec& spec);

/// input row i = W_p x_i, target row i = W_r x_i.
BenchDataset synthesize(const FeatureMatrix& w_p, const FeatureMatrix& w_r,
                        const FeatureBatch& coeffs);

/// Full pipeline: feature matrices for the pairing mode, coefficients and
/// synthesized representations.
BenchDataset generate_bench(const BenchConfig& cfg);

inline constexpr std::uint64_t kStreamWp = 1;
inline constexpr std::uint64_t kStreamWr = 2;
inline constexpr std::uint64_t kStreamCoeffs = 3;
inline constexpr std::uint64_t kStreamSources = 16;

}  // namespace lrb
