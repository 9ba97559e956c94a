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

#include "lrb/common.hpp"

namespace lrb {

/// Sparsity activation. Every variant returns, per coordinate, either 0 or
/// the untouched pre-activation value.
struct Activation {
  enum class Kind { relu, jumprelu, topk, batch_topk, jump };

  Kind kind = Kind::relu;
  Vector theta;              // jumprelu: per-neuron thresholds (>= 0)
  Index k = 1;               // topk / batch_topk: kept count (per sample for batch_topk)
  bool compose_relu = true;  // topk / batch_topk: only positive entries may be kept
  double c = 0.0;            // jump: scalar threshold (>= 0)

  static Activation relu();
  static Activation jumprelu(Index n_q, double theta0 = 0.001);
  static Activation topk(Index k, bool compose_relu = true);
  static Activation batch_topk(Index k, bool compose_relu = true);
  static Activation jump(double c = 0.0);

  bool is_topk_family() const { return kind == Kind::topk || kind == Kind::batch_topk; }
  void validate(Index n_q) const;
  std::string name() const;
};

std::string to_string(Activation::Kind kind);
Activation::Kind activation_kind_from_string(const std::string& s);

enum class ModelKind { sae, transcoder, crosscoder };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

/// Bias-free encoder / activation / decoder.
struct SdlModel {
  Matrix w_e;  // n_q x n_p
  Matrix w_d;  // n_r x n_q
  Activation activation;
  ModelKind kind = ModelKind::sae;
  int sources = 1;                 // crosscoder source count
  std::vector<Index> block_dims;   // crosscoder per-source input dims
  std::optional<Matrix> w_d_aux;   // separate auxiliary decoder, when enabled

  Index n_q() const { return w_e.rows(); }
  Index n_p() const { return w_e.cols(); }
  Index n_r() const { return w_d.rows(); }
  void validate() const;
};

/// Post-activation latents with per-row supports (indices of nonzeros).
struct LatentBatch {
  RowMatrix values;  // batch x n_q
  std::vector<std::vector<Index>> support;

  double mean_l0() const;
  Index total_active() const;
};

LatentBatch apply_activation(const Activation& act, const RowMatrix& pre);
LatentBatch apply_activation(const Activation& act, const Matrix& pre);

struct ForwardResult {
  RowMatrix pre;  // batch x n_q
  LatentBatch latents;
  Matrix reconstruction;  // batch x n_r
};

ForwardResult forward(const SdlModel& model, const Matrix& inputs);

/// Encoder rows i.i.d. normal scaled to norm 1/sqrt(n_p); decoder = encoder^T
/// when n_r == n_p, otherwise columns drawn the same way with norm 1/sqrt(n_r).
/// Crosscoders split the stacked input into `sources` equal blocks.
SdlModel init_model(Index n_p, Index n_q, Index n_r, const Activation& act, ModelKind kind,
                    std::uint64_t seed, int sources = 1);

}  // namespace lrb
