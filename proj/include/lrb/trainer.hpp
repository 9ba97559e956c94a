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
#include <optional>
#include <vector>

#include "lrb/bench.hpp"
#include "lrb/losses.hpp"
#include "lrb/sdl.hpp"

namespace lrb {

struct TrainConfig {
  int steps = 1000;
  Index batch_size = 256;
  double lr = 1e-3;
  double decay_start = 1.0;  // fraction of steps after which lr decays linearly to 0
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  int dead_window = 1000;
  std::vector<int> resample_at;
  double resample_scale = 0.2;
  std::optional<double> grad_clip;
  int eval_every = 100;

  void validate() const;
};

struct TrainRecord {
  int step = 0;
  LossBreakdown loss;
  double mean_l0 = 0.0;
  Index dead_count = 0;
};

struct TrainHistory {
  std::vector<TrainRecord> records;
  std::vector<double> step_mse;  // batch MSE at every step
  std::vector<Index> resampled;  // neurons reinitialized over the run
};

/// Adam first / second moments for every trainable tensor.
struct AdamState {
  Matrix m_e, v_e, m_d, v_d;
  Vector m_theta, v_theta;
  std::optional<Matrix> m_aux, v_aux;
  long long t = 0;

  static AdamState zeros_like(const SdlModel& model);
};

/// Analytic gradients of the configured loss on one batch.
Gradients gradients(const SdlModel& model, const Matrix& inputs, const Matrix& targets,
                    const LossConfig& cfg, const LossContext& ctx = {});

struct ResampleResult {
  std::vector<Index> resampled;
  bool all_residuals_zero = false;
};

/// Reinitializes each dead neuron toward the residual of a sample drawn with
/// probability proportional to its squared reconstruction error. The encoder
/// row becomes resample_scale times the unit residual (the unit input when
/// n_p != n_r), the decoder column the unit residual, and the neuron's Adam
/// moments are zeroed. Other neurons are untouched.
ResampleResult resample_dead_neurons(SdlModel& model, AdamState* optimizer, const Matrix& inputs,
                                     const Matrix& targets, std::span<const Index> dead,
                                     const TrainConfig& cfg, Rng& rng);

struct TrainResult {
  SdlModel model;
  TrainHistory history;
  AdamState optimizer;
};

/// Raised when the loss turns non-finite; carries the last finite state.
class Divergence : public RuntimeFailure {
 public:
  Divergence(const std::string& what, TrainResult last_good)
      : RuntimeFailure(what), last_good_(std::move(last_good)) {}
  const TrainResult& last_good() const { return last_good_; }

 private:
  TrainResult last_good_;
};

using StepObserver = std::function<void(int step, const SdlModel&)>;

/// Adam on minibatches drawn from a per-epoch shuffle seeded by cfg.seed.
/// Deterministic for fixed inputs; single threaded.
TrainResult train(SdlModel model, const Matrix& inputs, const Matrix& targets,
                  const LossConfig& loss_cfg, const TrainConfig& cfg,
                  const StepObserver& observer = {});

TrainResult train(SdlModel model, const BenchDataset& data, const LossConfig& loss_cfg,
                  const TrainConfig& cfg, const StepObserver& observer = {});

}  // namespace lrb
