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

#include <cmath>

#include "doctest.h"
#include "lrb/bench.hpp"
#include "lrb/trainer.hpp"
#include "test_support.hpp"

using namespace lrb;
using namespace lrb::testing;

namespace {

BenchDataset small_bench(std::uint64_t seed) {
  BenchConfig cfg;
  cfg.n = 12;
  cfg.n_p = 8;
  cfg.n_r = 8;
  cfg.n_samples = 800;
  cfg.sparsity = 0.8;
  cfg.max_interference = 0.5;
  cfg.seed = seed;
  return generate_bench(cfg);
}

TrainConfig quick(int steps) {
  TrainConfig t;
  t.steps = steps;
  t.batch_size = 32;
  t.lr = 5e-3;
  t.eval_every = 0;
  return t;
}

}  // namespace

TEST_CASE("training is deterministic for a fixed seed") {
  const BenchDataset data = small_bench(1);
  const SdlModel init = init_model(8, 24, 8, Activation::topk(3), ModelKind::sae, 4);
  TrainConfig cfg = quick(60);
  const TrainResult a = train(init, data, {}, cfg);
  const TrainResult b = train(init, data, {}, cfg);
  CHECK(a.model.w_e == b.model.w_e);
  CHECK(a.model.w_d == b.model.w_d);
  CHECK(a.history.step_mse == b.history.step_mse);
  cfg.seed = 9;
  CHECK(train(init, data, {}, cfg).model.w_e != a.model.w_e);
}

TEST_CASE("first Adam step moves each weight by lr times the gradient sign") {
  Rng rng = make_rng(2);
  const Matrix x = random_matrix(10, 5, rng);
  const Matrix y = random_matrix(10, 4, rng);
  const SdlModel init = init_model(5, 7, 4, Activation::relu(), ModelKind::transcoder, 3);
  LossConfig loss;
  loss.l1 = L1Penalty{0.05};
  TrainConfig cfg = quick(1);
  cfg.batch_size = 10;  // full batch
  const Gradients g = gradients(init, x, y, loss);
  const TrainResult r = train(init, x, y, loss, cfg);

  auto expected = [&](const Matrix& p, const Matrix& grad) {
    Matrix out = p;
    for (Index j = 0; j < p.cols(); ++j) {
      for (Index i = 0; i < p.rows(); ++i) {
        const double gi = grad(i, j);
        out(i, j) -= cfg.lr * gi / (std::abs(gi) + cfg.adam_eps);
      }
    }
    return out;
  };
  CHECK((r.model.w_e - expected(init.w_e, g.w_e)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((r.model.w_d - expected(init.w_d, g.w_d)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(r.optimizer.t == 1);
}

TEST_CASE("gradient clipping rescales to the configured norm") {
  Rng rng = make_rng(3);
  const Matrix x = random_matrix(6, 4, rng);
  const SdlModel init = init_model(4, 6, 4, Activation::relu(), ModelKind::sae, 5);
  TrainConfig cfg = quick(1);
  cfg.batch_size = 6;
  cfg.adam_eps = 1.0;  // makes the step depend on gradient scale
  cfg.grad_clip = 1e-3;
  const Gradients g = gradients(init, x, x, {});
  const double norm = std::sqrt(g.w_e.squaredNorm() + g.w_d.squaredNorm());
  REQUIRE(norm > *cfg.grad_clip);
  const double f = *cfg.grad_clip / norm;
  const Matrix ge = g.w_e * f;
  const Matrix want = init.w_e.array() - cfg.lr * ge.array() / (ge.array().abs() + 1.0);
  const TrainResult r = train(init, x, x, {}, cfg);
  CHECK((r.model.w_e - want).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("loss decreases on a small bench") {
  const BenchDataset data = small_bench(2);
  const SdlModel init = init_model(8, 24, 8, Activation::topk(3), ModelKind::sae, 6);
  const TrainResult r = train(init, data, {}, quick(400));
  auto mean = [](auto b, auto e) {
    double s = 0.0;
    for (auto it = b; it != e; ++it) s += *it;
    return s / static_cast<double>(e - b);
  };
  const auto& h = r.history.step_mse;
  CHECK(mean(h.end() - 50, h.end()) < 0.5 * mean(h.begin(), h.begin() + 50));
  REQUIRE(r.history.records.size() == 1);
  CHECK(r.history.records.back().step == 400);
}

TEST_CASE("jumprelu thresholds stay non-negative") {
  const BenchDataset data = small_bench(3);
  SdlModel init = init_model(8, 24, 8, Activation::jumprelu(24, 0.01), ModelKind::sae, 7);
  LossConfig loss;
  loss.l0 = L0Penalty{0.5, 0.05};
  TrainConfig cfg = quick(100);
  cfg.lr = 5e-2;
  double lowest = INFINITY;
  train(init, data, loss, cfg, [&](int, const SdlModel& m) {
    lowest = std::min(lowest, m.activation.theta.minCoeff());
  });
  CHECK(lowest >= 0.0);
}

TEST_CASE("resampling rewrites only the dead neurons") {
  Rng rng = make_rng(4);
  const Matrix x = random_matrix(20, 6, rng);
  SdlModel m = init_model(6, 5, 6, Activation::relu(), ModelKind::sae, 8);
  const SdlModel before = m;
  AdamState opt = AdamState::zeros_like(m);
  opt.m_e.setConstant(1.0);
  opt.v_e.setConstant(1.0);
  opt.m_d.setConstant(1.0);
  opt.v_d.setConstant(1.0);
  TrainConfig cfg;
  const std::vector<Index> dead{1, 3};
  const ResampleResult rr = resample_dead_neurons(m, &opt, x, x, dead, cfg, rng);
  CHECK(rr.resampled == dead);
  for (Index i = 0; i < 5; ++i) {
    const bool hit = i == 1 || i == 3;
    if (hit) {
      CHECK(m.w_d.col(i).norm() == doctest::Approx(1.0));
      CHECK((m.w_e.row(i).transpose() - cfg.resample_scale * m.w_d.col(i)).norm() <= 1e-12);
      CHECK(opt.m_e.row(i).isZero());
      CHECK(opt.v_d.col(i).isZero());
    } else {
      CHECK(m.w_e.row(i) == before.w_e.row(i));
      CHECK(m.w_d.col(i) == before.w_d.col(i));
      CHECK(opt.m_e(i, 0) == 1.0);
    }
  }
}

TEST_CASE("resampling reports when every residual is zero") {
  Rng rng = make_rng(5);
  SdlModel m = init_model(4, 4, 4, Activation::relu(), ModelKind::sae, 9);
  const Matrix x = random_matrix(8, 4, rng);
  const Matrix y = forward(m, x).reconstruction;
  const std::vector<Index> dead{0};
  const ResampleResult rr = resample_dead_neurons(m, nullptr, x, y, dead, TrainConfig{}, rng);
  CHECK(rr.all_residuals_zero);
  CHECK(rr.resampled.empty());
}

TEST_CASE("divergence carries the last finite state") {
  Rng rng = make_rng(6);
  const Matrix x = random_matrix(16, 4, rng);
  const SdlModel init = init_model(4, 8, 4, Activation::relu(), ModelKind::sae, 10);
  TrainConfig cfg = quick(5);
  cfg.lr = 1e200;
  try {
    train(init, x, x, {}, cfg);
    FAIL("expected Divergence");
  } catch (const Divergence& e) {
    const TrainResult& last = e.last_good();
    CHECK(last.model.w_e.allFinite());
    CHECK(last.model.w_d.allFinite());
    CHECK(last.optimizer.t >= 1);
  }
}

TEST_CASE("trainer validation") {
  Rng rng = make_rng(7);
  const Matrix x = random_matrix(4, 4, rng);
  const SdlModel m = init_model(4, 4, 4, Activation::relu(), ModelKind::sae, 1);
  TrainConfig cfg;
  cfg.lr = 0.0;
  CHECK_THROWS_AS(train(m, x, x, {}, cfg), ValidationError);
  cfg = TrainConfig{};
  cfg.decay_start = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = TrainConfig{};
  cfg.resample_at = {0};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  CHECK_THROWS_AS(train(m, x, random_matrix(4, 3, rng), {}, TrainConfig{}), DimensionMismatch);
  CHECK_THROWS_AS(train(m, Matrix(0, 4), Matrix(0, 4), {}, TrainConfig{}), ValidationError);
}
