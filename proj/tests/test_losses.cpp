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

#include <string>

#include "doctest.h"
#include "lrb/losses.hpp"
#include "lrb/trainer.hpp"
#include "fd_cases.hpp"
#include "test_support.hpp"

using namespace lrb;
using namespace lrb::testing;

TEST_CASE("loss value matches the reference objective for every term") {
  for (Term term : {Term::mse, Term::l1, Term::l0, Term::aux, Term::matryoshka, Term::anchor}) {
    for (std::uint64_t s = 0; s < 8; ++s) {
      Instance in = make_instance(term, s);
      LossContext ctx{std::span<const char>(in.dead.data(), in.dead.size())};
      const double lib = sdl_loss(in.model, in.x, in.t, in.cfg, ctx).total;
      const double ref = ref_loss(in.model, in.x, in.t, in.cfg, in.dead);
      CAPTURE(term_name(term));
      CAPTURE(s);
      CHECK(lib == doctest::Approx(ref).epsilon(1e-12));
    }
  }
}

TEST_CASE("analytic gradients agree with central differences") {
  for (Term term : {Term::mse, Term::l1, Term::l0, Term::aux, Term::matryoshka, Term::anchor}) {
    int checked = 0;
    for (std::uint64_t s = 0; checked < 20 && s < 200; ++s) {
      Instance in = make_instance(term, s);
      const FdOutcome r = check_instance(in);
      if (!r.smooth) continue;  // a perturbation changed the active set
      ++checked;
      CAPTURE(term_name(term));
      CAPTURE(s);
      CHECK(r.err_e <= 1e-4);
      CHECK(r.err_d <= 1e-4);
      CHECK(r.err_aux <= 1e-4);
    }
    CHECK(checked == 20);
  }
}

TEST_CASE("jumprelu threshold gradient follows the rectangle-kernel estimator") {
  // One sample, one neuron, pre-activation inside the kernel window.
  SdlModel m;
  m.kind = ModelKind::sae;
  m.w_e = Matrix::Constant(1, 1, 1.0);
  m.w_d = Matrix::Constant(1, 1, 2.0);
  m.activation = Activation::jumprelu(1, 0.5);
  const Matrix x = Matrix::Constant(1, 1, 0.5004);
  const Matrix t = Matrix::Constant(1, 1, 0.3);
  LossConfig cfg;
  cfg.l0 = L0Penalty{0.1, 0.002};
  const Gradients g = gradients(m, x, t, cfg);
  // z = 0.5004 active; dL/dq = 2 (2z - t) * 2; theta grad = -(dL/dq) z / bw - lambda / bw
  const double z = 0.5004;
  const double dq = 2.0 * (2.0 * z - 0.3) * 2.0;
  CHECK(g.theta[0] == doctest::Approx(-dq * z / 0.002 - 0.1 / 0.002).epsilon(1e-12));

  // Outside the window the threshold receives nothing.
  const Matrix far = Matrix::Constant(1, 1, 0.9);
  CHECK(gradients(m, far, t, cfg).theta[0] == 0.0);
}

TEST_CASE("closed-form feature weights") {
  BenchConfig cfg;
  cfg.n = 3;
  cfg.sparsity = 0.5;
  cfg.c_min = 0.5;
  cfg.beta = 1.0;
  // (1 - S) S^(n-1) (beta^2 + (c_min + beta)^2) = 0.5 * 0.25 * 3.25
  const FeatureWeights w = compute_m_d(cfg);
  REQUIRE(w.m_d.size() == 3);
  CHECK(w.m_d[0] == doctest::Approx(0.40625).epsilon(1e-14));
  CHECK_FALSE(w.degenerate);

  cfg.sparsity = 1.0;
  const FeatureWeights dead = compute_m_d(cfg);
  CHECK(dead.degenerate);
  CHECK(dead.m_d.isZero());
}

TEST_CASE("Monte Carlo feature weights converge to the closed form") {
  BenchConfig cfg;
  cfg.n = 4;
  cfg.sparsity = 0.6;
  const FeatureWeights exact = compute_m_d(cfg);
  const FeatureWeights mc = estimate_m_d(cfg, 400000, 5);
  for (Index d = 0; d < 4; ++d) CHECK(mc.m_d[d] == doctest::Approx(exact.m_d[d]).epsilon(0.03));
}

TEST_CASE("approximate loss equals the weighted per-feature residual sum") {
  Rng rng = make_rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const Index n = 5, n_p = 4, n_q = 7, n_r = 3;
    SdlModel m;
    m.kind = ModelKind::transcoder;
    m.w_e = random_matrix(n_q, n_p, rng);
    m.w_d = random_matrix(n_r, n_q, rng);
    m.activation = trial % 2 ? Activation::topk(2) : Activation::relu();
    FeatureMatrix w_p{unit_columns(n_p, n, rng)};
    FeatureMatrix w_r{unit_columns(n_r, n, rng), MatrixRole::target};
    FeatureWeights wts;
    wts.m_d = Vector::NullaryExpr(n, [&](Index) { return uniform(rng, 0.1, 1.0); });
    double ref = 0.0;
    for (Index d = 0; d < n; ++d) {
      const Matrix pre = ref_pre(m.w_e, w_p.data.col(d).transpose());
      const Matrix z = ref_activation(m.activation, pre);
      ref += wts.m_d[d] * sq_err(z, m.w_d, w_r.data.col(d).transpose());
    }
    CHECK(approx_loss(m, w_p, w_r, wts) == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("loss configuration validation") {
  SdlModel m = init_model(4, 6, 4, Activation::relu(), ModelKind::sae, 0);
  LossConfig cfg;
  cfg.matryoshka = MatryoshkaLoss{{1, 2}, {}};
  CHECK_THROWS_AS(cfg.validate(m), ValidationError);  // relu has no k
  m.activation = Activation::topk(2);
  CHECK_NOTHROW(cfg.validate(m));
  cfg.matryoshka = MatryoshkaLoss{{2, 2}, {}};
  CHECK_THROWS_AS(cfg.validate(m), ValidationError);
  cfg.matryoshka.reset();
  cfg.aux = AuxLoss{1, 0.1, true};
  CHECK_THROWS_AS(cfg.validate(m), ValidationError);  // no separate decoder
  cfg.aux.reset();
  cfg.anchoring = AnchorLoss{2, 1.0, Matrix::Zero(2, 3), Matrix::Zero(4, 2)};
  CHECK_THROWS_AS(cfg.validate(m), DimensionMismatch);
}

TEST_CASE("gap estimator rejects short grids") {
  const FeatureMatrix w{Matrix::Identity(3, 3)};
  SdlModel m;
  m.w_e = Matrix::Identity(3, 3);
  m.w_d = Matrix::Identity(3, 3);
  m.activation = Activation::jump(0.0);
  BenchConfig base;
  base.n = 3;
  const std::vector<double> two{0.99, 0.999};
  CHECK_THROWS_AS(approximation_gap(m, w, w, base, two, 100, 0), ValidationError);
}

TEST_CASE("gap is zero for an orthogonal identity model") {
  // With orthonormal features and the identity model every sample is
  // reconstructed exactly, so both the approximate and exact losses vanish.
  const FeatureMatrix w{Matrix::Identity(4, 4)};
  SdlModel m;
  m.w_e = Matrix::Identity(4, 4);
  m.w_d = Matrix::Identity(4, 4);
  m.activation = Activation::jump(0.0);
  BenchConfig base;
  base.n = 4;
  base.n_p = base.n_r = 4;
  const std::vector<double> grid{0.9, 0.95, 0.99};
  const GapReport g = approximation_gap(m, w, w, base, grid, 20000, 3);
  for (const auto& p : g.points) {
    CHECK(std::abs(p.gap) <= 1e-12);
    CHECK(std::abs(p.approx) <= 1e-12);
  }
}
