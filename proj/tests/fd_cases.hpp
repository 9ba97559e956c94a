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

// Random instances for every loss term and a finite-difference comparison
// against the analytic gradients. Shared by the unit and acceptance tests.

#include <span>
#include <vector>

#include "lrb/losses.hpp"
#include "lrb/trainer.hpp"
#include "test_support.hpp"

namespace lrb::testing {

enum class Term { mse, l1, l0, aux, matryoshka, anchor };

inline const char* term_name(Term t) {
  switch (t) {
    case Term::mse: return "mse";
    case Term::l1: return "l1";
    case Term::l0: return "l0";
    case Term::aux: return "aux";
    case Term::matryoshka: return "matryoshka";
    case Term::anchor: return "anchor";
  }
  return "?";
}

struct Instance {
  SdlModel model;
  Matrix x, t;
  LossConfig cfg;
  std::vector<char> dead;
};

inline Instance make_instance(Term term, std::uint64_t seed) {
  Rng rng = make_rng(seed, 77);
  const Index n_p = 6, n_q = 10, n_r = 5, batch = 8;
  Instance in;
  Activation act;
  switch (seed % 4) {
    case 0: act = Activation::relu(); break;
    case 1: act = Activation::topk(3); break;
    case 2: act = Activation::batch_topk(3); break;
    default:
      act = Activation::jumprelu(n_q);
      for (Index i = 0; i < n_q; ++i) act.theta[i] = uniform(rng, 0.0, 0.3);
  }
  if (term == Term::matryoshka && !act.is_topk_family()) act = Activation::topk(3);
  in.model.activation = act;
  in.model.kind = ModelKind::transcoder;
  in.model.w_e = random_matrix(n_q, n_p, rng, 0.5);
  in.model.w_d = random_matrix(n_r, n_q, rng, 0.5);
  in.x = random_matrix(batch, n_p, rng);
  in.t = random_matrix(batch, n_r, rng);
  switch (term) {
    case Term::mse: break;
    case Term::l1: in.cfg.l1 = L1Penalty{uniform(rng, 0.05, 0.5)}; break;
    case Term::l0: in.cfg.l0 = L0Penalty{uniform(rng, 0.05, 0.5), 0.01}; break;
    case Term::aux: {
      const bool separate = seed % 2 == 1;
      in.cfg.aux = AuxLoss{2, uniform(rng, 0.1, 1.0), separate};
      if (separate) in.model.w_d_aux = random_matrix(n_r, n_q, rng, 0.5);
      in.dead.assign(static_cast<std::size_t>(n_q), 0);
      for (auto& d : in.dead) d = uniform(rng, 0.0, 1.0) < 0.5;
      in.dead[0] = 1;
      break;
    }
    case Term::matryoshka: in.cfg.matryoshka = MatryoshkaLoss{{1, 2}, {0.3, 0.7}}; break;
    case Term::anchor: {
      AnchorLoss a;
      a.k_anchors = 3;
      a.lambda = uniform(rng, 0.1, 2.0);
      a.anchor_p = random_matrix(3, n_p, rng);
      a.anchor_r = random_matrix(n_r, 3, rng);
      in.cfg.anchoring = a;
      break;
    }
  }
  return in;
}

struct FdOutcome {
  double err_e = 0.0;
  double err_d = 0.0;
  double err_aux = 0.0;
  bool smooth = true;
};

inline FdOutcome check_instance(Instance& in) {
  const double h = 1e-6;
  const auto base_sig = ref_signature(in.model, in.x, in.cfg, in.dead);
  bool smooth = true;
  auto f = [&] {
    if (ref_signature(in.model, in.x, in.cfg, in.dead) != base_sig) smooth = false;
    return ref_loss(in.model, in.x, in.t, in.cfg, in.dead);
  };
  std::vector<char> dead_copy = in.dead;
  LossContext ctx{std::span<const char>(dead_copy.data(), dead_copy.size())};
  const Gradients g = gradients(in.model, in.x, in.t, in.cfg, ctx);
  FdOutcome out;
  out.err_e = rel_error(central_fd(in.model.w_e, f, h), g.w_e);
  out.err_d = rel_error(central_fd(in.model.w_d, f, h), g.w_d);
  if (in.model.w_d_aux) out.err_aux = rel_error(central_fd(*in.model.w_d_aux, f, h), *g.w_d_aux);
  out.smooth = smooth;
  return out;
}


}  // namespace lrb::testing
