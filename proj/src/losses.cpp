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

#include "lrb/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace lrb {

void LossConfig::validate(const SdlModel& model) const {
  if (l1) require(l1->lambda >= 0.0, "loss: l1 lambda must be >= 0");
  if (l0) {
    require(l0->lambda >= 0.0, "loss: l0 lambda must be >= 0");
    require(l0->bandwidth > 0.0, "loss: l0 bandwidth must be > 0");
  }
  if (aux) {
    require(aux->lambda >= 0.0, "loss: aux lambda must be >= 0");
    require(aux->k_aux >= 1 && aux->k_aux <= model.n_q(), "loss: k_aux must lie in [1, n_q]");
    if (aux->separate_decoder) {
      require(model.w_d_aux.has_value(), "loss: separate aux decoder requested but model has none");
    }
  }
  if (matryoshka) {
    require(model.activation.is_topk_family(),
            "loss: matryoshka levels require a topk or batch_topk activation");
    require(!matryoshka->k_levels.empty(), "loss: matryoshka needs at least one level");
    for (std::size_t i = 0; i < matryoshka->k_levels.size(); ++i) {
      const Index k = matryoshka->k_levels[i];
      require(k >= 1 && k <= model.n_q(), "loss: matryoshka level k must lie in [1, n_q]");
      if (i > 0) require(k > matryoshka->k_levels[i - 1], "loss: matryoshka k_levels must be strictly increasing");
    }
    if (!matryoshka->level_weights.empty()) {
      require(matryoshka->level_weights.size() == matryoshka->k_levels.size(),
              "loss: matryoshka weights and levels differ in length");
      for (double w : matryoshka->level_weights) require(w >= 0.0, "loss: matryoshka weights must be >= 0");
    }
  }
  if (anchoring) {
    const auto& a = *anchoring;
    require(a.lambda >= 0.0, "loss: anchor lambda must be >= 0");
    require(a.k_anchors >= 0, "loss: k_anchors must be >= 0");
    require(a.k_anchors <= model.n_q(), "loss: k_anchors must not exceed n_q");
    if (a.k_anchors > 0) {
      require_dims(a.anchor_p.rows() == a.k_anchors && a.anchor_p.cols() == model.n_p(),
                   "loss: anchor_p must be k x n_p");
      require_dims(a.anchor_r.rows() == model.n_r() && a.anchor_r.cols() == a.k_anchors,
                   "loss: anchor_r must be n_r x k");
    }
  }
}

std::vector<double> LossConfig::matryoshka_weights() const {
  if (!matryoshka) return {};
  if (!matryoshka->level_weights.empty()) return matryoshka->level_weights;
  const auto m = matryoshka->k_levels.size();
  return std::vector<double>(m, 1.0 / static_cast<double>(m));
}

namespace {

constexpr double kSparseDensity = 0.1;

bool is_sparse(const LatentBatch& lat) {
  const double cells = static_cast<double>(lat.values.size());
  return cells > 0 && static_cast<double>(lat.total_active()) < kSparseDensity * cells;
}

Matrix decode(const LatentBatch& lat, const Matrix& w_d) {
  if (!is_sparse(lat)) return lat.values * w_d.transpose();
  Matrix out = Matrix::Zero(lat.values.rows(), w_d.rows());
  for (Index b = 0; b < lat.values.rows(); ++b) {
    for (Index i : lat.support[static_cast<std::size_t>(b)]) {
      out.row(b) += lat.values(b, i) * w_d.col(i).transpose();
    }
  }
  return out;
}

// Given dL/dR (batch x n_r) for R = Q W_D^T, accumulates dL/dW_D into d_dec
// and dL/dZ (restricted to the latents' support) into d_pre.
void backprop_decoder(const LatentBatch& lat, const Matrix& d_recon, const Matrix& w_d,
                      Matrix& d_dec, RowMatrix& d_pre) {
  if (!is_sparse(lat)) {
    d_dec.noalias() += d_recon.transpose() * lat.values;
    const RowMatrix dq = d_recon * w_d;
    for (Index b = 0; b < lat.values.rows(); ++b) {
      for (Index i : lat.support[static_cast<std::size_t>(b)]) d_pre(b, i) += dq(b, i);
    }
    return;
  }
  for (Index b = 0; b < lat.values.rows(); ++b) {
    for (Index i : lat.support[static_cast<std::size_t>(b)]) {
      d_dec.col(i) += lat.values(b, i) * d_recon.row(b).transpose();
      d_pre(b, i) += d_recon.row(b).dot(w_d.col(i));
    }
  }
}

// Top-k_aux selection restricted to dead latents.
LatentBatch aux_latents(const RowMatrix& pre, std::span<const char> dead, Index k_aux) {
  RowMatrix masked = pre;
  for (Index i = 0; i < pre.cols(); ++i) {
    if (!dead[static_cast<std::size_t>(i)]) masked.col(i).setConstant(-std::numeric_limits<double>::infinity());
  }
  LatentBatch lat = apply_activation(Activation::topk(std::min<Index>(k_aux, pre.cols()), true), masked);
  return lat;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

namespace detail {

LossBreakdown evaluate(const SdlModel& model, const Matrix& inputs, const Matrix& targets,
                       const LossConfig& cfg, const LossContext& ctx, Gradients* grads,
                       std::vector<char>* fired) {
  model.validate();
  cfg.validate(model);
  require_dims(inputs.cols() == model.n_p(), "loss: input width must equal n_p");
  require_dims(targets.cols() == model.n_r(), "loss: target width must equal n_r");
  require_dims(inputs.rows() == targets.rows(), "loss: inputs and targets differ in row count");
  require(inputs.rows() >= 1, "loss: empty batch");
  if (!ctx.dead.empty()) {
    require_dims(static_cast<Index>(ctx.dead.size()) == model.n_q(), "loss: dead mask length != n_q");
  }

  const Index batch = inputs.rows();
  const double inv_b = 1.0 / static_cast<double>(batch);
  const Activation& act = model.activation;

  LossBreakdown out;
  RowMatrix pre;
  pre.noalias() = inputs * model.w_e.transpose();
  const LatentBatch lat = apply_activation(act, pre);
  const Matrix recon = decode(lat, model.w_d);
  const Matrix err = recon - targets;
  out.mse = err.squaredNorm() * inv_b;
  out.mean_l0 = lat.mean_l0();
  if (fired) {
    fired->assign(static_cast<std::size_t>(model.n_q()), 0);
    for (const auto& row : lat.support) {
      for (Index i : row) (*fired)[static_cast<std::size_t>(i)] = 1;
    }
  }

  RowMatrix d_pre;
  if (grads) {
    grads->w_e.setZero(model.n_q(), model.n_p());
    grads->w_d.setZero(model.n_r(), model.n_q());
    grads->theta.setZero(act.kind == Activation::Kind::jumprelu ? model.n_q() : 0);
    grads->w_d_aux.reset();
    if (cfg.aux && cfg.aux->separate_decoder) grads->w_d_aux = Matrix::Zero(model.n_r(), model.n_q());
    d_pre.setZero(batch, model.n_q());
    backprop_decoder(lat, (2.0 * inv_b) * err, model.w_d, grads->w_d, d_pre);
  }

  if (cfg.l1) {
    double sum = 0.0;
    for (Index b = 0; b < batch; ++b) {
      for (Index i : lat.support[static_cast<std::size_t>(b)]) {
        const double q = lat.values(b, i);
        sum += std::abs(q);
        if (grads) d_pre(b, i) += cfg.l1->lambda * inv_b * (q > 0.0 ? 1.0 : -1.0);
      }
    }
    out.l1 = cfg.l1->lambda * sum * inv_b;
  }

  if (cfg.l0) out.l0 = cfg.l0->lambda * out.mean_l0;

  // Threshold gradients for jumprelu: straight-through estimates that use the
  // derivative of a rectangle-smoothed Heaviside in theta only.
  if (grads && act.kind == Activation::Kind::jumprelu) {
    const double bw = cfg.l0 ? cfg.l0->bandwidth : L0Penalty{}.bandwidth;
    const double half = 0.5 * bw;
    const RowMatrix dq_recon = (2.0 * inv_b) * (err * model.w_d);
    for (Index b = 0; b < batch; ++b) {
      for (Index i = 0; i < model.n_q(); ++i) {
        const double z = pre(b, i);
        if (std::abs(z - act.theta[i]) >= half) continue;
        double g = dq_recon(b, i);
        if (cfg.l1) g += cfg.l1->lambda * inv_b * (z > 0.0 ? 1.0 : -1.0);
        grads->theta[i] -= g * z / bw;
        if (cfg.l0) grads->theta[i] -= cfg.l0->lambda * inv_b / bw;
      }
    }
  }

  std::optional<LatentBatch> aux_lat;
  if (cfg.aux && cfg.aux->lambda > 0.0 && !ctx.dead.empty()) {
    const bool any_dead = std::any_of(ctx.dead.begin(), ctx.dead.end(), [](char c) { return c != 0; });
    if (any_dead) {
      const Matrix& dec_aux = cfg.aux->separate_decoder ? *model.w_d_aux : model.w_d;
      aux_lat = aux_latents(pre, ctx.dead, cfg.aux->k_aux);
      const LatentBatch& alat = *aux_lat;
      // U = (T - R) - A W'^T
      const Matrix u = -err - decode(alat, dec_aux);
      out.aux = cfg.aux->lambda * u.squaredNorm() * inv_b;
      if (grads) {
        const Matrix p = (-2.0 * cfg.aux->lambda * inv_b) * u;
        backprop_decoder(lat, p, model.w_d, grads->w_d, d_pre);
        Matrix& d_aux = cfg.aux->separate_decoder ? *grads->w_d_aux : grads->w_d;
        backprop_decoder(alat, p, dec_aux, d_aux, d_pre);
      }
    }
  }

  if (cfg.matryoshka) {
    const auto weights = cfg.matryoshka_weights();
    for (std::size_t lvl = 0; lvl < cfg.matryoshka->k_levels.size(); ++lvl) {
      Activation level_act = act;
      level_act.k = cfg.matryoshka->k_levels[lvl];
      const LatentBatch llat = apply_activation(level_act, pre);
      const Matrix lerr = decode(llat, model.w_d) - targets;
      out.matryoshka += weights[lvl] * lerr.squaredNorm() * inv_b;
      if (grads) backprop_decoder(llat, (2.0 * weights[lvl] * inv_b) * lerr, model.w_d, grads->w_d, d_pre);
    }
  }

  if (cfg.anchoring && cfg.anchoring->k_anchors > 0) {
    const auto& a = *cfg.anchoring;
    const Index k = a.k_anchors;
    const Matrix de = model.w_e.topRows(k) - a.anchor_p;
    const Matrix dd = model.w_d.leftCols(k) - a.anchor_r;
    out.anchor = a.lambda * (de.squaredNorm() + dd.squaredNorm());
    if (grads) {
      grads->w_e.topRows(k) += (2.0 * a.lambda) * de;
      grads->w_d.leftCols(k) += (2.0 * a.lambda) * dd;
    }
  }

  if (grads) {
    // dW_E = dZ^T X. dZ is zero off the main and auxiliary supports, so the
    // sparse path visits only those; zeroing each entry after use makes an
    // index present in both supports count once.
    Index touched = lat.total_active() + (aux_lat ? aux_lat->total_active() : 0);
    if (static_cast<double>(touched) < kSparseDensity * static_cast<double>(d_pre.size())) {
      auto accumulate = [&](const LatentBatch& l) {
        for (Index b = 0; b < batch; ++b) {
          for (Index i : l.support[static_cast<std::size_t>(b)]) {
            double& g = d_pre(b, i);
            if (g != 0.0) grads->w_e.row(i) += g * inputs.row(b);
            g = 0.0;
          }
        }
      };
      accumulate(lat);
      if (aux_lat) accumulate(*aux_lat);
    } else {
      grads->w_e.noalias() += d_pre.transpose() * inputs;
    }
    const bool finite = all_finite(grads->w_e) && all_finite(grads->w_d) &&
                        grads->theta.allFinite() && (!grads->w_d_aux || all_finite(*grads->w_d_aux));
    if (!finite) {
      std::ostringstream os;
      os << "non-finite gradient (mse=" << out.mse << ", |W_E|=" << model.w_e.norm()
         << ", |W_D|=" << model.w_d.norm() << ")";
      throw RuntimeFailure(os.str());
    }
  }

  out.total = out.mse + out.l1 + out.l0 + out.aux + out.matryoshka + out.anchor;
  return out;
}

}  // namespace detail

LossBreakdown sdl_loss(const SdlModel& model, const Matrix& inputs, const Matrix& targets,
                       const LossConfig& cfg, const LossContext& ctx) {
  return detail::evaluate(model, inputs, targets, cfg, ctx, nullptr);
}

FeatureWeights compute_m_d(const BenchConfig& cfg) {
  cfg.validate();
  FeatureWeights w;
  const double s = cfg.sparsity;
  const double second_moment = cfg.beta * cfg.beta + (cfg.c_min + cfg.beta) * (cfg.c_min + cfg.beta);
  const double lone = (1.0 - s) * std::pow(s, static_cast<double>(cfg.n - 1));
  w.m_d = Vector::Constant(cfg.n, lone * second_moment);
  w.degenerate = s >= 1.0;
  return w;
}

FeatureWeights estimate_m_d(const BenchConfig& cfg, Index samples, std::uint64_t seed) {
  cfg.validate();
  require(samples >= 1, "estimate_m_d: samples must be >= 1");
  Rng rng = make_rng(seed, 0xA11CE);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0 / cfg.beta);
  const double p_active = 1.0 - cfg.sparsity;
  Vector acc = Vector::Zero(cfg.n);
  for (Index s = 0; s < samples; ++s) {
    Index active = 0;
    Index which = -1;
    for (Index d = 0; d < cfg.n; ++d) {
      if (unif(rng) < p_active) {
        ++active;
        which = d;
      }
    }
    if (active == 1) {
      const double x = cfg.c_min + expo(rng);
      acc[which] += x * x;
    }
  }
  FeatureWeights w;
  w.m_d = acc / static_cast<double>(samples);
  w.degenerate = cfg.sparsity >= 1.0;
  return w;
}

Matrix isolated_latents(const SdlModel& model, const Matrix& w_p) {
  require_dims(w_p.rows() == model.n_p(), "isolated_latents: w_p rows must equal n_p");
  const Matrix pre = (model.w_e * w_p).transpose();  // n x n_q, one feature per row
  Activation act = model.activation;
  // A batch of one: batch_topk reduces to per-row topk.
  if (act.kind == Activation::Kind::batch_topk) act.kind = Activation::Kind::topk;
  return apply_activation(act, pre).values.transpose();
}

Vector feature_residual_norms(const SdlModel& model, const FeatureMatrix& w_p,
                              const FeatureMatrix& w_r) {
  require_dims(w_p.count() == w_r.count(), "residuals: w_p and w_r feature counts differ");
  require_dims(w_r.dim() == model.n_r(), "residuals: w_r rows must equal n_r");
  const Matrix z = isolated_latents(model, w_p.data);
  const Matrix resid = w_r.data - model.w_d * z;
  return resid.colwise().norm().transpose();
}

double approx_loss(const SdlModel& model, const FeatureMatrix& w_p, const FeatureMatrix& w_r,
                   const FeatureWeights& weights) {
  require_dims(weights.m_d.size() == w_p.count(), "approx_loss: weight count != feature count");
  const Vector norms = feature_residual_norms(model, w_p, w_r);
  return (weights.m_d.array() * norms.array().square()).sum();
}

namespace {

bool positively_homogeneous(const Activation& act) {
  switch (act.kind) {
    case Activation::Kind::relu:
    case Activation::Kind::topk:
    case Activation::Kind::batch_topk:
      return true;
    case Activation::Kind::jump:
      return act.c == 0.0;
    case Activation::Kind::jumprelu:
      return (act.theta.array() == 0.0).all();
  }
  return false;
}

}  // namespace

GapReport approximation_gap(const SdlModel& model, const FeatureMatrix& w_p,
                            const FeatureMatrix& w_r, const BenchConfig& base,
                            std::span<const double> sparsities, Index samples,
                            std::uint64_t seed) {
  require(sparsities.size() >= 3, "approximation_gap: need at least three sparsity values");
  require(samples >= 1, "approximation_gap: samples must be >= 1");
  for (double s : sparsities) require(s >= 0.0 && s <= 1.0, "approximation_gap: sparsity outside [0, 1]");
  const Index n = w_p.count();
  require_dims(w_r.count() == n, "approximation_gap: w_p and w_r feature counts differ");
  model.validate();

  const std::size_t grid = sparsities.size();
  const bool homogeneous = positively_homogeneous(model.activation);
  // Per-feature unit-magnitude loss f_d; the lone-feature loss is x^2 f_d
  // whenever the activation is positively homogeneous.
  const Vector f = feature_residual_norms(model, w_p, w_r).array().square();

  std::vector<double> sum_all(grid, 0.0), sum_multi(grid, 0.0), sumsq_multi(grid, 0.0);
  std::vector<Index> multi(grid, 0);
  std::vector<double> u(static_cast<std::size_t>(n)), mag(static_cast<std::size_t>(n));
  Vector x(n);
  Rng rng = make_rng(seed, 0x6A9);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0 / base.beta);

  auto sample_loss = [&](const Vector& coeffs) {
    const Vector xp = w_p.data * coeffs;
    const Vector xr = w_r.data * coeffs;
    const Matrix pre = (model.w_e * xp).transpose();
    Activation act = model.activation;
    if (act.kind == Activation::Kind::batch_topk) act.kind = Activation::Kind::topk;
    const LatentBatch lat = apply_activation(act, pre);
    return (xr - model.w_d * lat.values.row(0).transpose()).squaredNorm();
  };

  for (Index s = 0; s < samples; ++s) {
    for (Index d = 0; d < n; ++d) {
      u[static_cast<std::size_t>(d)] = unif(rng);
      mag[static_cast<std::size_t>(d)] = base.c_min + expo(rng);
    }
    for (std::size_t g = 0; g < grid; ++g) {
      const double p_active = 1.0 - sparsities[g];
      Index active = 0;
      Index last = -1;
      for (Index d = 0; d < n; ++d) {
        if (u[static_cast<std::size_t>(d)] < p_active) {
          ++active;
          last = d;
        }
      }
      if (active == 0) continue;
      double loss = 0.0;
      if (active == 1 && homogeneous) {
        const double m = mag[static_cast<std::size_t>(last)];
        loss = m * m * f[last];
      } else {
        for (Index d = 0; d < n; ++d) {
          x[d] = u[static_cast<std::size_t>(d)] < p_active ? mag[static_cast<std::size_t>(d)] : 0.0;
        }
        loss = sample_loss(x);
      }
      sum_all[g] += loss;
      if (active >= 2) {
        sum_multi[g] += loss;
        sumsq_multi[g] += loss * loss;
        ++multi[g];
      }
    }
  }

  GapReport rep;
  const double inv = 1.0 / static_cast<double>(samples);
  for (std::size_t g = 0; g < grid; ++g) {
    BenchConfig cfg = base;
    cfg.n = n;
    cfg.sparsity = sparsities[g];
    GapPoint pt;
    pt.sparsity = sparsities[g];
    pt.approx = approx_loss(model, w_p, w_r, compute_m_d(cfg));
    pt.exact = sum_all[g] * inv;
    pt.naive_gap = pt.exact - pt.approx;
    pt.multi_active = multi[g];
    if (homogeneous) {
      const double mean = sum_multi[g] * inv;
      const double var = std::max(0.0, sumsq_multi[g] * inv - mean * mean);
      pt.gap = mean;
      pt.gap_stderr = std::sqrt(var * inv);
    } else {
      pt.gap = pt.naive_gap;
      pt.gap_stderr = std::numeric_limits<double>::quiet_NaN();
    }
    rep.points.push_back(pt);
  }

  std::vector<double> xs, ys;
  for (const auto& pt : rep.points) {
    const bool noisy = !(pt.gap > 0.0) || pt.sparsity >= 1.0 ||
                       (std::isfinite(pt.gap_stderr) && pt.gap < 2.0 * pt.gap_stderr);
    if (noisy) {
      rep.below_noise_floor = true;
      continue;
    }
    xs.push_back(std::log(1.0 - pt.sparsity));
    ys.push_back(std::log(std::abs(pt.gap)));
  }
  if (!rep.below_noise_floor && xs.size() >= 2) {
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    if (sxx > 0.0) rep.slope = sxy / sxx;
  }
  return rep;
}

}  // namespace lrb
