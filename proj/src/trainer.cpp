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

#include "lrb/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace lrb {

void TrainConfig::validate() const {
  require(steps >= 0, "train: steps must be >= 0");
  require(batch_size >= 1, "train: batch_size must be >= 1");
  require(lr > 0.0 && std::isfinite(lr), "train: lr must be positive and finite");
  require(decay_start >= 0.0 && decay_start <= 1.0, "train: decay_start must lie in [0, 1]");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "train: adam_beta1 must lie in [0, 1)");
  require(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "train: adam_beta2 must lie in [0, 1)");
  require(adam_eps > 0.0, "train: adam_eps must be > 0");
  require(dead_window >= 1, "train: dead_window must be >= 1");
  require(resample_scale > 0.0, "train: resample_scale must be > 0");
  require(eval_every >= 0, "train: eval_every must be >= 0");
  if (grad_clip) require(*grad_clip > 0.0, "train: grad_clip must be > 0");
  for (int s : resample_at) require(s >= 1, "train: resample steps must be >= 1");
}

AdamState AdamState::zeros_like(const SdlModel& model) {
  AdamState s;
  s.m_e = Matrix::Zero(model.n_q(), model.n_p());
  s.v_e = s.m_e;
  s.m_d = Matrix::Zero(model.n_r(), model.n_q());
  s.v_d = s.m_d;
  s.m_theta = Vector::Zero(model.activation.theta.size());
  s.v_theta = s.m_theta;
  if (model.w_d_aux) {
    s.m_aux = Matrix::Zero(model.w_d_aux->rows(), model.w_d_aux->cols());
    s.v_aux = s.m_aux;
  }
  return s;
}

Gradients gradients(const SdlModel& model, const Matrix& inputs, const Matrix& targets,
                    const LossConfig& cfg, const LossContext& ctx) {
  Gradients g;
  detail::evaluate(model, inputs, targets, cfg, ctx, &g);
  return g;
}

ResampleResult resample_dead_neurons(SdlModel& model, AdamState* optimizer, const Matrix& inputs,
                                     const Matrix& targets, std::span<const Index> dead,
                                     const TrainConfig& cfg, Rng& rng) {
  require_dims(inputs.rows() == targets.rows(), "resample: inputs and targets differ in row count");
  require_dims(inputs.cols() == model.n_p() && targets.cols() == model.n_r(),
               "resample: data widths do not match the model");
  for (Index i : dead) require(i >= 0 && i < model.n_q(), "resample: neuron index out of range");
  ResampleResult out;
  if (dead.empty() || inputs.rows() == 0) return out;

  const ForwardResult fw = forward(model, inputs);
  const Matrix resid = targets - fw.reconstruction;
  const Vector err = resid.rowwise().squaredNorm();
  if (!(err.sum() > 0.0)) {
    out.all_residuals_zero = true;
    return out;
  }
  std::discrete_distribution<Index> pick(err.data(), err.data() + err.size());
  const bool same_space = model.n_p() == model.n_r();
  for (Index i : dead) {
    Index b = pick(rng);
    const Vector r = resid.row(b).transpose() / std::sqrt(err[b]);
    Vector enc = r;
    if (!same_space) {
      const double xn = inputs.row(b).norm();
      enc = xn > 0.0 ? Vector(inputs.row(b).transpose() / xn) : Vector::Zero(model.n_p());
    }
    model.w_e.row(i) = cfg.resample_scale * enc.transpose();
    model.w_d.col(i) = r;
    if (optimizer) {
      optimizer->m_e.row(i).setZero();
      optimizer->v_e.row(i).setZero();
      optimizer->m_d.col(i).setZero();
      optimizer->v_d.col(i).setZero();
      if (optimizer->m_theta.size() > 0) {
        optimizer->m_theta[i] = 0.0;
        optimizer->v_theta[i] = 0.0;
      }
    }
    out.resampled.push_back(i);
  }
  return out;
}

namespace {

template <typename P, typename G>
void adam_step(P& param, const G& grad, P& m, P& v, double lr, double b1, double b2, double eps,
               double bias1, double bias2) {
  m = b1 * m + (1.0 - b1) * grad;
  v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
  param.array() -= lr * (m.array() / bias1) / ((v.array() / bias2).sqrt() + eps);
}

double grad_norm(const Gradients& g) {
  double s = g.w_e.squaredNorm() + g.w_d.squaredNorm() + g.theta.squaredNorm();
  if (g.w_d_aux) s += g.w_d_aux->squaredNorm();
  return std::sqrt(s);
}

void scale(Gradients& g, double f) {
  g.w_e *= f;
  g.w_d *= f;
  g.theta *= f;
  if (g.w_d_aux) *g.w_d_aux *= f;
}

}  // namespace

TrainResult train(SdlModel model, const Matrix& inputs, const Matrix& targets,
                  const LossConfig& loss_cfg, const TrainConfig& cfg, const StepObserver& observer) {
  cfg.validate();
  model.validate();
  loss_cfg.validate(model);
  require_dims(inputs.cols() == model.n_p(), "train: input width must equal n_p");
  require_dims(targets.cols() == model.n_r(), "train: target width must equal n_r");
  require_dims(inputs.rows() == targets.rows(), "train: inputs and targets differ in row count");
  require(inputs.rows() >= 1, "train: empty dataset");

  TrainResult res{model, {}, AdamState::zeros_like(model)};
  SdlModel& m = res.model;
  AdamState& opt = res.optimizer;
  TrainHistory& hist = res.history;

  const Index n_rows = inputs.rows();
  const Index batch = std::min(cfg.batch_size, n_rows);
  const Index n_q = m.n_q();
  Rng rng = make_rng(cfg.seed, 0x7A1);
  Rng resample_rng = make_rng(cfg.seed, 0x7A2);
  std::vector<Index> order(static_cast<std::size_t>(n_rows));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t pos = 0;

  std::vector<int> since_active(static_cast<std::size_t>(n_q), 0);
  std::vector<char> dead(static_cast<std::size_t>(n_q), 0);
  std::vector<char> fired;
  Matrix xb(batch, m.n_p()), tb(batch, m.n_r());
  const bool full_batch = batch == n_rows;
  hist.step_mse.reserve(static_cast<std::size_t>(cfg.steps));

  auto dead_count = [&] {
    return static_cast<Index>(std::count(dead.begin(), dead.end(), char{1}));
  };

  for (int step = 1; step <= cfg.steps; ++step) {
    if (!full_batch) {
      for (Index b = 0; b < batch; ++b) {
        if (pos == order.size()) {
          std::shuffle(order.begin(), order.end(), rng);
          pos = 0;
        }
        const Index r = order[pos++];
        xb.row(b) = inputs.row(r);
        tb.row(b) = targets.row(r);
      }
    }
    const Matrix& x = full_batch ? inputs : xb;
    const Matrix& t = full_batch ? targets : tb;

    for (Index i = 0; i < n_q; ++i) {
      dead[static_cast<std::size_t>(i)] = since_active[static_cast<std::size_t>(i)] >= cfg.dead_window;
    }
    Gradients g;
    LossBreakdown lb;
    try {
      lb = detail::evaluate(m, x, t, loss_cfg, LossContext{dead}, &g, &fired);
    } catch (const RuntimeFailure& e) {
      throw Divergence(std::string("train: diverged at step ") + std::to_string(step) + ": " + e.what(), res);
    }
    if (!std::isfinite(lb.total)) {
      std::ostringstream os;
      os << "train: non-finite loss at step " << step;
      throw Divergence(os.str(), res);
    }
    for (Index i = 0; i < n_q; ++i) {
      auto& c = since_active[static_cast<std::size_t>(i)];
      c = fired[static_cast<std::size_t>(i)] ? 0 : c + 1;
    }
    if (cfg.grad_clip) {
      const double norm = grad_norm(g);
      if (norm > *cfg.grad_clip) scale(g, *cfg.grad_clip / norm);
    }

    ++opt.t;
    double lr = cfg.lr;
    const double start = cfg.decay_start * cfg.steps;
    if (step > start) lr *= std::max(0.0, (cfg.steps - step + 1) / (cfg.steps - start + 1));
    const double bias1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(opt.t));
    const double bias2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(opt.t));
    adam_step(m.w_e, g.w_e, opt.m_e, opt.v_e, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, bias1, bias2);
    adam_step(m.w_d, g.w_d, opt.m_d, opt.v_d, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, bias1, bias2);
    if (g.theta.size() > 0) {
      adam_step(m.activation.theta, g.theta, opt.m_theta, opt.v_theta, lr, cfg.adam_beta1,
                cfg.adam_beta2, cfg.adam_eps, bias1, bias2);
      m.activation.theta = m.activation.theta.cwiseMax(0.0);
    }
    if (g.w_d_aux && m.w_d_aux) {
      adam_step(*m.w_d_aux, *g.w_d_aux, *opt.m_aux, *opt.v_aux, lr, cfg.adam_beta1,
                cfg.adam_beta2, cfg.adam_eps, bias1, bias2);
    }
    hist.step_mse.push_back(lb.mse);

    if (std::find(cfg.resample_at.begin(), cfg.resample_at.end(), step) != cfg.resample_at.end()) {
      std::vector<Index> idx;
      for (Index i = 0; i < n_q; ++i) {
        if (since_active[static_cast<std::size_t>(i)] >= std::min(cfg.dead_window, step)) idx.push_back(i);
      }
      const ResampleResult rr = resample_dead_neurons(m, &opt, x, t, idx, cfg, resample_rng);
      for (Index i : rr.resampled) {
        since_active[static_cast<std::size_t>(i)] = 0;
        hist.resampled.push_back(i);
      }
    }

    if ((cfg.eval_every > 0 && step % cfg.eval_every == 0) || step == cfg.steps) {
      hist.records.push_back(TrainRecord{step, lb, lb.mean_l0, dead_count()});
    }
    if (observer) observer(step, m);
  }
  return res;
}

TrainResult train(SdlModel model, const BenchDataset& data, const LossConfig& loss_cfg,
                  const TrainConfig& cfg, const StepObserver& observer) {
  return train(std::move(model), data.inputs, data.targets, loss_cfg, cfg, observer);
}

}  // namespace lrb
