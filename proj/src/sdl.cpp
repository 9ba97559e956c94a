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

#include "lrb/sdl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace lrb {

Activation Activation::relu() { return Activation{}; }

Activation Activation::jumprelu(Index n_q, double theta0) {
  Activation a;
  a.kind = Kind::jumprelu;
  a.theta = Vector::Constant(n_q, theta0);
  return a;
}

Activation Activation::topk(Index k, bool compose_relu) {
  Activation a;
  a.kind = Kind::topk;
  a.k = k;
  a.compose_relu = compose_relu;
  return a;
}

Activation Activation::batch_topk(Index k, bool compose_relu) {
  Activation a;
  a.kind = Kind::batch_topk;
  a.k = k;
  a.compose_relu = compose_relu;
  return a;
}

Activation Activation::jump(double c) {
  Activation a;
  a.kind = Kind::jump;
  a.c = c;
  return a;
}

void Activation::validate(Index n_q) const {
  switch (kind) {
    case Kind::relu: break;
    case Kind::jumprelu:
      require(theta.size() == n_q, "jumprelu: theta length must equal n_q");
      require((theta.array() >= 0.0).all(), "jumprelu: thresholds must be >= 0");
      break;
    case Kind::topk:
    case Kind::batch_topk:
      require(k >= 1, "topk: k must be >= 1");
      require(k <= n_q, "topk: k must not exceed n_q");
      break;
    case Kind::jump:
      require(c >= 0.0, "jump: threshold must be >= 0");
      break;
  }
}

std::string to_string(Activation::Kind kind) {
  switch (kind) {
    case Activation::Kind::relu: return "relu";
    case Activation::Kind::jumprelu: return "jumprelu";
    case Activation::Kind::topk: return "topk";
    case Activation::Kind::batch_topk: return "batch_topk";
    case Activation::Kind::jump: return "jump";
  }
  return "relu";
}

Activation::Kind activation_kind_from_string(const std::string& s) {
  if (s == "relu") return Activation::Kind::relu;
  if (s == "jumprelu") return Activation::Kind::jumprelu;
  if (s == "topk") return Activation::Kind::topk;
  if (s == "batch_topk") return Activation::Kind::batch_topk;
  if (s == "jump") return Activation::Kind::jump;
  throw ValidationError("unknown activation '" + s + "'");
}

std::string Activation::name() const { return to_string(kind); }

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::sae: return "sae";
    case ModelKind::transcoder: return "transcoder";
    case ModelKind::crosscoder: return "crosscoder";
  }
  return "sae";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "sae") return ModelKind::sae;
  if (s == "transcoder") return ModelKind::transcoder;
  if (s == "crosscoder") return ModelKind::crosscoder;
  throw ValidationError("unknown model kind '" + s + "'");
}

void SdlModel::validate() const {
  require_dims(w_d.cols() == w_e.rows(), "model: decoder columns must equal encoder rows (n_q)");
  if (kind == ModelKind::sae) {
    require_dims(n_p() == n_r(), "model: sae requires n_p == n_r");
  }
  if (kind == ModelKind::crosscoder) {
    require(sources >= 2, "model: crosscoder needs at least two sources");
    if (!block_dims.empty()) {
      require(static_cast<int>(block_dims.size()) == sources, "model: block_dims size != sources");
      const Index total = std::accumulate(block_dims.begin(), block_dims.end(), Index{0});
      require_dims(total == n_p(), "model: block_dims must sum to n_p");
    }
  }
  if (w_d_aux) {
    require_dims(w_d_aux->rows() == n_r() && w_d_aux->cols() == n_q(),
                 "model: auxiliary decoder shape must match the decoder");
  }
  activation.validate(n_q());
}

double LatentBatch::mean_l0() const {
  if (support.empty()) return 0.0;
  return static_cast<double>(total_active()) / static_cast<double>(support.size());
}

Index LatentBatch::total_active() const {
  Index total = 0;
  for (const auto& s : support) total += static_cast<Index>(s.size());
  return total;
}

namespace {

// Strict order used for every top-k selection: larger value first, then
// lower flat index.
struct TopOrder {
  const double* vals;
  bool operator()(Index a, Index b) const {
    if (vals[a] != vals[b]) return vals[a] > vals[b];
    return a < b;
  }
};

// Indices of the `k` best eligible entries of vals[0, n) under TopOrder,
// returned in ascending index order.
void select_top(const double* vals, Index n, Index k, bool compose_relu, std::vector<Index>& heap,
                std::vector<Index>& kept) {
  kept.clear();
  heap.clear();
  if (k <= 0) return;
  const TopOrder better{vals};
  if (4 * k >= n) {
    for (Index i = 0; i < n; ++i) {
      if (!compose_relu || vals[i] > 0.0) heap.push_back(i);
    }
    const Index take = std::min<Index>(k, static_cast<Index>(heap.size()));
    if (take == 0) return;
    std::nth_element(heap.begin(), heap.begin() + (take - 1), heap.end(), better);
    kept.assign(heap.begin(), heap.begin() + take);
  } else {
    // Bounded heap with the worst kept entry on top. Scanning in index order
    // means a later entry only displaces the worst when strictly larger, so
    // once the heap is full a single comparison against `cut` suffices.
    double cut = compose_relu ? 0.0 : -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < n; ++i) {
      const double v = vals[i];
      if (!(v > cut)) continue;
      if (static_cast<Index>(heap.size()) < k) {
        heap.push_back(i);
        std::push_heap(heap.begin(), heap.end(), better);
      } else {
        std::pop_heap(heap.begin(), heap.end(), better);
        heap.back() = i;
        std::push_heap(heap.begin(), heap.end(), better);
      }
      if (static_cast<Index>(heap.size()) == k) cut = vals[heap.front()];
    }
    kept.assign(heap.begin(), heap.end());
  }
  std::sort(kept.begin(), kept.end());
}

}  // namespace

LatentBatch apply_activation(const Activation& act, const RowMatrix& pre) {
  act.validate(pre.cols());
  const Index rows = pre.rows();
  const Index n_q = pre.cols();
  LatentBatch out;
  out.support.assign(static_cast<std::size_t>(rows), {});

  auto threshold = [&](auto thr_of) {
    out.values.setZero(rows, n_q);
    for (Index r = 0; r < rows; ++r) {
      const double* row = pre.data() + r * n_q;
      double* dst = out.values.data() + r * n_q;
      auto& sup = out.support[static_cast<std::size_t>(r)];
      for (Index i = 0; i < n_q; ++i) {
        if (row[i] > thr_of(i)) {
          dst[i] = row[i];
          sup.push_back(i);
        }
      }
    }
  };

  switch (act.kind) {
    case Activation::Kind::relu:
      threshold([](Index) { return 0.0; });
      break;
    case Activation::Kind::jump:
      threshold([&](Index) { return act.c; });
      break;
    case Activation::Kind::jumprelu:
      threshold([&](Index i) { return act.theta[i]; });
      break;
    case Activation::Kind::topk: {
      out.values.setZero(rows, n_q);
      std::vector<Index> heap, kept;
      for (Index r = 0; r < rows; ++r) {
        select_top(pre.data() + r * n_q, n_q, act.k, act.compose_relu, heap, kept);
        for (Index i : kept) {
          const double v = pre(r, i);
          if (v == 0.0) continue;
          out.values(r, i) = v;
          out.support[static_cast<std::size_t>(r)].push_back(i);
        }
      }
      break;
    }
    case Activation::Kind::batch_topk: {
      out.values.setZero(rows, n_q);
      std::vector<Index> heap, kept;
      select_top(pre.data(), pre.size(), act.k * rows, act.compose_relu, heap, kept);
      for (Index flat : kept) {
        const Index r = flat / n_q;
        const Index i = flat % n_q;
        const double v = pre(r, i);
        if (v == 0.0) continue;
        out.values(r, i) = v;
        out.support[static_cast<std::size_t>(r)].push_back(i);
      }
      break;
    }
  }
  return out;
}

LatentBatch apply_activation(const Activation& act, const Matrix& pre) {
  return apply_activation(act, RowMatrix(pre));
}

ForwardResult forward(const SdlModel& model, const Matrix& inputs) {
  require_dims(inputs.cols() == model.n_p(), "forward: input width must equal n_p");
  ForwardResult res;
  res.pre.noalias() = inputs * model.w_e.transpose();
  res.latents = apply_activation(model.activation, res.pre);
  res.reconstruction.noalias() = res.latents.values * model.w_d.transpose();
  return res;
}

SdlModel init_model(Index n_p, Index n_q, Index n_r, const Activation& act, ModelKind kind,
                    std::uint64_t seed, int sources) {
  require(n_p >= 1 && n_q >= 1 && n_r >= 1, "init_model: dimensions must be >= 1");
  Rng rng = make_rng(seed, 0x1417);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw_rows = [&](Index count, Index dim) {
    Matrix m(count, dim);
    for (Index r = 0; r < count; ++r) {
      for (Index c = 0; c < dim; ++c) m(r, c) = normal(rng);
      const double norm = m.row(r).norm();
      if (norm > 0.0) m.row(r) *= 1.0 / (norm * std::sqrt(static_cast<double>(dim)));
    }
    return m;
  };
  SdlModel model;
  model.kind = kind;
  model.activation = act;
  if (kind == ModelKind::crosscoder) {
    require(sources >= 2 && n_p % sources == 0, "init_model: crosscoder input must split into equal source blocks");
    model.sources = sources;
    model.block_dims.assign(static_cast<std::size_t>(sources), n_p / sources);
  }
  model.w_e = draw_rows(n_q, n_p);
  if (n_r == n_p) {
    model.w_d = model.w_e.transpose();
  } else {
    model.w_d = draw_rows(n_q, n_r).transpose();
  }
  if (act.kind == Activation::Kind::jumprelu && act.theta.size() != n_q) {
    const double theta0 = act.theta.size() > 0 ? act.theta[0] : 0.001;
    model.activation.theta = Vector::Constant(n_q, theta0);
  }
  model.validate();
  return model;
}

}  // namespace lrb
