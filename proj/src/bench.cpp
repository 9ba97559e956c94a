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

#include "lrb/bench.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace lrb {

namespace {

constexpr Index kRowBlock = 1024;

void normalize_columns(Matrix& w) {
  for (Index d = 0; d < w.cols(); ++d) {
    const double norm = w.col(d).norm();
    if (norm > 0.0) w.col(d) /= norm;
  }
}

double draw_magnitude(Rng& rng, double c_min, double beta) {
  std::exponential_distribution<double> expo(1.0 / beta);
  return c_min + expo(rng);
}

}  // namespace

std::string to_string(PairingMode mode) {
  switch (mode) {
    case PairingMode::sae: return "sae";
    case PairingMode::transcoder: return "transcoder";
    case PairingMode::crosscoder: return "crosscoder";
  }
  return "sae";
}

PairingMode pairing_from_string(const std::string& s) {
  if (s == "sae") return PairingMode::sae;
  if (s == "transcoder") return PairingMode::transcoder;
  if (s == "crosscoder") return PairingMode::crosscoder;
  throw ValidationError("unknown pairing mode '" + s + "'");
}

void BenchConfig::validate() const {
  require(n >= 1, "bench: n must be >= 1");
  require(n_p >= 1, "bench: n_p must be >= 1");
  require(n_r >= 1, "bench: n_r must be >= 1");
  require(n_samples >= 0, "bench: n_samples must be >= 0");
  require(sparsity >= 0.0 && sparsity <= 1.0, "bench: sparsity must lie in [0, 1]");
  require(max_interference > 0.0 && max_interference < 1.0,
          "bench: max_interference must lie in (0, 1)");
  require(c_min >= 0.0, "bench: c_min must be >= 0");
  require(beta > 0.0, "bench: beta must be > 0");
  require(eps_tol > 0.0, "bench: eps_tol must be > 0");
  require(reg_lambda > 0.0, "bench: reg_lambda must be > 0");
  require(step_eta > 0.0, "bench: step_eta must be > 0");
  require(max_iters >= 0, "bench: max_iters must be >= 0");
  if (pairing == PairingMode::crosscoder) {
    require(sources >= 2, "bench: crosscoder pairing needs sources >= 2");
  }
}

Index BenchConfig::input_dim() const {
  return pairing == PairingMode::crosscoder ? n_p * sources : n_p;
}

Index BenchConfig::target_dim() const {
  switch (pairing) {
    case PairingMode::sae: return n_p;
    case PairingMode::transcoder: return n_r;
    case PairingMode::crosscoder: return n_p * sources;
  }
  return n_p;
}

double max_interference(const Matrix& columns) {
  if (columns.cols() < 2) return -std::numeric_limits<double>::infinity();
  const Matrix gram = columns.transpose() * columns;
  double best = -std::numeric_limits<double>::infinity();
  for (Index j = 0; j < gram.cols(); ++j) {
    for (Index i = 0; i < gram.rows(); ++i) {
      if (i != j) best = std::max(best, gram(i, j));
    }
  }
  return best;
}

void HierarchySpec::validate(Index n) const {
  require(parents.size() == children.size(), "hierarchy: parents and children differ in length");
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  for (std::size_t p = 0; p < parents.size(); ++p) {
    require(parents[p] >= 0 && parents[p] < n, "hierarchy: parent index out of range");
    require(children[p].size() >= 2, "hierarchy: every parent needs at least two children");
    for (Index c : children[p]) {
      require(c >= 0 && c < n, "hierarchy: child index out of range");
      require(c != parents[p], "hierarchy: a feature cannot be its own child");
      require(!used[static_cast<std::size_t>(c)], "hierarchy: child lists overlap");
      used[static_cast<std::size_t>(c)] = 1;
    }
  }
  for (Index p : parents) {
    require(!used[static_cast<std::size_t>(p)], "hierarchy: a parent is also listed as a child");
  }
}

FeatureMatrix init_feature_matrix(Index dim, Index n, std::uint64_t seed, MatrixRole role) {
  require(dim >= 1 && n >= 1, "init_feature_matrix: dim and n must be >= 1");
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  FeatureMatrix out;
  out.role = role;
  out.data.resize(dim, n);
  for (Index d = 0; d < n; ++d) {
    for (int attempt = 0;; ++attempt) {
      for (Index r = 0; r < dim; ++r) out.data(r, d) = normal(rng);
      const double norm = out.data.col(d).norm();
      if (norm > 0.0 && std::isfinite(norm)) {
        out.data.col(d) /= norm;
        break;
      }
      if (attempt > 16) throw RuntimeFailure("init_feature_matrix: degenerate RNG (zero-norm columns)");
    }
  }
  return out;
}

NonConvergence::NonConvergence(double achieved, double target, int iters)
    : RuntimeFailure([&] {
        std::ostringstream os;
        os << "interference minimization did not converge: achieved max interference "
           << achieved << " > target " << target << " after " << iters
           << " iterations (too many features for the dimension at this bound?)";
        return os.str();
      }()),
      achieved_(achieved),
      target_(target) {}

namespace {

// dL/dG_ij / 2 for i != j; the diagonal is zero.
Matrix interference_weights(const Matrix& gram, double bound, double eps, double lambda) {
  const double shifted = bound - eps;
  Matrix f(gram.rows(), gram.cols());
  for (Index j = 0; j < gram.cols(); ++j) {
    for (Index i = 0; i < gram.rows(); ++i) {
      if (i == j) {
        f(i, j) = 0.0;
        continue;
      }
      const double g = gram(i, j);
      f(i, j) = std::max(0.0, g - shifted) + lambda * std::max(0.0, g);
    }
  }
  return f;
}

}  // namespace

double interference_loss(const Matrix& w, double bound, double eps, double lambda) {
  const Matrix gram = w.transpose() * w;
  const double shifted = bound - eps;
  double loss = 0.0;
  for (Index j = 0; j < gram.cols(); ++j) {
    for (Index i = 0; i < gram.rows(); ++i) {
      if (i == j) continue;
      const double hinge = std::max(0.0, gram(i, j) - shifted);
      const double pos = std::max(0.0, gram(i, j));
      loss += hinge * hinge + lambda * pos * pos;
    }
  }
  return loss;
}

Matrix interference_gradient(const Matrix& w, double bound, double eps, double lambda) {
  // L = sum_{i != j} h(G_ij) with G = W^T W and h symmetric in (i, j), so
  // dL/dW = W (H' + H'^T) = 4 W F with F_ij = max(0, g - (M - eps)) + lambda max(0, g).
  const Matrix gram = w.transpose() * w;
  return 4.0 * (w * interference_weights(gram, bound, eps, lambda));
}

InterferenceResult run_interference_descent(FeatureMatrix w, const BenchConfig& cfg) {
  InterferenceResult res;
  const double bound = cfg.max_interference;
  Matrix& data = w.data;
  Matrix gram(data.cols(), data.cols());
  auto current_max = [&] {
    gram.noalias() = data.transpose() * data;
    double best = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < gram.cols(); ++j) {
      for (Index i = 0; i < gram.rows(); ++i) {
        if (i != j) best = std::max(best, gram(i, j));
      }
    }
    return best;
  };
  double achieved = current_max();
  int it = 0;
  while (achieved > bound && it < cfg.max_iters) {
    const Matrix f = interference_weights(gram, bound, cfg.eps_tol, cfg.reg_lambda);
    data.noalias() -= (4.0 * cfg.step_eta) * (data * f);
    normalize_columns(data);
    ++it;
    achieved = current_max();
  }
  res.achieved = achieved;
  res.iterations = it;
  res.converged = achieved <= bound;
  res.matrix = std::move(w);
  return res;
}

InterferenceResult minimize_interference(FeatureMatrix w, const BenchConfig& cfg) {
  InterferenceResult res = run_interference_descent(std::move(w), cfg);
  if (!res.converged) throw NonConvergence(res.achieved, cfg.max_interference, res.iterations);
  return res;
}

namespace {

template <class PerRow>
void for_each_row_block(Index rows, std::uint64_t seed, PerRow&& fn) {
  for (Index start = 0, block = 0; start < rows; start += kRowBlock, ++block) {
    Rng rng = make_rng(mix_seed(seed, kStreamCoeffs), static_cast<std::uint64_t>(block));
    const Index stop = std::min(rows, start + kRowBlock);
    for (Index r = start; r < stop; ++r) fn(r, rng);
  }
}

}  // namespace

FeatureBatch sample_features(const BenchConfig& cfg) {
  cfg.validate();
  FeatureBatch out;
  out.coeffs.setZero(cfg.n_samples, cfg.n);
  const double p_active = 1.0 - cfg.sparsity;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for_each_row_block(cfg.n_samples, cfg.seed, [&](Index r, Rng& rng) {
    for (Index d = 0; d < cfg.n; ++d) {
      const bool active = unif(rng) < p_active;
      const double mag = draw_magnitude(rng, cfg.c_min, cfg.beta);
      out.coeffs(r, d) = active ? mag : 0.0;
    }
  });
  return out;
}

FeatureBatch sample_hierarchical(const BenchConfig& cfg, const HierarchySpec& spec) {
  spec.validate(cfg.n);
  FeatureBatch out = sample_features(cfg);
  // Parent magnitudes use their own stream so child draws match sample_features.
  for_each_row_block(cfg.n_samples, mix_seed(cfg.seed, 0x5EED), [&](Index r, Rng& rng) {
    for (std::size_t p = 0; p < spec.parents.size(); ++p) {
      bool any_child = false;
      for (Index c : spec.children[p]) any_child = any_child || out.coeffs(r, c) > 0.0;
      const double mag = draw_magnitude(rng, cfg.c_min, cfg.beta);
      out.coeffs(r, spec.parents[p]) = any_child ? mag : 0.0;
    }
  });
  return out;
}

BenchDataset synthesize(const FeatureMatrix& w_p, const FeatureMatrix& w_r,
                        const FeatureBatch& coeffs) {
  require_dims(w_p.count() == coeffs.coeffs.cols(), "synthesize: w_p columns != coefficient width");
  require_dims(w_r.count() == coeffs.coeffs.cols(), "synthesize: w_r columns != coefficient width");
  BenchDataset ds;
  ds.inputs.noalias() = coeffs.coeffs * w_p.data.transpose();
  ds.targets.noalias() = coeffs.coeffs * w_r.data.transpose();
  ds.w_p = w_p;
  ds.w_r = w_r;
  ds.coeffs = coeffs;
  ds.config.n = coeffs.coeffs.cols();
  ds.config.n_p = w_p.dim();
  ds.config.n_r = w_r.dim();
  ds.config.n_samples = coeffs.coeffs.rows();
  return ds;
}

namespace {

InterferenceResult make_dictionary(Index dim, const BenchConfig& cfg, std::uint64_t stream,
                                   MatrixRole role) {
  FeatureMatrix init = init_feature_matrix(dim, cfg.n, mix_seed(cfg.seed, stream), role);
  return minimize_interference(std::move(init), cfg);
}

}  // namespace

BenchDataset generate_bench(const BenchConfig& cfg) {
  cfg.validate();
  FeatureMatrix w_p;
  FeatureMatrix w_r;
  double achieved_p = 0.0;
  double achieved_r = 0.0;
  switch (cfg.pairing) {
    case PairingMode::sae: {
      auto res = make_dictionary(cfg.n_p, cfg, kStreamWp, MatrixRole::input);
      achieved_p = achieved_r = res.achieved;
      w_p = std::move(res.matrix);
      w_r = w_p;
      w_r.role = MatrixRole::target;
      break;
    }
    case PairingMode::transcoder: {
      auto rp = make_dictionary(cfg.n_p, cfg, kStreamWp, MatrixRole::input);
      auto rr = make_dictionary(cfg.n_r, cfg, kStreamWr, MatrixRole::target);
      achieved_p = rp.achieved;
      achieved_r = rr.achieved;
      w_p = std::move(rp.matrix);
      w_r = std::move(rr.matrix);
      break;
    }
    case PairingMode::crosscoder: {
      w_p.data.resize(cfg.n_p * cfg.sources, cfg.n);
      w_p.role = MatrixRole::input;
      w_p.column_norm = std::sqrt(static_cast<double>(cfg.sources));
      achieved_p = -std::numeric_limits<double>::infinity();
      for (int s = 0; s < cfg.sources; ++s) {
        auto block = make_dictionary(cfg.n_p, cfg, kStreamSources + static_cast<std::uint64_t>(s),
                                     MatrixRole::input);
        achieved_p = std::max(achieved_p, block.achieved);
        w_p.data.middleRows(s * cfg.n_p, cfg.n_p) = block.matrix.data;
      }
      achieved_r = achieved_p;
      w_r = w_p;
      w_r.role = MatrixRole::target;
      break;
    }
  }
  BenchDataset ds = synthesize(w_p, w_r, sample_features(cfg));
  ds.config = cfg;
  ds.achieved_interference_p = achieved_p;
  ds.achieved_interference_r = achieved_r;
  return ds;
}

}  // namespace lrb
