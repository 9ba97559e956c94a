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

#include "lrb/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace lrb {

Similarity similarity_matrix(const Matrix& learned, const FeatureMatrix& truth) {
  require_dims(learned.rows() == truth.dim(), "similarity_matrix: learned rows != truth dim");
  Matrix normed = learned;
  Similarity out;
  for (Index j = 0; j < normed.cols(); ++j) {
    const double n = normed.col(j).norm();
    if (n > 0.0) {
      normed.col(j) /= n;
    } else {
      normed.col(j).setZero();
      out.zero_columns.push_back(j);
    }
  }
  Matrix t = truth.data;
  for (Index d = 0; d < t.cols(); ++d) {
    const double n = t.col(d).norm();
    if (n > 0.0) t.col(d) /= n;
  }
  out.values = (normed.transpose() * t).cwiseAbs();
  return out;
}

RecoveryReport recovery_metrics(const Matrix& sim, double tau, const LatentBatch& latents) {
  require(tau > 0.0 && tau < 1.0, "recovery_metrics: tau must lie in (0, 1)");
  const Index n = sim.cols();
  require(n >= 1, "recovery_metrics: no ground-truth features");
  RecoveryReport rep;
  rep.tau = tau;
  rep.per_feature_best = Vector::Zero(n);
  rep.best_match_index.assign(static_cast<std::size_t>(n), -1);
  Index hits = 0;
  for (Index d = 0; d < n; ++d) {
    if (sim.rows() > 0) {
      Index arg = 0;
      rep.per_feature_best[d] = sim.col(d).maxCoeff(&arg);
      rep.best_match_index[static_cast<std::size_t>(d)] = arg;
    }
    if (rep.per_feature_best[d] > tau) ++hits;
  }
  rep.gt_recovery = static_cast<double>(hits) / static_cast<double>(n);
  rep.max_inner_product = rep.per_feature_best.mean();
  if (latents.values.rows() > 0) {
    rep.mean_l0 = latents.mean_l0();
    std::vector<char> seen(static_cast<std::size_t>(latents.values.cols()), 0);
    for (const auto& row : latents.support) {
      for (Index i : row) seen[static_cast<std::size_t>(i)] = 1;
    }
    rep.dead_count = static_cast<Index>(std::count(seen.begin(), seen.end(), char{0}));
  }
  return rep;
}

RecoveryReport evaluate_model(const SdlModel& model, const FeatureMatrix& truth,
                              const Matrix& inputs, double tau) {
  const Similarity sim = similarity_matrix(model.w_e.transpose(), truth);
  const ForwardResult fw = forward(model, inputs);
  return recovery_metrics(sim.values, tau, fw.latents);
}

std::vector<RecoveryReport> evaluate_model(const SdlModel& model, const FeatureMatrix& truth,
                                           const Matrix& inputs, std::span<const double> taus) {
  const Similarity sim = similarity_matrix(model.w_e.transpose(), truth);
  const ForwardResult fw = forward(model, inputs);
  std::vector<RecoveryReport> out;
  for (double tau : taus) out.push_back(recovery_metrics(sim.values, tau, fw.latents));
  return out;
}

AnchorSet gt_anchors(const FeatureMatrix& w_p, const FeatureMatrix& w_r, Index k,
                     std::uint64_t seed) {
  const Index n = w_p.count();
  require_dims(w_r.count() == n, "gt_anchors: w_p and w_r feature counts differ");
  require(k >= 0 && k <= n, "gt_anchors: k must lie in [0, n]");
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  Rng rng = make_rng(seed, 0xA7C);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(k));
  std::sort(idx.begin(), idx.end());
  AnchorSet a;
  a.source = AnchorSource::ground_truth;
  a.indices = idx;
  a.anchor_p.resize(k, w_p.dim());
  a.anchor_r.resize(w_r.dim(), k);
  for (Index j = 0; j < k; ++j) {
    const Index d = idx[static_cast<std::size_t>(j)];
    a.anchor_p.row(j) = w_p.column(d).transpose() / w_p.column(d).norm();
    a.anchor_r.col(j) = w_r.column(d) / w_r.column(d).norm();
  }
  return a;
}

AnchorSet subpopulation_anchors(const Matrix& embeddings, const std::vector<Index>& labels) {
  require_dims(static_cast<Index>(labels.size()) == embeddings.rows(),
               "subpopulation_anchors: one label per embedding row required");
  require(!labels.empty(), "subpopulation_anchors: no samples");
  std::map<Index, std::pair<Vector, Index>> acc;
  for (Index r = 0; r < embeddings.rows(); ++r) {
    auto [it, fresh] = acc.try_emplace(labels[static_cast<std::size_t>(r)], Vector::Zero(embeddings.cols()), 0);
    it->second.first += embeddings.row(r).transpose();
    ++it->second.second;
  }
  AnchorSet a;
  a.source = AnchorSource::subpopulation;
  std::vector<Vector> kept;
  for (const auto& [label, sum_count] : acc) {
    const Vector mean = sum_count.first / static_cast<double>(sum_count.second);
    const double n = mean.norm();
    if (!(n > 1e-12 * std::max(1.0, sum_count.first.cwiseAbs().maxCoeff()))) {
      a.skipped.push_back(label);
      continue;
    }
    kept.push_back(mean / n);
    a.indices.push_back(label);
  }
  const Index k = static_cast<Index>(kept.size());
  a.anchor_p.resize(k, embeddings.cols());
  for (Index j = 0; j < k; ++j) a.anchor_p.row(j) = kept[static_cast<std::size_t>(j)].transpose();
  a.anchor_r = a.anchor_p.transpose();
  return a;
}

std::vector<Index> read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeFailure("cannot open label file: " + path);
  std::vector<Index> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream is(line);
    long long v = 0;
    std::string rest;
    if (!(is >> v) || (is >> rest)) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected one integer label");
    }
    out.push_back(static_cast<Index>(v));
  }
  return out;
}

}  // namespace lrb
