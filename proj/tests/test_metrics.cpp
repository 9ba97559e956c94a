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
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "lrb/metrics.hpp"
#include "test_support.hpp"

using namespace lrb;
using namespace lrb::testing;

namespace {

double ref_abs_cos(const Matrix& a, Index i, const Matrix& b, Index j) {
  return std::abs(dot(a, i, b, j)) / std::sqrt(dot(a, i, a, i) * dot(b, j, b, j));
}

LatentBatch no_latents() { return {}; }

}  // namespace

TEST_CASE("similarity is the absolute cosine of every learned / true pair") {
  Rng rng = make_rng(1);
  for (int t = 0; t < 20; ++t) {
    const Index dim = uniform_index(rng, 2, 8), n = uniform_index(rng, 1, 9), q = uniform_index(rng, 1, 12);
    const FeatureMatrix truth{unit_columns(dim, n, rng)};
    Matrix learned = random_matrix(dim, q, rng);
    const Similarity s = similarity_matrix(learned, truth);
    for (Index i = 0; i < q; ++i) {
      for (Index d = 0; d < n; ++d) CHECK(s.values(i, d) == doctest::Approx(ref_abs_cos(learned, i, truth.data, d)).epsilon(1e-12));
    }
    // Rescaling or negating a learned column changes nothing.
    learned.col(0) *= -uniform(rng, 0.1, 10.0);
    CHECK((similarity_matrix(learned, truth).values - s.values).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("zero learned directions are reported and score zero") {
  Matrix learned = Matrix::Identity(3, 3);
  learned.col(1).setZero();
  const Similarity s = similarity_matrix(learned, FeatureMatrix{Matrix::Identity(3, 3)});
  CHECK(s.zero_columns == std::vector<Index>{1});
  CHECK(s.values.row(1).isZero());
  CHECK_THROWS_AS(similarity_matrix(Matrix::Identity(2, 2), FeatureMatrix{Matrix::Identity(3, 3)}), DimensionMismatch);
}

TEST_CASE("learned equal to truth gives full recovery") {
  Rng rng = make_rng(2);
  const FeatureMatrix truth{unit_columns(6, 10, rng)};
  // Shuffle and flip the columns; recovery is permutation and sign blind.
  Matrix learned(6, 10);
  for (Index d = 0; d < 10; ++d) learned.col((d * 3) % 10) = (d % 2 ? -2.0 : 0.5) * truth.data.col(d);
  const RecoveryReport r = recovery_metrics(similarity_matrix(learned, truth).values, 0.9, no_latents());
  CHECK(r.gt_recovery == 1.0);
  CHECK(r.max_inner_product == doctest::Approx(1.0).epsilon(1e-14));
  for (Index d = 0; d < 10; ++d) CHECK(r.best_match_index[static_cast<std::size_t>(d)] == (d * 3) % 10);
}

TEST_CASE("recovery counts scores strictly above tau") {
  Matrix sim(2, 4);
  sim << 0.95, 0.1, 0.9, 0.0,
         0.2, 0.91, 0.3, 0.5;
  const RecoveryReport r = recovery_metrics(sim, 0.9, no_latents());
  CHECK(r.gt_recovery == 0.5);
  CHECK(r.max_inner_product == doctest::Approx((0.95 + 0.91 + 0.9 + 0.5) / 4.0));
  CHECK(r.best_match_index == std::vector<Index>{0, 1, 0, 1});
  CHECK(recovery_metrics(sim, 0.5, no_latents()).gt_recovery == 0.75);
  CHECK_THROWS_AS(recovery_metrics(sim, 1.0, no_latents()), ValidationError);
  CHECK_THROWS_AS(recovery_metrics(Matrix(2, 0), 0.5, no_latents()), ValidationError);
}

TEST_CASE("evaluation reports latent statistics") {
  Rng rng = make_rng(3);
  const FeatureMatrix truth{unit_columns(8, 12, rng)};
  SdlModel m = init_model(8, 30, 8, Activation::topk(4, false), ModelKind::sae, 5);
  const Matrix x = random_matrix(200, 8, rng).cwiseAbs();
  const RecoveryReport r = evaluate_model(m, truth, x, 0.9);
  CHECK(r.mean_l0 == 4.0);
  const LatentBatch lat = forward(m, x).latents;
  Index dead = 0;
  for (Index i = 0; i < 30; ++i) dead += lat.values.col(i).isZero();
  CHECK(r.dead_count == dead);
  const std::vector<double> taus{0.3, 0.9};
  const auto both = evaluate_model(m, truth, x, taus);
  CHECK(both.size() == 2);
  CHECK(both[1].gt_recovery == r.gt_recovery);
  CHECK(both[0].gt_recovery >= both[1].gt_recovery);
}

TEST_CASE("ground-truth anchors are a sorted seeded subset") {
  Rng rng = make_rng(4);
  const FeatureMatrix w_p{unit_columns(5, 15, rng)};
  const FeatureMatrix w_r{unit_columns(4, 15, rng), MatrixRole::target};
  const AnchorSet a = gt_anchors(w_p, w_r, 6, 11);
  CHECK(a.count() == 6);
  CHECK(std::is_sorted(a.indices.begin(), a.indices.end()));
  CHECK(std::adjacent_find(a.indices.begin(), a.indices.end()) == a.indices.end());
  for (Index j = 0; j < 6; ++j) {
    const Index d = a.indices[static_cast<std::size_t>(j)];
    CHECK((a.anchor_p.row(j).transpose() - w_p.column(d)).norm() <= 1e-14);
    CHECK((a.anchor_r.col(j) - w_r.column(d)).norm() <= 1e-14);
  }
  CHECK(gt_anchors(w_p, w_r, 6, 11).indices == a.indices);
  CHECK(gt_anchors(w_p, w_r, 15, 1).indices.size() == 15);
  CHECK_THROWS_AS(gt_anchors(w_p, w_r, 16, 1), ValidationError);
}

TEST_CASE("subpopulation anchors are normalized class means") {
  Matrix emb(6, 2);
  emb << 1, 0,
         3, 0,
         0, 2,
         1, 1,
        -1, -1,
         0, 5;
  const std::vector<Index> labels{4, 4, 7, 2, 2, 7};
  const AnchorSet a = subpopulation_anchors(emb, labels);
  CHECK(a.indices == std::vector<Index>{4, 7});
  CHECK(a.skipped == std::vector<Index>{2});
  CHECK((a.anchor_p.row(0) - Eigen::RowVector2d(1, 0)).norm() <= 1e-15);
  CHECK((a.anchor_p.row(1) - Eigen::RowVector2d(0, 1)).norm() <= 1e-15);
  CHECK(a.anchor_r == a.anchor_p.transpose());
  CHECK_THROWS_AS(subpopulation_anchors(emb, {1, 2}), DimensionMismatch);
}

TEST_CASE("label files hold one integer per line") {
  const auto dir = std::filesystem::temp_directory_path() / "lrb_labels_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "ok.txt") << "3\n\n-1\n  7 \n";
    std::ofstream(dir / "bad.txt") << "1\n2 3\n";
  }
  CHECK(read_labels((dir / "ok.txt").string()) == std::vector<Index>{3, -1, 7});
  CHECK_THROWS_AS(read_labels((dir / "bad.txt").string()), ValidationError);
  CHECK_THROWS_AS(read_labels((dir / "missing.txt").string()), RuntimeFailure);
  std::filesystem::remove_all(dir);
}
