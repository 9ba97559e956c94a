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

#include <optional>
#include <string>
#include <vector>

#include "lrb/bench.hpp"
#include "lrb/losses.hpp"
#include "lrb/pattern.hpp"
#include "lrb/sdl.hpp"

namespace lrb {

/// The encoder region Omega(P, c): for every non-dead neuron i and feature d,
/// <row i, w_p^d> > c iff d is in F_i. Dead rows are unconstrained.
struct RegionSpec {
  ActivationPattern pattern;
  double c = 0.0;
};

struct RegionCheck {
  bool inside = false;
  bool on_boundary = false;  // some active-row product lies within tol of c
  double margin = 0.0;       // smallest distance of an active-row product from c
};

RegionCheck check_region(const Matrix& encoder, const Matrix& w_p, const RegionSpec& region,
                         double boundary_tol = 1e-12);

/// W_E = W_p^T and W_D = W_r, zero padded to n_q neurons, with a jump(c)
/// activation.
SdlModel construct_global_minimum(const FeatureMatrix& w_p, const FeatureMatrix& w_r, Index n_q,
                                  double c = 0.0);

/// Explicit residual sum of the padded identity configuration and its bound
/// M^2 sum_d M_d (K_d - 1)^2, with K_d = |{k : <w_p^k, w_p^d> > c}|.
struct InterferenceBound {
  double residual_sum = 0.0;
  double bound = 0.0;
  double interference = 0.0;
  std::vector<Index> k_d;
};

InterferenceBound global_minimum_bound(const FeatureMatrix& w_p, const FeatureMatrix& w_r,
                                       const FeatureWeights& weights, double c = 0.0);

struct ZeroLossCheck {
  Vector residuals;
  bool zero_loss = false;
};

/// Per-feature ||w_r^d - W_D sigma(W_E w_p^d)|| and whether all are <= tol.
ZeroLossCheck check_zero_loss_conditions(const SdlModel& model, const FeatureMatrix& w_p,
                                         const FeatureMatrix& w_r, double tol = 1e-10);

/// Row search for an encoder realizing `pattern` at threshold c. A scaled
/// normalized member sum is tried first, then a per-row margin LP. Returns
/// nullopt when some row is certified infeasible.
std::optional<Matrix> encoder_for_pattern(const ActivationPattern& pattern, const Matrix& w_p,
                                          double c, bool require_partition = false);

/// Encoder for a partition pattern whose region is also W_E-stationary. Each
/// live row hits z_d = alpha <w_r^d, v> on its members, where v is an
/// eigenvector of sum_{d in F_i} M_d w_r^d w_r^d^T with positive projections
/// onto every member; non-members get a maximized margin below c. Eigenvectors
/// are tried from the largest eigenvalue down. Returns nullopt when no
/// eigenvector admits a feasible row.
std::optional<Matrix> stationary_encoder_for_pattern(const ActivationPattern& pattern,
                                                     const FeatureMatrix& w_p,
                                                     const FeatureMatrix& w_r,
                                                     const FeatureWeights& weights, double c);

/// Least-squares decoder for a fixed partition region: column i is
/// sum M_d z_d w_r^d / sum M_d z_d^2 over d in F_i, zero for dead neurons.
/// The encoder is `witness` when given, else stationary_encoder_for_pattern.
/// Only the W_D gradient is guaranteed to vanish for an arbitrary witness.
SdlModel construct_partial_minimum(const RegionSpec& region, const FeatureMatrix& w_p,
                                   const FeatureMatrix& w_r, const FeatureWeights& weights,
                                   const std::optional<Matrix>& witness = std::nullopt);

/// Per-neuron norms of sum_{d in F_i} M_d z_d (w_r^d - col_i z_d).
Vector normal_equation_residual(const SdlModel& model, const FeatureMatrix& w_p,
                                const FeatureMatrix& w_r, const FeatureWeights& weights,
                                const RegionSpec& region);

enum class CertClass { global, partial, neither };
std::string to_string(CertClass c);

struct CertReport {
  double grad_norm_wd = 0.0;
  double grad_norm_we = 0.0;
  double loss = 0.0;
  bool region_ok = false;
  bool on_boundary = false;
  CertClass classification = CertClass::neither;
};

/// In-region gradients of the approximate loss. Requires a jump(c) activation
/// (or relu when c = 0) matching the region threshold.
struct RegionGradients {
  Matrix w_e;
  Matrix w_d;
};

RegionGradients approx_loss_gradients(const SdlModel& model, const FeatureMatrix& w_p,
                                      const FeatureMatrix& w_r, const FeatureWeights& weights,
                                      const RegionSpec& region);

CertReport certify_stationarity(const SdlModel& model, const FeatureMatrix& w_p,
                                const FeatureMatrix& w_r, const FeatureWeights& weights,
                                const RegionSpec& region, double tol = 1e-7);

struct AbsorptionResult {
  Matrix encoder;  // input encoder plus one dedicated row at the bottom
  double c2 = 0.0;
  ActivationPattern expected;
  ActivationPattern realized;
  Index parent = 0;
  Index separated = 0;  // feature given its own neuron
  double a_min = 0.0;
  double lambda = 0.0;
  double alpha = 0.0;
  double tilt = 0.0;  // nonzero when tied activations had to be split first
  bool lambda_ok = false;
  bool shrink_ok = false;
  bool alpha_ok = false;

  bool pattern_ok() const { return realized == expected; }
  bool ok() const { return lambda_ok && shrink_ok && alpha_ok && pattern_ok(); }
};

/// Splits the smallest-activation member of F_parent onto a new neuron.
/// `interference` is the max off-diagonal Gram entry of w_p (must be < 1).
AbsorptionResult absorption_construct(const Matrix& encoder, const ActivationPattern& pattern,
                                      Index parent, double c, const Matrix& w_p,
                                      double interference);

struct ProbeReport {
  int trials = 0;
  double min_second_diff_wd = 0.0;
  double min_second_diff_we = 0.0;
  int we_shrinks = 0;        // total step halvings needed to stay in the region
  int we_gave_up = 0;        // probes abandoned after 10 halvings
  bool convex_ok = false;
};

/// Restricts the approximate loss to random segments in W_D (W_E fixed) and
/// in region-preserving W_E directions (W_D fixed).
ProbeReport biconvexity_probe(const SdlModel& model, const FeatureMatrix& w_p,
                              const FeatureMatrix& w_r, const FeatureWeights& weights,
                              const RegionSpec& region, int trials, std::uint64_t seed,
                              int points = 7, double tol = 1e-9);

struct CrossingReport {
  int trials = 0;
  int violations = 0;
  double min_second_diff = 0.0;
};

/// Random W_E segments on a two-feature jump(0) instance with W_D = W_r = I,
/// restricted to segments along which some neuron switches on.
CrossingReport boundary_crossing_probe(int trials, std::uint64_t seed, int points = 7,
                                       double tol = 1e-9);

}  // namespace lrb
