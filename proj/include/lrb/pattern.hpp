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

#include <string>
#include <vector>

#include "lrb/bench.hpp"
#include "lrb/sdl.hpp"

namespace lrb {

/// Per-neuron sets of ground-truth features (F_1, ..., F_nq). Each set is
/// kept sorted and duplicate free.
struct ActivationPattern {
  std::vector<std::vector<Index>> sets;

  ActivationPattern() = default;
  explicit ActivationPattern(std::vector<std::vector<Index>> s);

  Index neurons() const { return static_cast<Index>(sets.size()); }
  bool is_dead(Index i) const { return sets[static_cast<std::size_t>(i)].empty(); }
  bool contains(Index i, Index d) const;
  bool polysemantic() const;
  /// Sets are pairwise disjoint and their union is [0, n).
  bool is_partition(Index n) const;
  Index dead_count() const;
  std::string to_string() const;

  friend bool operator==(const ActivationPattern&, const ActivationPattern&) = default;
};

/// F_i = {d : sigma(W_E w_p^d)_i > c}, each ground-truth column fed in
/// isolation through the model's own activation.
ActivationPattern activation_pattern_of(const SdlModel& model, const FeatureMatrix& w_p,
                                        double c = 0.0);

/// F_i = {d : <w_E^i, w_p^d> > c}: the pattern of a bare encoder under a
/// jump(c) activation.
ActivationPattern threshold_pattern(const Matrix& encoder, const Matrix& w_p, double c);

}  // namespace lrb
