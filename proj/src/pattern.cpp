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

#include "lrb/pattern.hpp"

#include <algorithm>
#include <sstream>

namespace lrb {

ActivationPattern::ActivationPattern(std::vector<std::vector<Index>> s) : sets(std::move(s)) {
  for (auto& set : sets) {
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
  }
}

bool ActivationPattern::contains(Index i, Index d) const {
  const auto& s = sets[static_cast<std::size_t>(i)];
  return std::binary_search(s.begin(), s.end(), d);
}

bool ActivationPattern::polysemantic() const {
  return std::any_of(sets.begin(), sets.end(), [](const auto& s) { return s.size() >= 2; });
}

bool ActivationPattern::is_partition(Index n) const {
  std::vector<int> hits(static_cast<std::size_t>(n), 0);
  for (const auto& s : sets) {
    for (Index d : s) {
      if (d < 0 || d >= n) return false;
      if (++hits[static_cast<std::size_t>(d)] > 1) return false;
    }
  }
  return std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; });
}

Index ActivationPattern::dead_count() const {
  return static_cast<Index>(std::count_if(sets.begin(), sets.end(), [](const auto& s) { return s.empty(); }));
}

std::string ActivationPattern::to_string() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < sets.size(); ++i) {
    if (i) os << ", ";
    os << '{';
    for (std::size_t j = 0; j < sets[i].size(); ++j) {
      if (j) os << ',';
      os << sets[i][j];
    }
    os << '}';
  }
  os << ')';
  return os.str();
}

ActivationPattern activation_pattern_of(const SdlModel& model, const FeatureMatrix& w_p, double c) {
  require_dims(w_p.dim() == model.n_p(), "activation_pattern_of: w_p rows must equal n_p");
  std::vector<std::vector<Index>> sets(static_cast<std::size_t>(model.n_q()));
  for (Index d = 0; d < w_p.count(); ++d) {
    const Matrix pre = (model.w_e * w_p.column(d)).transpose();
    const LatentBatch z = apply_activation(model.activation, pre);
    for (Index i : z.support[0]) {
      if (z.values(0, i) > c) sets[static_cast<std::size_t>(i)].push_back(d);
    }
  }
  return ActivationPattern(std::move(sets));
}

ActivationPattern threshold_pattern(const Matrix& encoder, const Matrix& w_p, double c) {
  require_dims(encoder.cols() == w_p.rows(), "threshold_pattern: encoder width != w_p rows");
  const Matrix acts = encoder * w_p;
  std::vector<std::vector<Index>> sets(static_cast<std::size_t>(encoder.rows()));
  for (Index i = 0; i < acts.rows(); ++i) {
    for (Index d = 0; d < acts.cols(); ++d) {
      if (acts(i, d) > c) sets[static_cast<std::size_t>(i)].push_back(d);
    }
  }
  return ActivationPattern(std::move(sets));
}

}  // namespace lrb
