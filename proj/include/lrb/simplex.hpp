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

#include "lrb/common.hpp"

namespace lrb {

enum class LpStatus { optimal, infeasible, unbounded };

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  double value = 0.0;
  Vector x;
};

/// Dense two-phase simplex for: maximize c^T x subject to A x <= b, x >= 0.
/// Entering columns follow Bland's rule, leaving-row ties go to the lowest
/// basic label. A runaway pivot count raises RuntimeFailure.
LpResult solve_lp(const Matrix& a, const Vector& b, const Vector& c, double eps = 1e-9);

}  // namespace lrb
