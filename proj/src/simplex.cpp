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

#include "lrb/simplex.hpp"

#include <limits>
#include <vector>

namespace lrb {

namespace {

class Tableau {
 public:
  Tableau(const Matrix& a, const Vector& b, const Vector& c, double eps)
      : m_(a.rows()), n_(a.cols()), eps_(eps), d_(Matrix::Zero(m_ + 2, n_ + 2)),
        basis_(static_cast<std::size_t>(m_)), nonbasis_(static_cast<std::size_t>(n_ + 1)) {
    d_.topLeftCorner(m_, n_) = a;
    for (Index i = 0; i < m_; ++i) {
      basis_[static_cast<std::size_t>(i)] = n_ + i;
      d_(i, n_) = -1.0;
      d_(i, n_ + 1) = b[i];
    }
    for (Index j = 0; j < n_; ++j) {
      nonbasis_[static_cast<std::size_t>(j)] = j;
      d_(m_, j) = -c[j];
    }
    nonbasis_[static_cast<std::size_t>(n_)] = -1;
    d_(m_ + 1, n_) = 1.0;
  }

  LpResult solve() {
    LpResult out;
    Index r = 0;
    for (Index i = 1; i < m_; ++i) {
      if (d_(i, n_ + 1) < d_(r, n_ + 1)) r = i;
    }
    if (m_ > 0 && d_(r, n_ + 1) < -eps_) {
      pivot(r, n_);
      if (!run(1) || d_(m_ + 1, n_ + 1) < -eps_) {
        out.status = LpStatus::infeasible;
        return out;
      }
      for (Index i = 0; i < m_; ++i) {
        if (basis_[static_cast<std::size_t>(i)] != -1) continue;
        Index s = -1;
        for (Index j = 0; j <= n_; ++j) {
          if (s == -1 || d_(i, j) < d_(i, s) ||
              (d_(i, j) == d_(i, s) && nonbasis_[static_cast<std::size_t>(j)] <
                                           nonbasis_[static_cast<std::size_t>(s)])) {
            s = j;
          }
        }
        pivot(i, s);
      }
    }
    if (!run(2)) {
      out.status = LpStatus::unbounded;
      return out;
    }
    out.status = LpStatus::optimal;
    out.x = Vector::Zero(n_);
    for (Index i = 0; i < m_; ++i) {
      const Index v = basis_[static_cast<std::size_t>(i)];
      if (v >= 0 && v < n_) out.x[v] = d_(i, n_ + 1);
    }
    out.value = d_(m_, n_ + 1);
    return out;
  }

 private:
  void pivot(Index r, Index s) {
    const double inv = 1.0 / d_(r, s);
    for (Index i = 0; i < m_ + 2; ++i) {
      if (i == r) continue;
      const double f = d_(i, s) * inv;
      if (f == 0.0) continue;
      for (Index j = 0; j < n_ + 2; ++j) {
        if (j != s) d_(i, j) -= d_(r, j) * f;
      }
      d_(i, s) = -f;
    }
    for (Index j = 0; j < n_ + 2; ++j) {
      if (j != s) d_(r, j) *= inv;
    }
    d_(r, s) = inv;
    std::swap(basis_[static_cast<std::size_t>(r)], nonbasis_[static_cast<std::size_t>(s)]);
  }

  bool run(int phase) {
    const Index x = phase == 1 ? m_ + 1 : m_;
    for (long long iter = 0;; ++iter) {
      if (iter > max_iters_) throw RuntimeFailure("solve_lp: iteration limit reached");
      // Bland's rule: lowest-labelled improving column.
      Index s = -1;
      for (Index j = 0; j <= n_; ++j) {
        const Index label = nonbasis_[static_cast<std::size_t>(j)];
        if (phase == 2 && label == -1) continue;
        if (d_(x, j) >= -eps_) continue;
        if (s == -1 || label < nonbasis_[static_cast<std::size_t>(s)]) s = j;
      }
      if (s == -1) return true;
      Index r = -1;
      for (Index i = 0; i < m_; ++i) {
        if (d_(i, s) < eps_) continue;
        if (r == -1) {
          r = i;
          continue;
        }
        const double lhs = d_(i, n_ + 1) / d_(i, s);
        const double rhs = d_(r, n_ + 1) / d_(r, s);
        if (lhs < rhs || (lhs == rhs && basis_[static_cast<std::size_t>(i)] <
                                            basis_[static_cast<std::size_t>(r)])) {
          r = i;
        }
      }
      if (r == -1) return false;
      pivot(r, s);
    }
  }

  Index m_, n_;
  double eps_;
  long long max_iters_ = 100000;
  Matrix d_;
  std::vector<Index> basis_, nonbasis_;
};

}  // namespace

LpResult solve_lp(const Matrix& a, const Vector& b, const Vector& c, double eps) {
  require_dims(a.rows() == b.size(), "solve_lp: A rows != b size");
  require_dims(a.cols() == c.size(), "solve_lp: A cols != c size");
  require(a.allFinite() && b.allFinite() && c.allFinite(), "solve_lp: non-finite input");
  return Tableau(a, b, c, eps).solve();
}

}  // namespace lrb
