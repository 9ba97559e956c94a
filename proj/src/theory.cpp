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

#include "lrb/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lrb/simplex.hpp"

namespace lrb {

namespace {

void check_pattern_shape(const ActivationPattern& pattern, Index n_q, Index n, const char* who) {
  require_dims(pattern.neurons() == n_q, std::string(who) + ": pattern neuron count != n_q");
  for (const auto& s : pattern.sets) {
    for (Index d : s) require(d >= 0 && d < n, std::string(who) + ": pattern feature index out of range");
  }
}

// Region-form latents: z_id = <row i, w_p^d> on F_i, 0 elsewhere.
Matrix region_latents(const Matrix& encoder, const Matrix& w_p, const ActivationPattern& pattern) {
  const Matrix acts = encoder * w_p;
  Matrix z = Matrix::Zero(acts.rows(), acts.cols());
  for (Index i = 0; i < acts.rows(); ++i) {
    for (Index d : pattern.sets[static_cast<std::size_t>(i)]) z(i, d) = acts(i, d);
  }
  return z;
}

void require_threshold_activation(const SdlModel& model, double c, const char* who) {
  const Activation& a = model.activation;
  const bool jump = a.kind == Activation::Kind::jump && a.c == c;
  const bool relu = a.kind == Activation::Kind::relu && c == 0.0;
  require(jump || relu, std::string(who) + ": model activation must be jump(c) matching the region");
}

bool row_realizes(const Vector& row, const std::vector<Index>& members, const Matrix& w_p, double c) {
  const Vector acts = w_p.transpose() * row;
  for (Index d = 0; d < acts.size(); ++d) {
    const bool member = std::binary_search(members.begin(), members.end(), d);
    if (member ? !(acts[d] > c) : acts[d] > c) return false;
  }
  return true;
}

std::optional<Vector> heuristic_row(const std::vector<Index>& members, const Matrix& w_p, double c) {
  Vector s = Vector::Zero(w_p.rows());
  for (Index d : members) s += w_p.col(d);
  const double norm = s.norm();
  if (!(norm > 0.0)) return std::nullopt;
  const Vector u = s / norm;
  const Vector acts = w_p.transpose() * u;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (Index d = 0; d < acts.size(); ++d) {
    if (std::binary_search(members.begin(), members.end(), d)) {
      lo = std::min(lo, acts[d]);
    } else {
      hi = std::max(hi, acts[d]);
    }
  }
  if (!(lo > 0.0)) return std::nullopt;
  double gamma = 0.0;
  if (hi <= 0.0) {
    gamma = c > 0.0 ? 2.0 * c / lo : 1.0;
  } else {
    if (!(c > 0.0) || !(hi < lo)) return std::nullopt;
    gamma = 0.5 * (c / lo + c / hi);
  }
  Vector row = gamma * u;
  if (!row_realizes(row, members, w_p, c)) return std::nullopt;
  return row;
}

// maximize t s.t. <w, p_d> >= c + t (members), <w, p_d> <= c - t (others),
// |w_j| <= bound, t <= 1, with w = u - v.
std::optional<Vector> lp_row(const std::vector<Index>& members, const Matrix& w_p, double c) {
  const Index dim = w_p.rows();
  const Index n = w_p.cols();
  const Index vars = 2 * dim + 1;
  const Index rows = n + 2 * dim + 1;
  const double bound = 10.0 * (1.0 + c);
  Matrix a = Matrix::Zero(rows, vars);
  Vector b(rows);
  for (Index d = 0; d < n; ++d) {
    const bool member = std::binary_search(members.begin(), members.end(), d);
    const double sign = member ? -1.0 : 1.0;
    a.block(d, 0, 1, dim) = sign * w_p.col(d).transpose();
    a.block(d, dim, 1, dim) = -sign * w_p.col(d).transpose();
    a(d, 2 * dim) = 1.0;
    b[d] = member ? -c : c;
  }
  for (Index j = 0; j < 2 * dim; ++j) {
    a(n + j, j) = 1.0;
    b[n + j] = bound;
  }
  a(rows - 1, 2 * dim) = 1.0;
  b[rows - 1] = 1.0;
  Vector obj = Vector::Zero(vars);
  obj[2 * dim] = 1.0;
  const LpResult res = solve_lp(a, b, obj);
  if (res.status != LpStatus::optimal || !(res.value > 1e-9)) return std::nullopt;
  Vector row = res.x.head(dim) - res.x.segment(dim, dim);
  if (!row_realizes(row, members, w_p, c)) return std::nullopt;
  return row;
}

// Row with <row, p_d> = alpha g_d on members (alpha > 0 free) and the widest
// margin below c on non-members. The row is alpha e0 + N y, where e0 is the
// least-norm solution for g and N spans the members' orthogonal complement.
std::optional<Vector> stationary_row(const std::vector<Index>& members, const Vector& g,
                                     const Matrix& w_p, double c) {
  const Index dim = w_p.rows();
  const Index n = w_p.cols();
  Matrix pf(dim, static_cast<Index>(members.size()));
  for (std::size_t j = 0; j < members.size(); ++j) pf.col(static_cast<Index>(j)) = w_p.col(members[j]);
  Eigen::JacobiSVD<Matrix> svd(pf.transpose(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  svd.setThreshold(1e-10);
  const Vector e0 = svd.solve(g);
  if ((pf.transpose() * e0 - g).norm() > 1e-9 * (1.0 + g.norm())) return std::nullopt;
  const Index rank = svd.rank();
  const Matrix null = svd.matrixV().rightCols(dim - rank);
  const Index k = null.cols();
  const Index vars = 2 * k + 2;  // alpha, y+, y-, t
  const Index t_col = vars - 1;
  const Index rows = n + vars;
  const double bound = 10.0 * (1.0 + c);
  Matrix a = Matrix::Zero(rows, vars);
  Vector b = Vector::Zero(rows);
  Index row = 0;
  for (Index d = 0; d < n; ++d, ++row) {
    const auto it = std::lower_bound(members.begin(), members.end(), d);
    if (it != members.end() && *it == d) {
      a(row, 0) = -g[it - members.begin()];
      b[row] = -c;
    } else {
      a(row, 0) = e0.dot(w_p.col(d));
      const Vector proj = null.transpose() * w_p.col(d);
      a.block(row, 1, 1, k) = proj.transpose();
      a.block(row, 1 + k, 1, k) = -proj.transpose();
      b[row] = c;
    }
    a(row, t_col) = 1.0;
  }
  for (Index j = 0; j < vars; ++j, ++row) {
    a(row, j) = 1.0;
    b[row] = j == t_col ? 1.0 : bound;
  }
  Vector obj = Vector::Zero(vars);
  obj[t_col] = 1.0;
  const LpResult res = solve_lp(a, b, obj);
  if (res.status != LpStatus::optimal || !(res.value > 1e-9)) return std::nullopt;
  Vector out = res.x[0] * e0 + null * (res.x.segment(1, k) - res.x.segment(1 + k, k));
  if (!row_realizes(out, members, w_p, c)) return std::nullopt;
  return out;
}

double second_difference_min(const std::vector<double>& f) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k + 1 < f.size(); ++k) m = std::min(m, f[k - 1] - 2.0 * f[k] + f[k + 1]);
  return m;
}

Matrix random_direction(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix d(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) d(i, j) = normal(rng);
  }
  return d;
}

}  // namespace

RegionCheck check_region(const Matrix& encoder, const Matrix& w_p, const RegionSpec& region,
                         double boundary_tol) {
  require_dims(encoder.cols() == w_p.rows(), "check_region: encoder width != w_p rows");
  check_pattern_shape(region.pattern, encoder.rows(), w_p.cols(), "check_region");
  const Matrix acts = encoder * w_p;
  RegionCheck out;
  out.inside = true;
  out.margin = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < acts.rows(); ++i) {
    const bool dead = region.pattern.is_dead(i);
    for (Index d = 0; d < acts.cols(); ++d) {
      const double v = acts(i, d);
      const bool member = region.pattern.contains(i, d);
      if (member ? !(v > region.c) : v > region.c) out.inside = false;
      if (dead) continue;
      const double gap = std::abs(v - region.c);
      out.margin = std::min(out.margin, gap);
      if (gap <= boundary_tol) out.on_boundary = true;
    }
  }
  return out;
}

SdlModel construct_global_minimum(const FeatureMatrix& w_p, const FeatureMatrix& w_r, Index n_q,
                                  double c) {
  const Index n = w_p.count();
  require_dims(w_r.count() == n, "construct_global_minimum: w_p and w_r feature counts differ");
  require(n_q >= n, "construct_global_minimum: n_q must be >= n");
  require(c >= 0.0, "construct_global_minimum: threshold must be >= 0");
  SdlModel m;
  m.w_e = Matrix::Zero(n_q, w_p.dim());
  m.w_e.topRows(n) = w_p.data.transpose();
  m.w_d = Matrix::Zero(w_r.dim(), n_q);
  m.w_d.leftCols(n) = w_r.data;
  m.activation = Activation::jump(c);
  m.kind = w_p.dim() == w_r.dim() ? ModelKind::sae : ModelKind::transcoder;
  return m;
}

InterferenceBound global_minimum_bound(const FeatureMatrix& w_p, const FeatureMatrix& w_r,
                                       const FeatureWeights& weights, double c) {
  const Index n = w_p.count();
  require_dims(w_r.count() == n, "global_minimum_bound: feature counts differ");
  require_dims(weights.m_d.size() == n, "global_minimum_bound: weight count != n");
  const Matrix gram = w_p.data.transpose() * w_p.data;
  InterferenceBound out;
  out.interference = n >= 2 ? max_interference(w_p.data) : 0.0;
  out.k_d.assign(static_cast<std::size_t>(n), 0);
  for (Index d = 0; d < n; ++d) {
    Vector resid = Vector::Zero(w_r.dim());
    Index k_d = 0;
    for (Index k = 0; k < n; ++k) {
      if (!(gram(k, d) > c)) continue;
      ++k_d;
      if (k != d) resid += gram(k, d) * w_r.column(k);
    }
    out.k_d[static_cast<std::size_t>(d)] = k_d;
    out.residual_sum += weights.m_d[d] * resid.squaredNorm();
    const double extra = static_cast<double>(k_d - 1);
    out.bound += weights.m_d[d] * extra * extra;
  }
  out.bound *= out.interference * out.interference;
  return out;
}

ZeroLossCheck check_zero_loss_conditions(const SdlModel& model, const FeatureMatrix& w_p,
                                         const FeatureMatrix& w_r, double tol) {
  ZeroLossCheck out;
  out.residuals = feature_residual_norms(model, w_p, w_r);
  out.zero_loss = (out.residuals.array() <= tol).all();
  return out;
}

std::optional<Matrix> encoder_for_pattern(const ActivationPattern& pattern, const Matrix& w_p,
                                          double c, bool require_partition) {
  require(c >= 0.0, "encoder_for_pattern: threshold must be >= 0");
  check_pattern_shape(pattern, pattern.neurons(), w_p.cols(), "encoder_for_pattern");
  if (require_partition) {
    require(pattern.is_partition(w_p.cols()), "encoder_for_pattern: pattern is not a partition");
  }
  Matrix enc = Matrix::Zero(pattern.neurons(), w_p.rows());
  for (Index i = 0; i < pattern.neurons(); ++i) {
    const auto& members = pattern.sets[static_cast<std::size_t>(i)];
    if (members.empty()) {
      // The zero row is dead for any c >= 0.
      continue;
    }
    std::optional<Vector> row = heuristic_row(members, w_p, c);
    if (!row) row = lp_row(members, w_p, c);
    if (!row) return std::nullopt;
    enc.row(i) = row->transpose();
  }
  return enc;
}

std::optional<Matrix> stationary_encoder_for_pattern(const ActivationPattern& pattern,
                                                     const FeatureMatrix& w_p,
                                                     const FeatureMatrix& w_r,
                                                     const FeatureWeights& weights, double c) {
  const Index n = w_p.count();
  require(c >= 0.0, "stationary_encoder_for_pattern: threshold must be >= 0");
  require_dims(w_r.count() == n, "stationary_encoder_for_pattern: feature counts differ");
  require_dims(weights.m_d.size() == n, "stationary_encoder_for_pattern: weight count != n");
  check_pattern_shape(pattern, pattern.neurons(), n, "stationary_encoder_for_pattern");
  require(pattern.is_partition(n), "stationary_encoder_for_pattern: pattern is not a partition");
  Matrix enc = Matrix::Zero(pattern.neurons(), w_p.dim());
  for (Index i = 0; i < pattern.neurons(); ++i) {
    const auto& members = pattern.sets[static_cast<std::size_t>(i)];
    if (members.empty()) continue;
    Matrix gram = Matrix::Zero(w_r.dim(), w_r.dim());
    for (Index d : members) gram += weights.m_d[d] * w_r.column(d) * w_r.column(d).transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    std::optional<Vector> row;
    for (Index j = gram.cols() - 1; j >= 0 && !row; --j) {
      if (!(eig.eigenvalues()[j] > 1e-12 * (1.0 + eig.eigenvalues().maxCoeff()))) break;
      Vector g(static_cast<Index>(members.size()));
      for (std::size_t m = 0; m < members.size(); ++m) {
        g[static_cast<Index>(m)] = w_r.column(members[m]).dot(eig.eigenvectors().col(j));
      }
      if (g.sum() < 0.0) g = -g;
      if (!(g.minCoeff() > 1e-9)) continue;
      row = stationary_row(members, g, w_p.data, c);
    }
    if (!row) return std::nullopt;
    enc.row(i) = row->transpose();
  }
  return enc;
}

SdlModel construct_partial_minimum(const RegionSpec& region, const FeatureMatrix& w_p,
                                   const FeatureMatrix& w_r, const FeatureWeights& weights,
                                   const std::optional<Matrix>& witness) {
  const Index n = w_p.count();
  require_dims(w_r.count() == n, "construct_partial_minimum: feature counts differ");
  require_dims(weights.m_d.size() == n, "construct_partial_minimum: weight count != n");
  require(region.pattern.is_partition(n), "construct_partial_minimum: pattern is not a partition");
  Matrix enc;
  if (witness) {
    require_dims(witness->rows() == region.pattern.neurons() && witness->cols() == w_p.dim(),
                 "construct_partial_minimum: witness shape mismatch");
    require(check_region(*witness, w_p.data, region).inside,
            "construct_partial_minimum: witness violates the region");
    enc = *witness;
  } else {
    auto found = stationary_encoder_for_pattern(region.pattern, w_p, w_r, weights, region.c);
    require(found.has_value(), "construct_partial_minimum: no stationary encoder for this pattern");
    enc = std::move(*found);
  }
  const Matrix z = region_latents(enc, w_p.data, region.pattern);
  SdlModel m;
  m.w_e = enc;
  m.w_d = Matrix::Zero(w_r.dim(), enc.rows());
  m.activation = Activation::jump(region.c);
  m.kind = w_p.dim() == w_r.dim() ? ModelKind::sae : ModelKind::transcoder;
  for (Index i = 0; i < enc.rows(); ++i) {
    Vector num = Vector::Zero(w_r.dim());
    double den = 0.0;
    for (Index d : region.pattern.sets[static_cast<std::size_t>(i)]) {
      num += weights.m_d[d] * z(i, d) * w_r.column(d);
      den += weights.m_d[d] * z(i, d) * z(i, d);
    }
    if (den > 0.0) m.w_d.col(i) = num / den;
  }
  return m;
}

Vector normal_equation_residual(const SdlModel& model, const FeatureMatrix& w_p,
                                const FeatureMatrix& w_r, const FeatureWeights& weights,
                                const RegionSpec& region) {
  check_pattern_shape(region.pattern, model.n_q(), w_p.count(), "normal_equation_residual");
  const Matrix z = region_latents(model.w_e, w_p.data, region.pattern);
  Vector out = Vector::Zero(model.n_q());
  for (Index i = 0; i < model.n_q(); ++i) {
    Vector acc = Vector::Zero(w_r.dim());
    for (Index d : region.pattern.sets[static_cast<std::size_t>(i)]) {
      acc += weights.m_d[d] * z(i, d) * (w_r.column(d) - model.w_d.col(i) * z(i, d));
    }
    out[i] = acc.norm();
  }
  return out;
}

std::string to_string(CertClass c) {
  switch (c) {
    case CertClass::global: return "global";
    case CertClass::partial: return "partial";
    case CertClass::neither: return "neither";
  }
  return "neither";
}

RegionGradients approx_loss_gradients(const SdlModel& model, const FeatureMatrix& w_p,
                                      const FeatureMatrix& w_r, const FeatureWeights& weights,
                                      const RegionSpec& region) {
  model.validate();
  require_threshold_activation(model, region.c, "approx_loss_gradients");
  check_pattern_shape(region.pattern, model.n_q(), w_p.count(), "approx_loss_gradients");
  require_dims(weights.m_d.size() == w_p.count(), "approx_loss_gradients: weight count != n");
  const Matrix z = region_latents(model.w_e, w_p.data, region.pattern);
  const Matrix resid = w_r.data - model.w_d * z;
  const Matrix weighted = resid * weights.m_d.asDiagonal();
  RegionGradients g;
  g.w_d = -2.0 * weighted * z.transpose();
  Matrix coef = -2.0 * model.w_d.transpose() * weighted;  // n_q x n
  for (Index i = 0; i < coef.rows(); ++i) {
    for (Index d = 0; d < coef.cols(); ++d) {
      if (!region.pattern.contains(i, d)) coef(i, d) = 0.0;
    }
  }
  g.w_e = coef * w_p.data.transpose();
  return g;
}

CertReport certify_stationarity(const SdlModel& model, const FeatureMatrix& w_p,
                                const FeatureMatrix& w_r, const FeatureWeights& weights,
                                const RegionSpec& region, double tol) {
  const RegionGradients g = approx_loss_gradients(model, w_p, w_r, weights, region);
  const RegionCheck rc = check_region(model.w_e, w_p.data, region);
  CertReport rep;
  rep.grad_norm_wd = g.w_d.norm();
  rep.grad_norm_we = g.w_e.norm();
  rep.loss = approx_loss(model, w_p, w_r, weights);
  rep.region_ok = rc.inside;
  rep.on_boundary = rc.on_boundary;
  if (rep.loss <= tol) {
    rep.classification = CertClass::global;
  } else if (rep.region_ok && !rep.on_boundary && rep.grad_norm_wd <= tol && rep.grad_norm_we <= tol) {
    rep.classification = CertClass::partial;
  }
  return rep;
}

AbsorptionResult absorption_construct(const Matrix& encoder, const ActivationPattern& pattern,
                                      Index parent, double c, const Matrix& w_p,
                                      double interference) {
  require(c >= 0.0, "absorption: threshold must be >= 0");
  require(interference < 1.0, "absorption: interference must be < 1");
  require_dims(encoder.cols() == w_p.rows(), "absorption: encoder width != w_p rows");
  check_pattern_shape(pattern, encoder.rows(), w_p.cols(), "absorption");
  require(parent >= 0 && parent < encoder.rows(), "absorption: parent index out of range");
  const auto& members = pattern.sets[static_cast<std::size_t>(parent)];
  require(members.size() >= 2, "absorption: parent neuron needs at least two features");
  require(threshold_pattern(encoder, w_p, c) == pattern, "absorption: encoder does not realize the pattern");

  AbsorptionResult out;
  out.parent = parent;
  Matrix enc = encoder;
  const double m = std::max(interference, 0.0);

  auto member_acts = [&] {
    std::vector<double> a;
    for (Index d : members) a.push_back(enc.row(parent).dot(w_p.col(d)));
    return a;
  };
  auto argmin = [](const std::vector<double>& a) {
    std::size_t j = 0;
    for (std::size_t k = 1; k < a.size(); ++k) {
      if (a[k] < a[j]) j = k;
    }
    return j;
  };
  auto runner_up = [](const std::vector<double>& a, std::size_t j) {
    double r = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (k != j) r = std::min(r, a[k]);
    }
    return r;
  };

  std::vector<double> a = member_acts();
  std::size_t j = argmin(a);
  double a_min = a[j];
  require(a_min > c, "absorption: a_min must exceed the threshold");
  double lambda = (c + a_min) / (2.0 * a_min);
  double eps = 1e-6 * a_min;

  // Tied (or nearly tied) minima cannot be split by a threshold; tilt the
  // parent row away from the chosen feature first.
  if (lambda * (runner_up(a, j) - a_min) <= 2.0 * eps) {
    const Index dj = members[j];
    const Vector acts = w_p.transpose() * enc.row(parent).transpose();
    double room = a_min - c;
    for (Index d = 0; d < w_p.cols(); ++d) {
      if (std::binary_search(members.begin(), members.end(), d)) continue;
      const double ip = w_p.col(dj).dot(w_p.col(d));
      if (ip < 0.0) room = std::min(room, (c - acts[d]) / -ip);
    }
    require(room > 0.0, "absorption: tied activations sit on the region boundary");
    out.tilt = 0.5 * room;
    enc.row(parent) -= out.tilt * w_p.col(dj).transpose();
    a = member_acts();
    j = argmin(a);
    a_min = a[j];
    lambda = (c + a_min) / (2.0 * a_min);
    eps = 1e-6 * a_min;
  }

  const Index j_star = members[j];
  const double c2 = 0.5 * (c + a_min) + eps;
  enc.row(parent) *= lambda;

  // Raising the threshold to c2 would silence weakly active neurons; rescale
  // every other live row so its own pattern survives.
  for (Index i = 0; i < enc.rows(); ++i) {
    if (i == parent || pattern.is_dead(i)) continue;
    double scale = 0.0;
    if (c > 0.0) {
      scale = c2 / c;
    } else {
      double lo = std::numeric_limits<double>::infinity();
      for (Index d : pattern.sets[static_cast<std::size_t>(i)]) lo = std::min(lo, enc.row(i).dot(w_p.col(d)));
      scale = 2.0 * c2 / lo;
    }
    enc.row(i) *= scale;
  }

  const double alpha = 2.0 * c2 / (1.0 + m);
  Matrix grown(enc.rows() + 1, enc.cols());
  grown.topRows(enc.rows()) = enc;
  grown.row(enc.rows()) = alpha * w_p.col(j_star).transpose();

  std::vector<std::vector<Index>> sets = pattern.sets;
  auto& ps = sets[static_cast<std::size_t>(parent)];
  ps.erase(std::find(ps.begin(), ps.end(), j_star));
  sets.push_back({j_star});

  out.encoder = std::move(grown);
  out.c2 = c2;
  out.expected = ActivationPattern(std::move(sets));
  out.realized = threshold_pattern(out.encoder, w_p, c2);
  out.separated = j_star;
  out.a_min = a_min;
  out.lambda = lambda;
  out.alpha = alpha;
  out.lambda_ok = lambda > c / a_min && lambda < 1.0;
  out.shrink_ok = lambda * a_min < c2;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (k != j && !(lambda * a[k] > c2)) out.shrink_ok = false;
  }
  out.alpha_ok = alpha > c2 && c2 > alpha * m;
  return out;
}

ProbeReport biconvexity_probe(const SdlModel& model, const FeatureMatrix& w_p,
                              const FeatureMatrix& w_r, const FeatureWeights& weights,
                              const RegionSpec& region, int trials, std::uint64_t seed, int points,
                              double tol) {
  require(trials >= 1, "biconvexity_probe: trials must be >= 1");
  require(points >= 5, "biconvexity_probe: need at least five points per segment");
  require_threshold_activation(model, region.c, "biconvexity_probe");
  const RegionCheck rc = check_region(model.w_e, w_p.data, region);
  require(rc.inside && !rc.on_boundary, "biconvexity_probe: encoder must lie in the region interior");

  ProbeReport rep;
  rep.trials = trials;
  rep.min_second_diff_wd = std::numeric_limits<double>::infinity();
  rep.min_second_diff_we = std::numeric_limits<double>::infinity();
  Rng rng = make_rng(seed, 0xB1C);
  std::vector<double> f(static_cast<std::size_t>(points));
  auto t_at = [&](int k, double h) { return -h + 2.0 * h * k / (points - 1); };

  for (int trial = 0; trial < trials; ++trial) {
    Matrix dir = random_direction(model.n_r(), model.n_q(), rng);
    dir /= dir.norm();
    SdlModel probe = model;
    for (int k = 0; k < points; ++k) {
      probe.w_d = model.w_d + t_at(k, 1.0) * dir;
      f[static_cast<std::size_t>(k)] = approx_loss(probe, w_p, w_r, weights);
    }
    rep.min_second_diff_wd = std::min(rep.min_second_diff_wd, second_difference_min(f));

    Matrix edir = random_direction(model.n_q(), model.n_p(), rng);
    for (Index i = 0; i < model.n_q(); ++i) {
      if (region.pattern.is_dead(i)) edir.row(i).setZero();
    }
    const double en = edir.norm();
    if (!(en > 0.0)) continue;
    edir /= en;
    probe = model;
    double h = 1.0;
    bool done = false;
    for (int shrink = 0; shrink <= 10 && !done; ++shrink) {
      bool inside = true;
      for (int k = 0; k < points && inside; ++k) {
        probe.w_e = model.w_e + t_at(k, h) * edir;
        const RegionCheck c = check_region(probe.w_e, w_p.data, region);
        inside = c.inside && !c.on_boundary;
        if (inside) f[static_cast<std::size_t>(k)] = approx_loss(probe, w_p, w_r, weights);
      }
      if (inside) {
        done = true;
        rep.min_second_diff_we = std::min(rep.min_second_diff_we, second_difference_min(f));
      } else if (shrink < 10) {
        h *= 0.5;
        ++rep.we_shrinks;
      }
    }
    if (!done) ++rep.we_gave_up;
  }
  rep.convex_ok = rep.min_second_diff_wd >= -tol && rep.we_gave_up == 0 &&
                  (rep.min_second_diff_we >= -tol || std::isinf(rep.min_second_diff_we));
  return rep;
}

CrossingReport boundary_crossing_probe(int trials, std::uint64_t seed, int points, double tol) {
  require(trials >= 1, "boundary_crossing_probe: trials must be >= 1");
  require(points >= 5, "boundary_crossing_probe: need at least five points per segment");
  FeatureMatrix eye{Matrix::Identity(2, 2), MatrixRole::input, 1.0};
  FeatureMatrix eye_r{Matrix::Identity(2, 2), MatrixRole::target, 1.0};
  FeatureWeights weights{Vector::Ones(2), false};
  SdlModel model;
  model.w_d = Matrix::Identity(2, 2);
  model.w_e = Matrix::Zero(2, 2);
  model.activation = Activation::jump(0.0);

  CrossingReport rep;
  rep.trials = trials;
  rep.min_second_diff = std::numeric_limits<double>::infinity();
  Rng rng = make_rng(seed, 0xC055);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> f(static_cast<std::size_t>(points));
  for (int trial = 0; trial < trials; ++trial) {
    Matrix e0(2, 2), dir(2, 2);
    bool crosses = false;
    while (!crosses) {
      for (Index k = 0; k < 4; ++k) e0(k % 2, k / 2) = unif(rng);
      dir = random_direction(2, 2, rng);
      const Matrix lo = e0 - dir;
      const Matrix hi = e0 + dir;
      crosses = ((lo.array() > 0.0) != (hi.array() > 0.0)).any();
    }
    for (int k = 0; k < points; ++k) {
      model.w_e = e0 + (-1.0 + 2.0 * k / (points - 1)) * dir;
      f[static_cast<std::size_t>(k)] = approx_loss(model, eye, eye_r, weights);
    }
    const double m = second_difference_min(f);
    rep.min_second_diff = std::min(rep.min_second_diff, m);
    if (m < -tol) ++rep.violations;
  }
  return rep;
}

}  // namespace lrb
