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

#include "lrb/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "lrb/losses.hpp"

namespace lrb {

namespace {

constexpr std::uint64_t kStreamPartial = 0x9A27;
constexpr std::uint64_t kStreamAbsorb = 0xAB50;
constexpr std::uint64_t kStreamGapData = 0x6A9D;

template <class F>
CheckResult timed(const std::string& name, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckResult r = body();
  r.name = name;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

FeatureWeights unit_weights(Index n) {
  FeatureWeights w;
  w.m_d = Vector::Ones(n);
  return w;
}

FeatureMatrix identity_features(Index n, MatrixRole role) {
  FeatureMatrix f;
  f.data = Matrix::Identity(n, n);
  f.role = role;
  return f;
}

std::vector<CheckResult> global_suite(std::uint64_t seed) {
  std::vector<CheckResult> out;
  out.push_back(timed("orthogonal", [] {
    const FeatureMatrix w = identity_features(3, MatrixRole::input);
    const FeatureMatrix r = identity_features(3, MatrixRole::target);
    const SdlModel m = construct_global_minimum(w, r, 5);
    const double loss = approx_loss(m, w, r, unit_weights(3));
    const ZeroLossCheck z = check_zero_loss_conditions(m, w, r);
    CheckResult c;
    c.values = {{"loss", loss}, {"max_residual", z.residuals.maxCoeff()}};
    c.pass = loss <= 1e-10 && z.zero_loss;
    return c;
  }));

  const FeatureMatrix w_p = low_interference_matrix(16, 20, 0.1, seed);
  const FeatureMatrix w_r = identity_features(20, MatrixRole::target);
  const FeatureWeights ones = unit_weights(20);

  out.push_back(timed("interference", [&] {
    const SdlModel m = construct_global_minimum(w_p, w_r, 24);
    const double loss = approx_loss(m, w_p, w_r, ones);
    const InterferenceBound b = global_minimum_bound(w_p, w_r, ones);
    const Index k_max = *std::max_element(b.k_d.begin(), b.k_d.end());
    CheckResult c;
    c.values = {{"loss", loss},
                {"residual_sum", b.residual_sum},
                {"bound", b.bound},
                {"interference", b.interference},
                {"k_max", static_cast<double>(k_max)}};
    c.pass = std::abs(loss - b.residual_sum) <= 1e-8 && loss <= b.bound + 1e-8 && k_max >= 2;
    if (k_max < 2) c.note = "fixture has no positive interference";
    return c;
  }));

  out.push_back(timed("topk1", [&] {
    SdlModel m = construct_global_minimum(w_p, w_r, 24);
    m.activation = Activation::topk(1, true);
    const double loss = approx_loss(m, w_p, w_r, ones);
    CheckResult c;
    c.values = {{"loss", loss}};
    c.pass = loss <= 1e-10;
    return c;
  }));
  return out;
}

std::vector<CheckResult> partial_suite(const VerifySpec& spec, std::uint64_t seed) {
  std::vector<CheckResult> out;
  out.push_back(timed("example", [] {
    const RegionFixture f = two_feature_fixture();
    const SdlModel m = construct_partial_minimum(f.region, f.w_p, f.w_r, f.weights, f.encoder);
    const CertReport rep = certify_stationarity(m, f.w_p, f.w_r, f.weights, f.region, 1e-9);
    Matrix expected(2, 2);
    expected << 0.5, 0.0, 0.5, 0.0;
    CheckResult c;
    c.values = {{"loss", rep.loss},
                {"grad_wd", rep.grad_norm_wd},
                {"grad_we", rep.grad_norm_we},
                {"decoder_error", (m.w_d - expected).cwiseAbs().maxCoeff()}};
    c.pass = std::abs(rep.loss - 1.0) <= 1e-9 && rep.grad_norm_wd <= 1e-9 &&
             rep.grad_norm_we <= 1e-9 && rep.classification == CertClass::partial;
    c.note = to_string(rep.classification);
    return c;
  }));

  out.push_back(timed("random", [&] {
    int certified = 0;
    int draws = 0;
    int unrealizable = 0;
    double worst_grad = 0.0;
    double worst_normal = 0.0;
    double min_loss = std::numeric_limits<double>::infinity();
    for (int t = 0; t < spec.partial_trials; ++t) {
      const PartialInstance inst = random_partial_instance(mix_seed(seed, static_cast<std::uint64_t>(t)));
      const RegionFixture& f = inst.fixture;
      draws += inst.draws;
      unrealizable += inst.unrealizable;
      const SdlModel m = construct_partial_minimum(f.region, f.w_p, f.w_r, f.weights, f.encoder);
      const CertReport rep = certify_stationarity(m, f.w_p, f.w_r, f.weights, f.region);
      const double normal =
          normal_equation_residual(m, f.w_p, f.w_r, f.weights, f.region).maxCoeff();
      worst_grad = std::max({worst_grad, rep.grad_norm_wd, rep.grad_norm_we});
      worst_normal = std::max(worst_normal, normal);
      min_loss = std::min(min_loss, rep.loss);
      if (rep.classification == CertClass::partial && normal <= 1e-10 && rep.loss > 1e-6) {
        ++certified;
      }
    }
    CheckResult c;
    c.values = {{"trials", spec.partial_trials},
                {"certified", certified},
                {"draws", draws},
                {"unrealizable", unrealizable},
                {"max_grad", worst_grad},
                {"max_normal_residual", worst_normal},
                {"min_loss", min_loss}};
    c.pass = certified == spec.partial_trials;
    return c;
  }));
  return out;
}

std::vector<CheckResult> absorption_suite(const VerifySpec& spec, std::uint64_t seed) {
  return {timed("hierarchical", [&] {
    int pattern_ok = 0, lambda_ok = 0, shrink_ok = 0, alpha_ok = 0, tilted = 0, draws = 0;
    double worst_m = 0.0;
    for (int t = 0; t < spec.absorption_trials; ++t) {
      const AbsorptionInstance inst =
          random_absorption_instance(mix_seed(seed, static_cast<std::uint64_t>(t)));
      draws += inst.draws;
      worst_m = std::max(worst_m, inst.interference);
      const AbsorptionResult r = absorption_construct(inst.encoder, inst.pattern, inst.parent, inst.c,
                                                      inst.w_p, inst.interference);
      pattern_ok += r.pattern_ok();
      lambda_ok += r.lambda_ok;
      shrink_ok += r.shrink_ok;
      alpha_ok += r.alpha_ok;
      tilted += r.tilt != 0.0;
    }
    const int n = spec.absorption_trials;
    CheckResult c;
    c.values = {{"trials", n},           {"pattern_ok", pattern_ok}, {"lambda_ok", lambda_ok},
                {"shrink_ok", shrink_ok}, {"alpha_ok", alpha_ok},     {"tilted", tilted},
                {"draws", draws},         {"max_interference", worst_m}};
    c.pass = pattern_ok == n && lambda_ok == n && shrink_ok == n && alpha_ok == n;
    return c;
  })};
}

CheckResult probe_check(const RegionFixture& f, const SdlModel& m, int trials, std::uint64_t seed) {
  const ProbeReport p = biconvexity_probe(m, f.w_p, f.w_r, f.weights, f.region, trials, seed);
  CheckResult c;
  c.values = {{"trials", p.trials},
              {"min_second_diff_wd", p.min_second_diff_wd},
              {"min_second_diff_we", p.min_second_diff_we},
              {"we_shrinks", p.we_shrinks},
              {"we_gave_up", p.we_gave_up}};
  c.pass = p.convex_ok;
  return c;
}

std::vector<CheckResult> biconvex_suite(const VerifySpec& spec, std::uint64_t seed) {
  std::vector<CheckResult> out;
  out.push_back(timed("example_region", [&] {
    const RegionFixture f = two_feature_fixture();
    const SdlModel m = construct_partial_minimum(f.region, f.w_p, f.w_r, f.weights, f.encoder);
    return probe_check(f, m, spec.probe_trials, seed);
  }));
  out.push_back(timed("random_region", [&] {
    const RegionFixture f = random_partial_instance(seed).fixture;
    const SdlModel m = construct_partial_minimum(f.region, f.w_p, f.w_r, f.weights, f.encoder);
    return probe_check(f, m, spec.probe_trials, mix_seed(seed, 1));
  }));
  out.push_back(timed("crossing", [&] {
    const CrossingReport r = boundary_crossing_probe(spec.probe_trials, seed);
    CheckResult c;
    c.values = {{"trials", r.trials},
                {"violations", r.violations},
                {"min_second_diff", r.min_second_diff}};
    c.pass = r.violations >= 1;
    return c;
  }));
  return out;
}

std::vector<CheckResult> gap_suite(const VerifySpec& spec, std::uint64_t seed) {
  require(spec.gap_sparsities.size() >= 3, "verify gap: need at least three sparsity values");
  return {timed("scaling", [&] {
    const FeatureMatrix w_p = low_interference_matrix(spec.gap_n_p, spec.gap_n, 0.1, seed);
    const SdlModel m = construct_global_minimum(w_p, w_p, spec.gap_n);
    BenchConfig base;
    base.n = spec.gap_n;
    base.n_p = base.n_r = spec.gap_n_p;
    const GapReport g = approximation_gap(m, w_p, w_p, base, spec.gap_sparsities, spec.gap_samples,
                                          mix_seed(seed, kStreamGapData));
    CheckResult c;
    c.values["samples"] = static_cast<double>(spec.gap_samples);
    for (std::size_t i = 0; i < g.points.size(); ++i) {
      const std::string key = "s" + std::to_string(i);
      c.values[key + "_sparsity"] = g.points[i].sparsity;
      c.values[key + "_gap"] = g.points[i].gap;
      c.values[key + "_stderr"] = g.points[i].gap_stderr;
      c.values[key + "_approx"] = g.points[i].approx;
    }
    c.pass = g.slope.has_value() && *g.slope >= 1.5 && *g.slope <= 2.5 && !g.below_noise_floor;
    if (g.slope) {
      c.values["slope"] = *g.slope;
    } else {
      c.note = "slope undefined";
    }
    if (g.below_noise_floor) c.note = "gap below noise floor";
    return c;
  })};
}

std::string format_value(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

bool VerifyReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

const CheckResult* VerifyReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

std::string VerifyReport::to_kv() const {
  std::ostringstream os;
  os << "seed=" << seed << '\n';
  for (const auto& c : checks) {
    const std::string prefix = c.name + '.';
    os << prefix << "pass=" << (c.pass ? 1 : 0) << '\n';
    for (const auto& [k, v] : c.values) os << prefix << k << '=' << format_value(v) << '\n';
    if (!c.note.empty()) os << prefix << "note=" << c.note << '\n';
  }
  os << "pass=" << (pass() ? 1 : 0) << '\n';
  return os.str();
}

std::string VerifyReport::to_table() const {
  std::size_t width = 5;
  for (const auto& c : checks) width = std::max(width, c.name.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width) + 2) << "check" << std::setw(6) << "pass"
     << std::setw(10) << "seconds" << "note\n";
  for (const auto& c : checks) {
    os << std::left << std::setw(static_cast<int>(width) + 2) << c.name << std::setw(6)
       << (c.pass ? "yes" : "NO") << std::setw(10) << std::fixed << std::setprecision(3) << c.seconds
       << c.note << '\n';
    os.unsetf(std::ios::fixed);
  }
  return os.str();
}

const std::vector<std::string>& verify_suites() {
  static const std::vector<std::string> names{"global", "partial", "absorption", "biconvex", "gap", "all"};
  return names;
}

VerifyReport run_verify(const std::string& suite, const VerifySpec& spec, std::uint64_t seed) {
  const auto& names = verify_suites();
  require(std::find(names.begin(), names.end(), suite) != names.end(),
          "verify: unknown suite '" + suite + "'");
  VerifyReport rep;
  rep.suite = suite;
  rep.seed = seed;
  auto add = [&](const std::string& name, std::vector<CheckResult> checks) {
    for (auto& c : checks) {
      c.name = name + '.' + c.name;
      rep.checks.push_back(std::move(c));
    }
  };
  const bool all = suite == "all";
  if (all || suite == "gap") {
    // Checked up front so a bad grid fails before any other work.
    require(spec.gap_sparsities.size() >= 3, "verify gap: need at least three sparsity values");
  }
  if (all || suite == "global") add("global", global_suite(seed));
  if (all || suite == "partial") add("partial", partial_suite(spec, seed));
  if (all || suite == "absorption") add("absorption", absorption_suite(spec, seed));
  if (all || suite == "biconvex") add("biconvex", biconvex_suite(spec, seed));
  if (all || suite == "gap") add("gap", gap_suite(spec, seed));
  return rep;
}

RegionFixture two_feature_fixture() {
  RegionFixture f;
  f.w_p = identity_features(2, MatrixRole::input);
  f.w_r = identity_features(2, MatrixRole::target);
  f.weights = unit_weights(2);
  f.region = RegionSpec{ActivationPattern({{0, 1}, {}}), 0.0};
  f.encoder = Matrix(2, 2);
  f.encoder << 1.0, 1.0, 0.0, 0.0;
  return f;
}

FeatureMatrix low_interference_matrix(Index dim, Index n, double bound, std::uint64_t seed) {
  BenchConfig cfg;
  cfg.n = n;
  cfg.n_p = cfg.n_r = dim;
  cfg.max_interference = bound;
  cfg.seed = seed;
  return minimize_interference(init_feature_matrix(dim, n, mix_seed(seed, kStreamWp)), cfg).matrix;
}

PartialInstance random_partial_instance(std::uint64_t seed) {
  constexpr Index n = 10, n_p = 8, n_q = 12, n_r = 10;
  BenchConfig bc;
  bc.n = n;
  bc.n_p = n_p;
  bc.n_r = n_r;
  bc.sparsity = 0.9;
  PartialInstance out;
  out.fixture.weights = compute_m_d(bc);
  Rng rng = make_rng(seed, kStreamPartial);
  std::uniform_int_distribution<Index> neuron(0, n_q - 1);
  for (;;) {
    ++out.draws;
    const std::uint64_t draw = rng();
    FeatureMatrix w_p = init_feature_matrix(n_p, n, mix_seed(draw, kStreamWp));
    FeatureMatrix w_r = init_feature_matrix(n_r, n, mix_seed(draw, kStreamWr), MatrixRole::target);
    std::vector<std::vector<Index>> sets(static_cast<std::size_t>(n_q));
    for (Index d = 0; d < n; ++d) sets[static_cast<std::size_t>(neuron(rng))].push_back(d);
    ActivationPattern pattern(std::move(sets));
    if (!pattern.polysemantic()) continue;
    auto enc = stationary_encoder_for_pattern(pattern, w_p, w_r, out.fixture.weights, 0.0);
    if (!enc) {
      ++out.unrealizable;
      continue;
    }
    out.fixture.w_p = std::move(w_p);
    out.fixture.w_r = std::move(w_r);
    out.fixture.region = RegionSpec{std::move(pattern), 0.0};
    out.fixture.encoder = std::move(*enc);
    return out;
  }
}

AbsorptionInstance random_absorption_instance(std::uint64_t seed) {
  constexpr Index n = 10, n_p = 12;
  Rng rng = make_rng(seed, kStreamAbsorb);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  AbsorptionInstance out;
  out.c = seed % 2 == 0 ? 0.0 : 0.1 + 0.3 * unit(rng);
  for (;;) {
    ++out.draws;
    const double target = 0.05 + 0.23 * unit(rng);
    const FeatureMatrix w = low_interference_matrix(n_p, n, target, rng());
    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index d = 0; d < n; ++d) order[static_cast<std::size_t>(d)] = d;
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t family = 2 + rng() % 2;  // parent plus one or two children
    std::vector<std::vector<Index>> sets;
    sets.emplace_back(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(family));
    for (std::size_t j = family; j < order.size(); ++j) sets.push_back({order[j]});
    ActivationPattern pattern(std::move(sets));
    auto enc = encoder_for_pattern(pattern, w.data, out.c);
    if (!enc) continue;
    out.w_p = w.data;
    out.interference = max_interference(w.data);
    out.pattern = std::move(pattern);
    out.encoder = std::move(*enc);
    out.parent = 0;
    return out;
  }
}

ResamplingFixture resampling_fixture(std::uint64_t seed) {
  ResamplingFixture f;
  BenchConfig bc;
  bc.n = 2;
  bc.n_p = bc.n_r = 2;
  bc.sparsity = 0.5;
  bc.n_samples = 2000;
  bc.seed = mix_seed(seed, 1);
  const FeatureMatrix eye{Matrix::Identity(2, 2)};
  f.train = synthesize(eye, eye, sample_features(bc)).inputs;
  bc.n_samples = 500;
  bc.seed = mix_seed(seed, 2);
  f.heldout = synthesize(eye, eye, sample_features(bc)).inputs;
  f.model.kind = ModelKind::sae;
  f.model.activation = Activation::relu();
  f.model.w_e.resize(2, 2);
  f.model.w_e << 0.5, 0.5, -0.5, -0.5;
  f.model.w_d = f.model.w_e.transpose();
  f.config.steps = 600;
  f.config.batch_size = 64;
  f.config.lr = 1e-2;
  f.config.dead_window = 50;
  f.config.eval_every = 0;
  f.config.seed = seed;
  return f;
}

}  // namespace lrb
