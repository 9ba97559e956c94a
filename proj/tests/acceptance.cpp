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

// Acceptance gate: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset. Exit status is 0 only if every selected
// criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "fd_cases.hpp"
#include "lrb/bench.hpp"
#include "lrb/experiment.hpp"
#include "lrb/metrics.hpp"
#include "lrb/theory.hpp"
#include "lrb/verify.hpp"
#include "test_support.hpp"

using namespace lrb;
using namespace lrb::testing;

namespace {

// Pinned tolerances.
constexpr double kNormTol = 1e-6;
constexpr double kGramSlack = 1e-6;
constexpr double kSigmas = 4.0;
constexpr double kBenchSeconds = 60.0;
constexpr double kExampleTol = 1e-9;
constexpr double kExampleSeconds = 1.0;
constexpr double kNormalTol = 1e-10;
constexpr double kStationaryTol = 1e-7;
constexpr double kNonzeroLoss = 1e-6;
constexpr double kPartialSeconds = 10.0;
constexpr double kFdTol = 1e-4;
constexpr int kFdPerTerm = 20;
constexpr double kSlopeLo = 1.5, kSlopeHi = 2.5;
constexpr double kGapSeconds = 300.0;
constexpr double kTopkMgt = 0.70;
constexpr double kFaMgtSlack = 0.02;
constexpr double kFaMipSlack = 0.005;
constexpr double kReluMgt = 0.05;
constexpr double kTableSeconds = 900.0;
constexpr int kResampleSeeds = 5;
constexpr double kIdentityTol = 1e-12;

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* spec, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* spec, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, spec);
  std::vsnprintf(buf, sizeof buf, spec, ap);
  va_end(ap);
  return buf;
}

Outcome bench_validity() {
  BenchConfig cfg;
  cfg.n = 200;
  cfg.n_p = 128;
  cfg.n_r = 128;
  cfg.n_samples = 20000;
  cfg.max_interference = 0.1;
  const auto t0 = Clock::now();
  const BenchDataset ds = generate_bench(cfg);
  const double secs = since(t0);
  double norm_err = 0.0;
  for (Index d = 0; d < cfg.n; ++d) norm_err = std::max(norm_err, std::abs(std::sqrt(dot(ds.w_p.data, d, ds.w_p.data, d)) - 1.0));
  const double gram = ref_max_interference(ds.w_p.data);
  // Pooled inactivity over every (sample, feature) cell.
  const double cells = static_cast<double>(cfg.n) * static_cast<double>(cfg.n_samples);
  const double zeros = static_cast<double>((ds.coeffs.coeffs.array() == 0.0).count());
  const double sigma = std::sqrt(cfg.sparsity * (1.0 - cfg.sparsity) / cells);
  const double z = (zeros / cells - cfg.sparsity) / sigma;
  Outcome o;
  o.pass = secs < kBenchSeconds && norm_err <= kNormTol && gram <= cfg.max_interference + kGramSlack &&
           std::abs(z) <= kSigmas;
  o.detail = fmt("%.1f s, max |norm-1| %.2e, max interference %.6f, inactivity z %.2f", secs, norm_err, gram, z);
  return o;
}

Outcome global_certificates() {
  const VerifyReport r = run_verify("global", VerifySpec{}, 0);
  const CheckResult* orth = r.find("global.orthogonal");
  const CheckResult* inter = r.find("global.interference");
  Outcome o;
  o.pass = r.pass();
  o.detail = fmt("orthogonal loss %.2e; interference loss %.4f <= bound %.4f (k_max %.0f)",
                 orth->values.at("loss"), inter->values.at("loss"), inter->values.at("bound"),
                 inter->values.at("k_max"));
  return o;
}

Outcome two_feature_example() {
  const auto t0 = Clock::now();
  const RegionFixture f = two_feature_fixture();
  const SdlModel m = construct_partial_minimum(f.region, f.w_p, f.w_r, f.weights, f.encoder);
  const CertReport rep = certify_stationarity(m, f.w_p, f.w_r, f.weights, f.region, kExampleTol);
  const double secs = since(t0);
  Outcome o;
  o.pass = std::abs(rep.loss - 1.0) <= kExampleTol && rep.grad_norm_wd <= kExampleTol &&
           rep.grad_norm_we <= kExampleTol && rep.classification == CertClass::partial && secs < kExampleSeconds;
  o.detail = fmt("loss %.12f, |grad W_D| %.1e, |grad W_E| %.1e, %s, %.3f s", rep.loss, rep.grad_norm_wd,
                 rep.grad_norm_we, to_string(rep.classification).c_str(), secs);
  return o;
}

Outcome partial_minima() {
  const int trials = VerifySpec{}.partial_trials;
  const auto t0 = Clock::now();
  int certified = 0, draws = 0, unrealizable = 0;
  double worst_normal = 0.0, worst_grad = 0.0, min_loss = INFINITY;
  for (int t = 0; t < trials; ++t) {
    const PartialInstance inst = random_partial_instance(mix_seed(0, static_cast<std::uint64_t>(t)));
    const RegionFixture& f = inst.fixture;
    draws += inst.draws;
    unrealizable += inst.unrealizable;
    const SdlModel m = construct_partial_minimum(f.region, f.w_p, f.w_r, f.weights, f.encoder);
    const double normal = normal_equation_residual(m, f.w_p, f.w_r, f.weights, f.region).maxCoeff();
    const CertReport rep = certify_stationarity(m, f.w_p, f.w_r, f.weights, f.region, kStationaryTol);
    const double grad = std::max(rep.grad_norm_wd, rep.grad_norm_we);
    worst_normal = std::max(worst_normal, normal);
    worst_grad = std::max(worst_grad, grad);
    min_loss = std::min(min_loss, rep.loss);
    if (normal <= kNormalTol && grad <= kStationaryTol && rep.loss > kNonzeroLoss && rep.region_ok &&
        rep.classification == CertClass::partial) {
      ++certified;
    }
  }
  const double secs = since(t0);
  Outcome o;
  o.pass = certified == trials && secs < kPartialSeconds;
  o.detail = fmt("%d/%d certified, normal residual %.1e, grad %.1e, min loss %.3e, %d draws (%d unrealizable), %.2f s",
                 certified, trials, worst_normal, worst_grad, min_loss, draws, unrealizable, secs);
  return o;
}

Outcome absorption() {
  const int trials = VerifySpec{}.absorption_trials;
  int ok = 0, tilted = 0;
  for (int t = 0; t < trials; ++t) {
    const AbsorptionInstance inst = random_absorption_instance(mix_seed(0, static_cast<std::uint64_t>(t)));
    const AbsorptionResult r =
        absorption_construct(inst.encoder, inst.pattern, inst.parent, inst.c, inst.w_p, inst.interference);
    // Independent re-check of the realized pattern.
    const bool pattern = threshold_pattern(r.encoder, inst.w_p, r.c2) == r.expected;
    ok += r.ok() && pattern;
    tilted += r.tilt != 0.0;
  }
  Outcome o;
  o.pass = ok == trials;
  o.detail = fmt("%d/%d instances realize the split pattern (%d needed a tie-breaking tilt)", ok, trials, tilted);
  return o;
}

Outcome fd_gradients() {
  const Term terms[] = {Term::mse, Term::l1, Term::l0, Term::aux, Term::matryoshka, Term::anchor};
  bool all = true;
  double worst = 0.0;
  std::string short_terms;
  for (Term term : terms) {
    int checked = 0;
    for (std::uint64_t s = 0; checked < kFdPerTerm && s < 500; ++s) {
      Instance in = make_instance(term, s);
      const FdOutcome r = check_instance(in);
      if (!r.smooth) continue;
      ++checked;
      const double e = std::max({r.err_e, r.err_d, r.err_aux});
      worst = std::max(worst, e);
      all = all && e <= kFdTol;
    }
    if (checked < kFdPerTerm) {
      all = false;
      short_terms += std::string(" ") + term_name(term);
    }
  }
  Outcome o;
  o.pass = all;
  o.detail = fmt("%d instances x 6 terms, worst relative error %.2e%s", kFdPerTerm, worst,
                 short_terms.empty() ? "" : ("; too few smooth instances:" + short_terms).c_str());
  return o;
}

Outcome gap_slope() {
  const auto t0 = Clock::now();
  const VerifyReport r = run_verify("gap", VerifySpec{}, 0);
  const double secs = since(t0);
  const CheckResult& c = r.checks.front();
  const auto slope = c.values.find("slope");
  Outcome o;
  o.pass = c.pass && slope != c.values.end() && slope->second >= kSlopeLo && slope->second <= kSlopeHi &&
           secs < kGapSeconds;
  o.detail = fmt("slope %.3f over %.0f samples per point, %.1f s", slope == c.values.end() ? NAN : slope->second,
                 static_cast<double>(VerifySpec{}.gap_samples), secs);
  return o;
}

Outcome biconvexity() {
  const VerifyReport r = run_verify("biconvex", VerifySpec{}, 0);
  const CheckResult* cross = r.find("biconvex.crossing");
  Outcome o;
  o.pass = r.pass();
  std::string d;
  for (const auto& c : r.checks) d += c.name + (c.pass ? " ok; " : " FAILED; ");
  o.detail = d + fmt("crossing violations %.0f", cross ? cross->values.at("violations") : NAN);
  return o;
}

Outcome desk_table() {
  const ExperimentConfig cfg = preset("desk-table1").front();
  const auto t0 = Clock::now();
  const ReportTable t = run_experiment(cfg, 1);
  const double secs = since(t0);
  auto med = [&](const std::string& m) {
    const ReportRow* r = t.median(m);
    if (!r) throw RuntimeFailure("missing median row for " + m);
    return *r;
  };
  bool fa_ok = true;
  std::string fa_fail;
  for (const auto& m : cfg.methods) {
    const ReportRow plain = med(m.name), fa = med(m.name + "+FA");
    const bool ok = fa.m_gt.front() >= plain.m_gt.front() - kFaMgtSlack && fa.m_ip >= plain.m_ip - kFaMipSlack;
    if (!ok) fa_fail += " " + m.name;
    fa_ok = fa_ok && ok;
  }
  const ReportRow topk = med("topk"), relu = med("relu"), relu_fa = med("relu+FA");
  Outcome o;
  o.pass = topk.m_gt.front() >= kTopkMgt && fa_ok && relu.m_gt.front() <= kReluMgt && relu_fa.m_ip > relu.m_ip &&
           secs <= kTableSeconds;
  o.detail = fmt("topk M_GT %.3f, relu M_GT %.3f, relu M_IP %.3f -> %.3f with FA, FA never worse: %s, %.0f s",
                 topk.m_gt.front(), relu.m_gt.front(), relu.m_ip, relu_fa.m_ip,
                 fa_ok ? "yes" : ("no:" + fa_fail).c_str(), secs);
  std::fputs(t.to_text().c_str(), stdout);
  return o;
}

Outcome resampling() {
  std::vector<double> with, without;
  bool fires = true;
  int resampled = 0;
  for (int s = 0; s < kResampleSeeds; ++s) {
    const ResamplingFixture f = resampling_fixture(static_cast<std::uint64_t>(s));
    const TrainResult plain = train(f.model, f.train, f.train, LossConfig{}, f.config);
    TrainConfig rc = f.config;
    rc.resample_at = {f.resample_step};
    const TrainResult re = train(f.model, f.train, f.train, LossConfig{}, rc);
    without.push_back(sdl_loss(plain.model, f.heldout, f.heldout, {}).mse);
    with.push_back(sdl_loss(re.model, f.heldout, f.heldout, {}).mse);
    const LatentBatch lat = forward(re.model, f.heldout).latents;
    for (Index i : re.history.resampled) {
      ++resampled;
      bool any = false;
      for (Index b = 0; b < lat.values.rows() && !any; ++b) any = lat.values(b, i) != 0.0;
      fires = fires && any;
    }
  }
  const double mw = median(with), mo = median(without);
  Outcome o;
  o.pass = mw <= mo && fires && resampled > 0;
  o.detail = fmt("median held-out MSE %.3e with resampling vs %.3e without; %d resampled neurons, all fire: %s", mw,
                 mo, resampled, fires ? "yes" : "no");
  return o;
}

Outcome metric_identities() {
  Rng rng = make_rng(11);
  const FeatureMatrix truth{unit_columns(16, 24, rng)};
  const RecoveryReport r = recovery_metrics(similarity_matrix(truth.data, truth).values, 0.9, LatentBatch{});
  // TopK on pre-activations without ties keeps exactly k latents per row.
  const Index k = 5;
  Matrix pre(64, 40);
  for (Index j = 0; j < pre.cols(); ++j) {
    for (Index i = 0; i < pre.rows(); ++i) pre(i, j) = 1.0 + uniform(rng, 0.0, 1.0);
  }
  const double l0 = apply_activation(Activation::topk(k), pre).mean_l0();
  Outcome o;
  o.pass = r.gt_recovery == 1.0 && std::abs(r.max_inner_product - 1.0) <= kIdentityTol && l0 == static_cast<double>(k);
  o.detail = fmt("M_GT %.1f%%, M_IP %.15f, topk L0 %.3f (k = %ld)", 100.0 * r.gt_recovery, r.max_inner_product, l0,
                 static_cast<long>(k));
  return o;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "bench-validity", bench_validity},
      {2, "global-minima", global_certificates},
      {3, "two-feature-example", two_feature_example},
      {4, "partial-minima", partial_minima},
      {5, "absorption", absorption},
      {6, "gradient-check", fd_gradients},
      {7, "approximation-gap", gap_slope},
      {8, "biconvexity", biconvexity},
      {9, "recovery-table", desk_table},
      {10, "resampling", resampling},
      {11, "metric-identities", metric_identities},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::printf("%s %2d %-20s %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
