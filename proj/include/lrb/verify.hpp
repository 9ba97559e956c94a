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

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lrb/config.hpp"
#include "lrb/theory.hpp"
#include "lrb/trainer.hpp"

namespace lrb {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::map<std::string, double> values;
  std::string note;
  double seconds = 0.0;
};

struct VerifyReport {
  std::string suite;
  std::uint64_t seed = 0;
  std::vector<CheckResult> checks;

  bool pass() const;
  const CheckResult* find(const std::string& name) const;
  /// One `suite.check.key=value` line per recorded value plus a
  /// `suite.check.pass=0|1` line per check.
  std::string to_kv() const;
  std::string to_table() const;
};

/// {global, partial, absorption, biconvex, gap, all}.
const std::vector<std::string>& verify_suites();

/// Runs one certificate suite; `all` concatenates the others in order.
/// Unknown suite names and gap grids with fewer than three points raise
/// ValidationError.
VerifyReport run_verify(const std::string& suite, const VerifySpec& spec, std::uint64_t seed);

// Fixtures shared by the suites and the tests.

struct RegionFixture {
  FeatureMatrix w_p;
  FeatureMatrix w_r;
  FeatureWeights weights;
  RegionSpec region;
  Matrix encoder;
};

/// Two orthonormal features, one neuron firing on both, the other dead,
/// unit weights: encoder ((1, 1), (0, 0)) at c = 0.
RegionFixture two_feature_fixture();

struct PartialInstance {
  RegionFixture fixture;
  int draws = 0;         // partitions drawn to obtain this one
  int unrealizable = 0;  // polysemantic draws with no stationary encoder
};

/// Random polysemantic partition of n = 10 features over n_q = 12 neurons
/// with n_p = 8, n_r = 10 random unit columns and bench weights at S = 0.9,
/// redrawn until a stationary encoder exists. The encoder field holds it.
PartialInstance random_partial_instance(std::uint64_t seed);

struct AbsorptionInstance {
  Matrix w_p;
  double interference = 0.0;
  ActivationPattern pattern;
  Matrix encoder;
  Index parent = 0;
  double c = 0.0;
  int draws = 0;
};

/// A parent feature and its one or two children share neuron 0; every other
/// feature has its own neuron. Interference is pushed below a random target
/// in (0.05, 0.28); even seeds use c = 0, odd ones a positive threshold.
AbsorptionInstance random_absorption_instance(std::uint64_t seed);

struct ResamplingFixture {
  SdlModel model;     // relu SAE: neuron 0 covers both features, neuron 1 is dead
  Matrix train;       // two orthonormal features, S = 0.5
  Matrix heldout;
  TrainConfig config;  // resample_at empty; callers opt in
  int resample_step = 100;
};

ResamplingFixture resampling_fixture(std::uint64_t seed);

/// Unit columns with max off-diagonal inner product <= bound.
FeatureMatrix low_interference_matrix(Index dim, Index n, double bound, std::uint64_t seed);

}  // namespace lrb
