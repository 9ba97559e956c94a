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

#include "lrb/model_io.hpp"

#include <fstream>

#include "json.hpp"
#include "lrb/matrix_io.hpp"

namespace lrb::io {

void save_model(const std::filesystem::path& dir, const SdlModel& model, std::uint64_t seed) {
  model.validate();
  std::filesystem::create_directories(dir);
  write_matrix(dir / "w_e.f32", model.w_e, "encoder", seed);
  write_matrix(dir / "w_d.f32", model.w_d, "decoder", seed);
  if (model.activation.theta.size() > 0) {
    write_matrix(dir / "theta.f32", Matrix(model.activation.theta), "threshold", seed);
  }
  if (model.w_d_aux) write_matrix(dir / "w_d_aux.f32", *model.w_d_aux, "aux_decoder", seed);

  nlohmann::json j;
  j["kind"] = to_string(model.kind);
  j["sources"] = model.sources;
  j["block_dims"] = model.block_dims;
  j["activation"] = {{"kind", model.activation.name()},
                     {"k", model.activation.k},
                     {"compose_relu", model.activation.compose_relu},
                     {"c", model.activation.c}};
  std::ofstream out(dir / "model.json", std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + (dir / "model.json").string());
  out << j.dump(2) << '\n';
}

SdlModel load_model(const std::filesystem::path& dir) {
  std::ifstream in(dir / "model.json");
  if (!in) throw ValidationError("missing " + (dir / "model.json").string());
  SdlModel m;
  try {
    nlohmann::json j;
    in >> j;
    m.kind = model_kind_from_string(j.at("kind").get<std::string>());
    m.sources = j.value("sources", 1);
    m.block_dims = j.value("block_dims", std::vector<Index>{});
    const auto& a = j.at("activation");
    m.activation.kind = activation_kind_from_string(a.at("kind").get<std::string>());
    m.activation.k = a.value("k", Index{1});
    m.activation.compose_relu = a.value("compose_relu", true);
    m.activation.c = a.value("c", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed " + (dir / "model.json").string() + ": " + e.what());
  }
  m.w_e = read_matrix(dir / "w_e.f32");
  m.w_d = read_matrix(dir / "w_d.f32");
  if (m.activation.kind == Activation::Kind::jumprelu) {
    m.activation.theta = read_matrix(dir / "theta.f32").col(0);
  }
  if (std::filesystem::exists(dir / "w_d_aux.f32")) m.w_d_aux = read_matrix(dir / "w_d_aux.f32");
  m.validate();
  return m;
}

}  // namespace lrb::io
