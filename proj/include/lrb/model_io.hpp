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
#include <filesystem>

#include "lrb/sdl.hpp"

namespace lrb::io {

/// Writes w_e.f32, w_d.f32 (plus theta.f32 / w_d_aux.f32 when present) and a
/// model.json describing the activation and model kind into `dir`.
void save_model(const std::filesystem::path& dir, const SdlModel& model, std::uint64_t seed = 0);

/// Reads a directory written by save_model and validates the result.
SdlModel load_model(const std::filesystem::path& dir);

}  // namespace lrb::io
