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
#include <string>

#include "lrb/common.hpp"

namespace lrb::io {

/// Sidecar metadata stored next to every raw matrix file.
struct MatrixHeader {
  Index rows = 0;
  Index cols = 0;
  std::string role;
  std::uint64_t seed = 0;
};

/// Writes `m` as raw little-endian f32, row-major, to `<path>` and its
/// header as JSON to `<path>.json`.
void write_matrix(const std::filesystem::path& path, const Matrix& m,
                  const std::string& role, std::uint64_t seed = 0);

/// Reads a matrix written by write_matrix. Values are widened to double;
/// writing them back reproduces the original bytes.
Matrix read_matrix(const std::filesystem::path& path,
                   MatrixHeader* header = nullptr);

MatrixHeader read_header(const std::filesystem::path& path);

std::filesystem::path header_path(const std::filesystem::path& path);

}  // namespace lrb::io
