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

#include "lrb/matrix_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "json.hpp"

namespace lrb::io {

namespace {

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) |
           (v >> 24);
  }
  return v;
}

}  // namespace

std::filesystem::path header_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".json";
  return p;
}

void write_matrix(const std::filesystem::path& path, const Matrix& m,
                  const std::string& role, std::uint64_t seed) {
  std::vector<std::uint32_t> words(static_cast<std::size_t>(m.size()));
  std::size_t k = 0;
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      const float f = static_cast<float>(m(r, c));
      words[k++] = to_little(std::bit_cast<std::uint32_t>(f));
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(words.data()),
            static_cast<std::streamsize>(words.size() * sizeof(std::uint32_t)));
  if (!out) throw RuntimeFailure("short write to " + path.string());

  nlohmann::json h;
  h["shape"] = {m.rows(), m.cols()};
  h["dtype"] = "f32";
  h["role"] = role;
  h["seed"] = seed;
  std::ofstream hout(header_path(path), std::ios::trunc);
  if (!hout) throw RuntimeFailure("cannot write header for " + path.string());
  hout << h.dump(2) << '\n';
}

MatrixHeader read_header(const std::filesystem::path& path) {
  std::ifstream in(header_path(path));
  if (!in) throw ValidationError("missing matrix header " + header_path(path).string());
  nlohmann::json h;
  try {
    in >> h;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed matrix header " + header_path(path).string() + ": " + e.what());
  }
  if (h.value("dtype", std::string{}) != "f32") {
    throw ValidationError("unsupported dtype in " + header_path(path).string());
  }
  const auto& shape = h.at("shape");
  require(shape.is_array() && shape.size() == 2, "matrix header shape must be [rows, cols]");
  MatrixHeader out;
  out.rows = shape[0].get<Index>();
  out.cols = shape[1].get<Index>();
  out.role = h.value("role", std::string{});
  out.seed = h.value("seed", std::uint64_t{0});
  require(out.rows >= 0 && out.cols >= 0, "negative matrix shape");
  return out;
}

Matrix read_matrix(const std::filesystem::path& path, MatrixHeader* header) {
  const MatrixHeader h = read_header(path);
  const auto count = static_cast<std::size_t>(h.rows * h.cols);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::vector<std::uint32_t> words(count);
  in.read(reinterpret_cast<char*>(words.data()),
          static_cast<std::streamsize>(count * sizeof(std::uint32_t)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(std::uint32_t)) {
    throw ValidationError("matrix file " + path.string() + " shorter than its header claims");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ValidationError("matrix file " + path.string() + " longer than its header claims");
  }
  Matrix m(h.rows, h.cols);
  std::size_t k = 0;
  for (Index r = 0; r < h.rows; ++r) {
    for (Index c = 0; c < h.cols; ++c) {
      m(r, c) = static_cast<double>(std::bit_cast<float>(to_little(words[k++])));
    }
  }
  if (header) *header = h;
  return m;
}

}  // namespace lrb::io
