// Copyright 2026 The priormix Authors. All Rights Reserved.
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

#include "priormix/model.hpp"

#include <array>
#include <bit>
#include <fstream>

namespace priormix {
namespace {

void put_u64(std::ofstream &out, std::uint64_t value) {
  std::array<char, 8> bytes{};
  for (std::size_t i = 0; i < 8; ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xffu);
  }
  out.write(bytes.data(), bytes.size());
}

std::uint64_t get_u64(std::ifstream &in, const std::string &path) {
  std::array<unsigned char, 8> bytes{};
  in.read(reinterpret_cast<char *>(bytes.data()), bytes.size());
  if (in.gcount() != 8) {
    throw Error(ErrorCode::kParseError, path + ": truncated checkpoint");
  }
  std::uint64_t value = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    value |= std::uint64_t{bytes[i]} << (8 * i);
  }
  return value;
}

void put_f64(std::ofstream &out, double value) {
  put_u64(out, std::bit_cast<std::uint64_t>(value));
}

double get_f64(std::ifstream &in, const std::string &path) {
  return std::bit_cast<double>(get_u64(in, path));
}

} // namespace

void save_checkpoint(const std::string &path, const Mlp &model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::kIoError, "cannot open " + path + " for writing");
  }
  put_u64(out, model.layer_dims.size());
  for (const int d : model.layer_dims) {
    put_u64(out, static_cast<std::uint64_t>(d));
  }
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    const auto &w = model.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        put_f64(out, w(r, c));
      }
    }
    for (Eigen::Index r = 0; r < model.biases[l].size(); ++r) {
      put_f64(out, model.biases[l](r));
    }
  }
}

Mlp load_checkpoint(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIoError, "cannot open " + path);
  }
  const std::uint64_t count = get_u64(in, path);
  if (count < 2 || count > 1024) {
    throw Error(ErrorCode::kParseError, path + ": implausible layer count");
  }
  std::vector<int> dims;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t d = get_u64(in, path);
    if (d < 1 || d > (1u << 24)) {
      throw Error(ErrorCode::kParseError, path + ": implausible layer width");
    }
    dims.push_back(static_cast<int>(d));
  }
  Mlp model = Mlp::zeros(dims);
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    auto &w = model.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        w(r, c) = get_f64(in, path);
      }
    }
    for (Eigen::Index r = 0; r < model.biases[l].size(); ++r) {
      model.biases[l](r) = get_f64(in, path);
    }
  }
  return model;
}

} // namespace priormix
