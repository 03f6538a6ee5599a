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

#include "priormix/prior_algebra.hpp"

#include <fstream>
#include <vector>

#include "priormix/csv.hpp"

namespace priormix {

void write_matrix_csv(const std::string &path, const Eigen::MatrixXd &matrix) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::kIoError, "cannot open " + path + " for writing");
  }
  for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
    for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
      if (c > 0) {
        out << ',';
      }
      out << csv::format_double(matrix(r, c));
    }
    out << '\n';
  }
}

Eigen::MatrixXd read_matrix_csv(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kIoError, "cannot open " + path);
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line == "\r") {
      continue;
    }
    std::vector<double> row;
    for (const auto field : csv::split_fields(line)) {
      double value = 0.0;
      if (!csv::parse_double(field, value)) {
        throw Error(ErrorCode::kParseError,
                    path + ":" + std::to_string(line_number) +
                        ": not a number: '" + std::string(field) + "'");
      }
      row.push_back(value);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorCode::kParseError,
                  path + ":" + std::to_string(line_number) +
                      ": ragged row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw Error(ErrorCode::kParseError, path + ": empty matrix file");
  }
  Eigen::MatrixXd matrix(static_cast<Eigen::Index>(rows.size()),
                         static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          rows[r][c];
    }
  }
  return matrix;
}

ClassPriorMatrixd load_theta_csv(const std::string &path) {
  return ClassPriorMatrixd(read_matrix_csv(path));
}

void save_theta_csv(const std::string &path, const ClassPriorMatrixd &theta) {
  write_matrix_csv(path, theta.entries());
}

TestPriorsd load_priors_csv(const std::string &path) {
  const Eigen::MatrixXd row = read_matrix_csv(path);
  if (row.rows() != 1) {
    throw Error(ErrorCode::kParseError, path + ": expected a single row");
  }
  return TestPriorsd(row.row(0).transpose());
}

void save_priors_csv(const std::string &path, const TestPriorsd &pi) {
  write_matrix_csv(path, pi.values().transpose());
}

} // namespace priormix
