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

#ifndef PRIORMIX_PRIOR_ALGEBRA_HPP_
#define PRIORMIX_PRIOR_ALGEBRA_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "priormix/error.hpp"

namespace priormix {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline constexpr double kSimplexTolerance = 1e-9;

namespace detail {

template <typename Scalar>
Scalar rank_threshold(const VectorX<Scalar> &singular_values, Eigen::Index rows,
                      Eigen::Index cols) {
  if (singular_values.size() == 0) {
    return Scalar(0);
  }
  return static_cast<Scalar>(std::max(rows, cols)) *
         std::numeric_limits<Scalar>::epsilon() * singular_values.maxCoeff();
}

} // namespace detail

/*
 * Number of singular values above max(M, K) * eps * sigma_max.
 */
template <typename Derived>
Eigen::Index numerical_rank(const Eigen::MatrixBase<Derived> &matrix) {
  using Scalar = typename Derived::Scalar;
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(matrix.eval());
  const VectorX<Scalar> &sv = svd.singularValues();
  const Scalar threshold =
      detail::rank_threshold<Scalar>(sv, matrix.rows(), matrix.cols());
  return (sv.array() > threshold).count();
}

/*
 * Moore-Penrose pseudoinverse through a thin SVD. Singular values at or below
 * max(M, K) * eps * sigma_max are treated as zero; `rank` (optional) receives
 * the number kept.
 */
template <typename Derived>
MatrixX<typename Derived::Scalar>
pseudoinverse(const Eigen::MatrixBase<Derived> &matrix,
              Eigen::Index *rank = nullptr) {
  using Scalar = typename Derived::Scalar;
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(matrix.eval(), Eigen::ComputeThinU |
                                                           Eigen::ComputeThinV);
  const VectorX<Scalar> &sv = svd.singularValues();
  const Scalar threshold =
      detail::rank_threshold<Scalar>(sv, matrix.rows(), matrix.cols());
  VectorX<Scalar> inverted = VectorX<Scalar>::Zero(sv.size());
  Eigen::Index kept = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > threshold) {
      inverted(i) = Scalar(1) / sv(i);
      ++kept;
    }
  }
  if (rank != nullptr) {
    *rank = kept;
  }
  return svd.matrixV() * inverted.asDiagonal() * svd.matrixU().transpose();
}

/*
 * The M x K row-stochastic matrix of bag class priors. Rows are bags, columns
 * are classes. Construction validates the simplex rows and full column rank.
 */
template <typename Scalar> class ClassPriorMatrix {
public:
  ClassPriorMatrix() = default;

  explicit ClassPriorMatrix(MatrixX<Scalar> entries)
      : entries_(std::move(entries)) {
    validate();
  }

  Eigen::Index bags() const { return entries_.rows(); }
  Eigen::Index classes() const { return entries_.cols(); }
  const MatrixX<Scalar> &entries() const { return entries_; }
  Scalar operator()(Eigen::Index m, Eigen::Index k) const {
    return entries_(m, k);
  }

  /// Column index of the largest prior in row m; ties go to the smaller index.
  Eigen::Index dominant_class(Eigen::Index m) const {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < classes(); ++k) {
      if (entries_(m, k) > entries_(m, best)) {
        best = k;
      }
    }
    return best;
  }

private:
  void validate() const {
    const Eigen::Index m = entries_.rows();
    const Eigen::Index k = entries_.cols();
    if (k < 1 || m < 1) {
      throw Error(ErrorCode::kInvalidArgument, "class-prior matrix is empty");
    }
    if (!entries_.allFinite() || (entries_.array() < Scalar(0)).any()) {
      throw Error(ErrorCode::kInvalidSimplex,
                  "class priors must be finite and non-negative");
    }
    for (Eigen::Index row = 0; row < m; ++row) {
      const Scalar sum = entries_.row(row).sum();
      if (std::abs(sum - Scalar(1)) > Scalar(kSimplexTolerance)) {
        std::ostringstream msg;
        msg << "row " << row << " of the class-prior matrix sums to " << sum;
        throw Error(ErrorCode::kInvalidSimplex, msg.str());
      }
    }
    if (m < k) {
      throw Error(ErrorCode::kRankDeficient,
                  "class-prior matrix needs at least as many bags as classes");
    }
    const Eigen::Index rank = numerical_rank(entries_);
    if (rank < k) {
      std::ostringstream msg;
      msg << "class-prior matrix has column rank " << rank << " < " << k;
      throw Error(ErrorCode::kRankDeficient, msg.str());
    }
  }

  MatrixX<Scalar> entries_;
};

/// Class priors of the test distribution.
template <typename Scalar> class TestPriors {
public:
  TestPriors() = default;

  explicit TestPriors(VectorX<Scalar> values) : values_(std::move(values)) {
    if (values_.size() == 0 || !values_.allFinite() ||
        (values_.array() < Scalar(0)).any() ||
        std::abs(values_.sum() - Scalar(1)) > Scalar(kSimplexTolerance)) {
      throw Error(ErrorCode::kInvalidSimplex,
                  "test priors must be a probability vector");
    }
  }

  static TestPriors uniform(Eigen::Index classes) {
    return TestPriors(VectorX<Scalar>::Constant(
        classes, Scalar(1) / static_cast<Scalar>(classes)));
  }

  Eigen::Index classes() const { return values_.size(); }
  const VectorX<Scalar> &values() const { return values_; }
  Scalar operator()(Eigen::Index k) const { return values_(k); }

private:
  VectorX<Scalar> values_;
};

/// Rewriting coefficients; entries may be negative.
template <typename Scalar> class WeightMatrix {
public:
  WeightMatrix() = default;

  explicit WeightMatrix(MatrixX<Scalar> entries)
      : entries_(std::move(entries)),
        max_abs_(entries_.size() == 0 ? Scalar(0)
                                      : entries_.cwiseAbs().maxCoeff()) {}

  Eigen::Index bags() const { return entries_.rows(); }
  Eigen::Index classes() const { return entries_.cols(); }
  const MatrixX<Scalar> &entries() const { return entries_; }
  Scalar operator()(Eigen::Index m, Eigen::Index k) const {
    return entries_(m, k);
  }
  Scalar max_abs() const { return max_abs_; }

private:
  MatrixX<Scalar> entries_;
  Scalar max_abs_ = Scalar(0);
};

/*
 * W = (diag(pi) * pinv(Theta))^T, so that W^T Theta = diag(pi) whenever Theta
 * has full column rank.
 */
template <typename Scalar>
WeightMatrix<Scalar> compute_weights(const ClassPriorMatrix<Scalar> &theta,
                                     const TestPriors<Scalar> &pi) {
  if (pi.classes() != theta.classes()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "test priors and class-prior matrix disagree on K");
  }
  Eigen::Index rank = 0;
  const MatrixX<Scalar> theta_pinv = pseudoinverse(theta.entries(), &rank);
  if (rank < theta.classes()) {
    throw Error(ErrorCode::kRankDeficient,
                "class-prior matrix lost column rank in the pseudoinverse");
  }
  return WeightMatrix<Scalar>(
      (pi.values().asDiagonal() * theta_pinv).transpose());
}

/// Diagonal a + b, off-diagonal b, with a + K b = 1.
template <typename Scalar>
ClassPriorMatrix<Scalar> symmetric_theta(Scalar a, Scalar b,
                                         Eigen::Index classes) {
  if (!(a > Scalar(0)) || !(b > Scalar(0)) || classes < 2) {
    throw Error(ErrorCode::kInvalidSimplex,
                "symmetric priors need a > 0, b > 0 and K >= 2");
  }
  if (std::abs(a + static_cast<Scalar>(classes) * b - Scalar(1)) >
      Scalar(kSimplexTolerance)) {
    std::ostringstream msg;
    msg << "a + K*b = " << a + static_cast<Scalar>(classes) * b << " != 1";
    throw Error(ErrorCode::kInvalidSimplex, msg.str());
  }
  MatrixX<Scalar> entries = MatrixX<Scalar>::Constant(classes, classes, b);
  entries.diagonal().array() += a;
  return ClassPriorMatrix<Scalar>(std::move(entries));
}

inline constexpr int kMaxGenerationAttempts = 100;

namespace detail {

template <typename Scalar>
MatrixX<Scalar> draw_diagonal_dominated(Eigen::Index classes,
                                        std::mt19937_64 &rng) {
  std::uniform_real_distribution<Scalar> off_diagonal(
      Scalar(0), Scalar(1) / static_cast<Scalar>(classes));
  MatrixX<Scalar> entries(classes, classes);
  for (Eigen::Index m = 0; m < classes; ++m) {
    Scalar rest = 0;
    for (Eigen::Index k = 0; k < classes; ++k) {
      if (k != m) {
        entries(m, k) = off_diagonal(rng);
        rest += entries(m, k);
      }
    }
    entries(m, m) = Scalar(1) - rest;
  }
  return entries;
}

template <typename Scalar, typename Draw>
ClassPriorMatrix<Scalar> generate_with_retries(std::uint64_t seed, Draw draw) {
  for (int attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(attempt));
    MatrixX<Scalar> entries = draw(rng);
    if (numerical_rank(entries) == entries.cols()) {
      return ClassPriorMatrix<Scalar>(std::move(entries));
    }
  }
  throw Error(ErrorCode::kGenerationFailed,
              "no full-rank class-prior matrix after 100 draws");
}

} // namespace detail

/*
 * Square K x K priors: off-diagonal entries ~ U[0, 1/K], each diagonal entry
 * takes the remaining mass of its row. A rank-deficient draw is retried with
 * seed + 1, up to 100 attempts.
 */
template <typename Scalar = double>
ClassPriorMatrix<Scalar> diagonal_dominated_theta(Eigen::Index classes,
                                                  std::uint64_t seed) {
  if (classes < 2) {
    throw Error(ErrorCode::kInvalidArgument, "need K >= 2");
  }
  return detail::generate_with_retries<Scalar>(seed, [&](std::mt19937_64 &rng) {
    return detail::draw_diagonal_dominated<Scalar>(classes, rng);
  });
}

/// 2K x K priors: two independent diagonal-dominated blocks stacked.
template <typename Scalar = double>
ClassPriorMatrix<Scalar> nonsquare_theta(Eigen::Index classes,
                                         std::uint64_t seed) {
  if (classes < 2) {
    throw Error(ErrorCode::kInvalidArgument, "need K >= 2");
  }
  return detail::generate_with_retries<Scalar>(seed, [&](std::mt19937_64 &rng) {
    MatrixX<Scalar> entries(2 * classes, classes);
    entries.topRows(classes) =
        detail::draw_diagonal_dominated<Scalar>(classes, rng);
    entries.bottomRows(classes) =
        detail::draw_diagonal_dominated<Scalar>(classes, rng);
    return entries;
  });
}

/*
 * Multiplies every entry by (1 + eps), eps ~ U[-noise_rate, noise_rate],
 * clamps at zero and renormalizes each row.
 */
template <typename Scalar>
ClassPriorMatrix<Scalar> perturb_priors(const ClassPriorMatrix<Scalar> &theta,
                                        Scalar noise_rate, std::uint64_t seed) {
  if (!(noise_rate >= Scalar(0)) || !(noise_rate < Scalar(1))) {
    throw Error(ErrorCode::kInvalidArgument, "noise rate must lie in [0, 1)");
  }
  if (noise_rate == Scalar(0)) {
    return theta;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<Scalar> noise(-noise_rate, noise_rate);
  MatrixX<Scalar> entries = theta.entries();
  for (Eigen::Index m = 0; m < entries.rows(); ++m) {
    for (Eigen::Index k = 0; k < entries.cols(); ++k) {
      entries(m, k) = std::max(Scalar(0), entries(m, k) * (Scalar(1) + noise(rng)));
    }
    const Scalar sum = entries.row(m).sum();
    if (!(sum > Scalar(0))) {
      throw Error(ErrorCode::kRankDeficient, "perturbation zeroed a row");
    }
    entries.row(m) /= sum;
  }
  return ClassPriorMatrix<Scalar>(std::move(entries));
}

using ClassPriorMatrixd = ClassPriorMatrix<double>;
using TestPriorsd = TestPriors<double>;
using WeightMatrixd = WeightMatrix<double>;

/// Plain decimal CSV, one bag per row, no header.
void write_matrix_csv(const std::string &path, const Eigen::MatrixXd &matrix);
Eigen::MatrixXd read_matrix_csv(const std::string &path);

ClassPriorMatrixd load_theta_csv(const std::string &path);
void save_theta_csv(const std::string &path, const ClassPriorMatrixd &theta);
TestPriorsd load_priors_csv(const std::string &path);
void save_priors_csv(const std::string &path, const TestPriorsd &pi);

} // namespace priormix

#endif // PRIORMIX_PRIOR_ALGEBRA_HPP_
