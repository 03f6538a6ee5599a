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

#ifndef PRIORMIX_BAGS_HPP_
#define PRIORMIX_BAGS_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "priormix/prior_algebra.hpp"

namespace priormix {

/// Per-feature affine map onto [0, 1], fit on a training split.
struct MinMaxScaler {
  Eigen::RowVectorXd minimum;
  Eigen::RowVectorXd range;

  static MinMaxScaler fit(const Eigen::MatrixXd &features);
  Eigen::MatrixXd apply(const Eigen::MatrixXd &features) const;
};

/*
 * Fully labeled source data. Class indices are zero-based in memory; every
 * file format on disk is one-based.
 */
class LabeledDataset {
public:
  LabeledDataset() = default;
  LabeledDataset(Eigen::MatrixXd features, std::vector<int> labels,
                 int classes);

  Eigen::Index size() const { return features_.rows(); }
  Eigen::Index dimension() const { return features_.cols(); }
  int classes() const { return classes_; }
  const Eigen::MatrixXd &features() const { return features_; }
  const std::vector<int> &labels() const { return labels_; }

  /// Row indices of each class, in file order.
  std::vector<std::vector<Eigen::Index>> class_indices() const;
  /// Empirical label frequencies.
  Eigen::VectorXd class_frequencies() const;

private:
  Eigen::MatrixXd features_;
  std::vector<int> labels_;
  int classes_ = 0;
};

class UnlabeledBag {
public:
  UnlabeledBag(int index, Eigen::MatrixXd features,
               std::optional<std::vector<int>> hidden_labels = std::nullopt);

  int index() const { return index_; }
  Eigen::Index size() const { return features_.rows(); }
  const Eigen::MatrixXd &features() const { return features_; }

  /// True labels of the bag members, kept for oracle checks only.
  const std::optional<std::vector<int>> &hidden_labels() const {
    return hidden_labels_;
  }

private:
  int index_;
  Eigen::MatrixXd features_;
  std::optional<std::vector<int>> hidden_labels_;
};

class BagCollection {
public:
  BagCollection(std::vector<UnlabeledBag> bags, ClassPriorMatrixd theta);

  Eigen::Index bag_count() const {
    return static_cast<Eigen::Index>(bags_.size());
  }
  Eigen::Index dimension() const { return bags_.front().features().cols(); }
  Eigen::Index total_size() const;
  const std::vector<UnlabeledBag> &bags() const { return bags_; }
  const UnlabeledBag &operator[](std::size_t m) const { return bags_[m]; }
  const ClassPriorMatrixd &theta() const { return theta_; }

private:
  std::vector<UnlabeledBag> bags_;
  ClassPriorMatrixd theta_;
};

/*
 * Rounds proportions * total to integers summing to total: floors first, then
 * one extra unit to the largest fractional remainders (ties to lower index).
 */
std::vector<Eigen::Index>
largest_remainder_counts(const Eigen::Ref<const Eigen::VectorXd> &proportions,
                         Eigen::Index total);

/// M sizes that differ by at most one, larger ones first, summing to total.
std::vector<Eigen::Index> split_bag_sizes(Eigen::Index total, Eigen::Index bags);

/*
 * Draws bag m with the largest-remainder class counts of theta.row(m) *
 * bag_sizes[m]. Sampling is without replacement inside a bag and independent
 * across bags; each bag's row order is shuffled.
 */
BagCollection make_bags(const LabeledDataset &source,
                        const ClassPriorMatrixd &theta,
                        const std::vector<Eigen::Index> &bag_sizes,
                        std::uint64_t seed);

BagCollection make_bags(const LabeledDataset &source,
                        const ClassPriorMatrixd &theta, Eigen::Index bag_size,
                        std::uint64_t seed);

/*
 * Reads `label,f1,...,fd` CSV with one-based labels. Without a scaler the
 * file is treated as a training split: a min-max scaler is fit on it and
 * returned through `fitted`. With a scaler, that scaler is applied as is.
 * `classes` > 0 pins K (e.g. for a test split that may lack a class).
 */
LabeledDataset load_csv(const std::string &path,
                        const MinMaxScaler *scaler = nullptr,
                        MinMaxScaler *fitted = nullptr, int classes = 0);

/// Classic big-endian IDX image/label pair. Pixels are scaled by 1/255.
LabeledDataset load_idx(const std::string &images_path,
                        const std::string &labels_path, int classes = 0);

void write_dataset_csv(const std::string &path, const LabeledDataset &data);

} // namespace priormix

#endif // PRIORMIX_BAGS_HPP_
