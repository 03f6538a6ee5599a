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

#include "priormix/bags.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "priormix/csv.hpp"

namespace priormix {

MinMaxScaler MinMaxScaler::fit(const Eigen::MatrixXd &features) {
  MinMaxScaler scaler;
  scaler.minimum = features.colwise().minCoeff();
  scaler.range = features.colwise().maxCoeff() - scaler.minimum;
  return scaler;
}

Eigen::MatrixXd MinMaxScaler::apply(const Eigen::MatrixXd &features) const {
  if (features.cols() != minimum.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "scaler was fit on a different feature dimension");
  }
  Eigen::MatrixXd scaled = features.rowwise() - minimum;
  for (Eigen::Index j = 0; j < scaled.cols(); ++j) {
    // Constant features collapse to zero.
    if (range(j) > 0.0) {
      scaled.col(j) /= range(j);
    } else {
      scaled.col(j).setZero();
    }
  }
  return scaled;
}

LabeledDataset::LabeledDataset(Eigen::MatrixXd features,
                               std::vector<int> labels, int classes)
    : features_(std::move(features)), labels_(std::move(labels)),
      classes_(classes) {
  if (static_cast<Eigen::Index>(labels_.size()) != features_.rows()) {
    throw Error(ErrorCode::kCountMismatch,
                "feature rows and labels differ in count");
  }
  if (classes_ < 1) {
    throw Error(ErrorCode::kLabelRangeError, "dataset needs K >= 1");
  }
  if (!features_.allFinite()) {
    throw Error(ErrorCode::kParseError, "non-finite feature value");
  }
  std::vector<int> seen(static_cast<std::size_t>(classes_), 0);
  for (const int y : labels_) {
    if (y < 0 || y >= classes_) {
      throw Error(ErrorCode::kLabelRangeError,
                  "label " + std::to_string(y + 1) + " outside [1, " +
                      std::to_string(classes_) + "]");
    }
    seen[static_cast<std::size_t>(y)] = 1;
  }
  for (int k = 0; k < classes_; ++k) {
    if (seen[static_cast<std::size_t>(k)] == 0) {
      throw Error(ErrorCode::kLabelRangeError,
                  "class " + std::to_string(k + 1) + " has no samples");
    }
  }
}

std::vector<std::vector<Eigen::Index>> LabeledDataset::class_indices() const {
  std::vector<std::vector<Eigen::Index>> indices(
      static_cast<std::size_t>(classes_));
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    indices[static_cast<std::size_t>(labels_[i])].push_back(
        static_cast<Eigen::Index>(i));
  }
  return indices;
}

Eigen::VectorXd LabeledDataset::class_frequencies() const {
  Eigen::VectorXd freq = Eigen::VectorXd::Zero(classes_);
  for (const int y : labels_) {
    freq(y) += 1.0;
  }
  return freq / static_cast<double>(labels_.size());
}

UnlabeledBag::UnlabeledBag(int index, Eigen::MatrixXd features,
                           std::optional<std::vector<int>> hidden_labels)
    : index_(index), features_(std::move(features)),
      hidden_labels_(std::move(hidden_labels)) {
  if (features_.rows() < 1) {
    throw Error(ErrorCode::kInvalidArgument, "a bag needs at least one sample");
  }
  if (hidden_labels_ &&
      static_cast<Eigen::Index>(hidden_labels_->size()) != features_.rows()) {
    throw Error(ErrorCode::kCountMismatch, "hidden labels do not match bag");
  }
}

BagCollection::BagCollection(std::vector<UnlabeledBag> bags,
                             ClassPriorMatrixd theta)
    : bags_(std::move(bags)), theta_(std::move(theta)) {
  if (static_cast<Eigen::Index>(bags_.size()) != theta_.bags()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "bag count differs from the rows of theta");
  }
  for (const auto &bag : bags_) {
    if (bag.features().cols() != bags_.front().features().cols()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "bags disagree on feature dimension");
    }
  }
}

Eigen::Index BagCollection::total_size() const {
  Eigen::Index total = 0;
  for (const auto &bag : bags_) {
    total += bag.size();
  }
  return total;
}

std::vector<Eigen::Index>
largest_remainder_counts(const Eigen::Ref<const Eigen::VectorXd> &proportions,
                         Eigen::Index total) {
  const Eigen::Index k = proportions.size();
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(k));
  std::vector<double> remainders(static_cast<std::size_t>(k));
  Eigen::Index assigned = 0;
  for (Eigen::Index j = 0; j < k; ++j) {
    const double exact = proportions(j) * static_cast<double>(total);
    // Snap values within round-off of an integer so 0.55 * 100 is 55.
    const double snapped = std::abs(exact - std::round(exact)) < 1e-9
                               ? std::round(exact)
                               : exact;
    const double floor_value = std::floor(snapped);
    counts[static_cast<std::size_t>(j)] = static_cast<Eigen::Index>(floor_value);
    remainders[static_cast<std::size_t>(j)] = snapped - floor_value;
    assigned += counts[static_cast<std::size_t>(j)];
  }
  std::vector<std::size_t> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return remainders[a] > remainders[b];
  });
  for (std::size_t i = 0; assigned < total; i = (i + 1) % order.size()) {
    ++counts[order[i]];
    ++assigned;
  }
  return counts;
}

std::vector<Eigen::Index> split_bag_sizes(Eigen::Index total,
                                          Eigen::Index bags) {
  if (bags < 1 || total < bags) {
    throw Error(ErrorCode::kInvalidArgument,
                "need at least one sample per bag");
  }
  std::vector<Eigen::Index> sizes(static_cast<std::size_t>(bags), total / bags);
  for (Eigen::Index m = 0; m < total % bags; ++m) {
    ++sizes[static_cast<std::size_t>(m)];
  }
  return sizes;
}

BagCollection make_bags(const LabeledDataset &source,
                        const ClassPriorMatrixd &theta,
                        const std::vector<Eigen::Index> &bag_sizes,
                        std::uint64_t seed) {
  if (theta.classes() != source.classes()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "theta and source disagree on the number of classes");
  }
  if (static_cast<Eigen::Index>(bag_sizes.size()) != theta.bags()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "one bag size per row of theta is required");
  }
  auto pools = source.class_indices();
  std::mt19937_64 rng(seed);
  std::vector<UnlabeledBag> bags;
  bags.reserve(bag_sizes.size());
  for (Eigen::Index m = 0; m < theta.bags(); ++m) {
    const Eigen::Index size = bag_sizes[static_cast<std::size_t>(m)];
    const auto counts =
        largest_remainder_counts(theta.entries().row(m).transpose(), size);
    std::vector<Eigen::Index> members;
    std::vector<int> labels;
    members.reserve(static_cast<std::size_t>(size));
    for (Eigen::Index k = 0; k < theta.classes(); ++k) {
      auto &pool = pools[static_cast<std::size_t>(k)];
      const auto need = counts[static_cast<std::size_t>(k)];
      if (need > static_cast<Eigen::Index>(pool.size())) {
        std::ostringstream msg;
        msg << "bag " << m + 1 << " needs " << need << " samples of class "
            << k + 1 << " but the source has " << pool.size();
        throw Error(ErrorCode::kInsufficientClassSamples, msg.str());
      }
      // Partial Fisher-Yates: the first `need` slots become a uniform draw
      // without replacement. The pool stays a permutation for later bags.
      for (Eigen::Index i = 0; i < need; ++i) {
        std::uniform_int_distribution<std::size_t> pick(
            static_cast<std::size_t>(i), pool.size() - 1);
        std::swap(pool[static_cast<std::size_t>(i)], pool[pick(rng)]);
        members.push_back(pool[static_cast<std::size_t>(i)]);
        labels.push_back(static_cast<int>(k));
      }
    }
    std::vector<std::size_t> order(members.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    Eigen::MatrixXd features(size, source.dimension());
    std::vector<int> hidden(members.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      features.row(static_cast<Eigen::Index>(i)) =
          source.features().row(members[order[i]]);
      hidden[i] = labels[order[i]];
    }
    bags.emplace_back(static_cast<int>(m), std::move(features),
                      std::move(hidden));
  }
  return BagCollection(std::move(bags), theta);
}

BagCollection make_bags(const LabeledDataset &source,
                        const ClassPriorMatrixd &theta, Eigen::Index bag_size,
                        std::uint64_t seed) {
  return make_bags(source, theta,
                   std::vector<Eigen::Index>(
                       static_cast<std::size_t>(theta.bags()), bag_size),
                   seed);
}

LabeledDataset load_csv(const std::string &path, const MinMaxScaler *scaler,
                        MinMaxScaler *fitted, int classes) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kIoError, "cannot open " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kParseError, path + ":1: missing header");
  }
  const auto header = csv::split_fields(line);
  if (header.size() < 2 || header.front() != "label") {
    throw Error(ErrorCode::kParseError,
                path + ":1: header must be label,f1,...,fd");
  }
  const std::size_t dimension = header.size() - 1;
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t line_number = 1;
  int max_label = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line == "\r") {
      continue;
    }
    const auto fields = csv::split_fields(line);
    const std::string where = path + ":" + std::to_string(line_number);
    if (fields.size() != dimension + 1) {
      throw Error(ErrorCode::kParseError,
                  where + ": expected " + std::to_string(dimension + 1) +
                      " fields, got " + std::to_string(fields.size()));
    }
    double label = 0.0;
    if (!csv::parse_double(fields.front(), label) ||
        label != std::floor(label)) {
      throw Error(ErrorCode::kParseError, where + ": label is not an integer");
    }
    if (label < 1.0 || (classes > 0 && label > classes)) {
      throw Error(ErrorCode::kLabelRangeError,
                  where + ": label " + std::string(fields.front()) +
                      " out of range");
    }
    labels.push_back(static_cast<int>(label) - 1);
    max_label = std::max(max_label, static_cast<int>(label));
    for (std::size_t j = 1; j < fields.size(); ++j) {
      double value = 0.0;
      if (!csv::parse_double(fields[j], value) || !std::isfinite(value)) {
        throw Error(ErrorCode::kParseError,
                    where + ": bad feature '" + std::string(fields[j]) + "'");
      }
      values.push_back(value);
    }
  }
  if (labels.empty()) {
    throw Error(ErrorCode::kParseError, path + ": no samples");
  }
  const auto n = static_cast<Eigen::Index>(labels.size());
  Eigen::MatrixXd raw = Eigen::Map<const Eigen::Matrix<
      double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), n, static_cast<Eigen::Index>(dimension));
  Eigen::MatrixXd scaled;
  if (scaler != nullptr) {
    scaled = scaler->apply(raw);
  } else {
    const MinMaxScaler own = MinMaxScaler::fit(raw);
    scaled = own.apply(raw);
    if (fitted != nullptr) {
      *fitted = own;
    }
  }
  return LabeledDataset(std::move(scaled), std::move(labels),
                        classes > 0 ? classes : max_label);
}

namespace {

class IdxReader {
public:
  explicit IdxReader(const std::string &path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) {
      throw Error(ErrorCode::kIoError, "cannot open " + path);
    }
  }

  std::uint32_t read_u32() {
    std::array<unsigned char, 4> bytes{};
    read(bytes.data(), bytes.size());
    return (std::uint32_t{bytes[0]} << 24) | (std::uint32_t{bytes[1]} << 16) |
           (std::uint32_t{bytes[2]} << 8) | std::uint32_t{bytes[3]};
  }

  void read(unsigned char *out, std::size_t count) {
    in_.read(reinterpret_cast<char *>(out), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in_.gcount()) != count) {
      throw Error(ErrorCode::kParseError, path_ + ": truncated IDX file");
    }
  }

private:
  std::string path_;
  std::ifstream in_;
};

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

} // namespace

LabeledDataset load_idx(const std::string &images_path,
                        const std::string &labels_path, int classes) {
  IdxReader images(images_path);
  if (images.read_u32() != kIdxImageMagic) {
    throw Error(ErrorCode::kMagicMismatch,
                images_path + ": not an IDX image file");
  }
  const std::uint32_t n = images.read_u32();
  const std::uint32_t rows = images.read_u32();
  const std::uint32_t cols = images.read_u32();
  IdxReader labels(labels_path);
  if (labels.read_u32() != kIdxLabelMagic) {
    throw Error(ErrorCode::kMagicMismatch,
                labels_path + ": not an IDX label file");
  }
  if (labels.read_u32() != n) {
    throw Error(ErrorCode::kCountMismatch,
                "image and label files disagree on the sample count");
  }
  const std::size_t pixels = std::size_t{rows} * cols;
  std::vector<unsigned char> buffer(std::size_t{n} * pixels);
  images.read(buffer.data(), buffer.size());
  std::vector<unsigned char> raw_labels(n);
  labels.read(raw_labels.data(), raw_labels.size());

  Eigen::MatrixXd features(static_cast<Eigen::Index>(n),
                           static_cast<Eigen::Index>(pixels));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < pixels; ++j) {
      features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<double>(buffer[i * pixels + j]) / 255.0;
    }
  }
  std::vector<int> y(raw_labels.begin(), raw_labels.end());
  int max_label = 0;
  for (const int v : y) {
    max_label = std::max(max_label, v);
  }
  return LabeledDataset(std::move(features), std::move(y),
                        classes > 0 ? classes : max_label + 1);
}

void write_dataset_csv(const std::string &path, const LabeledDataset &data) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::kIoError, "cannot open " + path + " for writing");
  }
  out << "label";
  for (Eigen::Index j = 0; j < data.dimension(); ++j) {
    out << ",f" << j + 1;
  }
  out << '\n';
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    out << data.labels()[static_cast<std::size_t>(i)] + 1;
    for (Eigen::Index j = 0; j < data.dimension(); ++j) {
      out << ',' << csv::format_double(data.features()(i, j));
    }
    out << '\n';
  }
}

} // namespace priormix
