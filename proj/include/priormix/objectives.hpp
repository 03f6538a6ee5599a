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

#ifndef PRIORMIX_OBJECTIVES_HPP_
#define PRIORMIX_OBJECTIVES_HPP_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "priormix/bags.hpp"
#include "priormix/model.hpp"
#include "priormix/prior_algebra.hpp"

namespace priormix {

/*
 * A mini-batch made of one slice per bag. Slices are stacked row-wise in
 * `features`; rows [offsets[m], offsets[m + 1]) belong to bag m. No labels
 * travel with a batch.
 */
class BatchSlice {
public:
  BatchSlice(Eigen::MatrixXd features, std::vector<Eigen::Index> offsets);

  /// Every bag in full, in bag order.
  static BatchSlice from_bags(const BagCollection &bags);

  Eigen::Index bag_count() const {
    return static_cast<Eigen::Index>(offsets_.size()) - 1;
  }
  Eigen::Index bag_size(Eigen::Index m) const {
    return offsets_[static_cast<std::size_t>(m) + 1] -
           offsets_[static_cast<std::size_t>(m)];
  }
  Eigen::Index offset(Eigen::Index m) const {
    return offsets_[static_cast<std::size_t>(m)];
  }
  Eigen::Index total_size() const { return features_.rows(); }
  const Eigen::MatrixXd &features() const { return features_; }
  const std::vector<Eigen::Index> &offsets() const { return offsets_; }

private:
  Eigen::MatrixXd features_;
  std::vector<Eigen::Index> offsets_;
};

/// Column means of `losses` within each bag slice: an M x K table.
Eigen::MatrixXd bag_means(const BatchSlice &batch,
                          const Eigen::MatrixXd &losses);

/*
 * Objective value plus the per-(sample, class) weights that turn backward()
 * into its gradient. `smooth_value` is the differentiable function whose
 * gradient those weights encode; it differs from `value` only for U-PRR, where
 * the reported regularizer uses zero-one partial risks but the gradient runs
 * through the surrogate ones.
 */
struct ObjectiveResult {
  double value = 0.0;
  double smooth_value = 0.0;
  Eigen::MatrixXd upstream;
};

struct PartialRiskTable {
  Eigen::MatrixXd surrogate;
  Eigen::MatrixXd zero_one;
  Eigen::MatrixXd flood_levels;
};

struct PrrConfig {
  double alpha = 0.5;
  double s_ga = 1.0;
  /// Trade-off weights; |W| when empty.
  std::optional<Eigen::MatrixXd> lambda;
};

enum class Objective {
  kUnbiased,
  kBiased,
  kProp,
  kUCorrect,
  kUStop,
  kUFlood,
  kUPrr,
};

const char *to_string(Objective objective);
/// Accepts `unbiased | biased | prop | u-correct | u-stop | u-flood | u-prr`.
Objective parse_objective(std::string_view name);
const std::vector<Objective> &all_objectives();

ObjectiveResult unbiased_risk(const BatchSlice &batch,
                              const Eigen::MatrixXd &logits,
                              const WeightMatrixd &weights);

PartialRiskTable partial_risk_table(const BatchSlice &batch,
                                    const Eigen::MatrixXd &logits,
                                    const ClassPriorMatrixd &theta);

ObjectiveResult u_prr(const BatchSlice &batch, const Eigen::MatrixXd &logits,
                      const WeightMatrixd &weights,
                      const ClassPriorMatrixd &theta, const PrrConfig &cfg);

ObjectiveResult u_flood(const BatchSlice &batch, const Eigen::MatrixXd &logits,
                        const WeightMatrixd &weights, double flood_level);

ObjectiveResult u_correct(const BatchSlice &batch,
                          const Eigen::MatrixXd &logits,
                          const WeightMatrixd &weights);

ObjectiveResult biased_proportion(const BatchSlice &batch,
                                  const Eigen::MatrixXd &logits,
                                  const ClassPriorMatrixd &theta);

ObjectiveResult proportion_loss(const BatchSlice &batch,
                                const Eigen::MatrixXd &logits,
                                const ClassPriorMatrixd &theta);

// Model-level entry points; each runs the forward pass then delegates.
ObjectiveResult unbiased_risk(const BatchSlice &batch,
                              const WeightMatrixd &weights, const Mlp &model);
PartialRiskTable partial_risk_table(const BatchSlice &batch, const Mlp &model,
                                    const ClassPriorMatrixd &theta);
ObjectiveResult u_prr(const BatchSlice &batch, const WeightMatrixd &weights,
                      const ClassPriorMatrixd &theta, const PrrConfig &cfg,
                      const Mlp &model);
ObjectiveResult u_flood(const BatchSlice &batch, const WeightMatrixd &weights,
                        const Mlp &model, double flood_level);
ObjectiveResult u_correct(const BatchSlice &batch, const WeightMatrixd &weights,
                          const Mlp &model);
ObjectiveResult biased_proportion(const BatchSlice &batch,
                                  const ClassPriorMatrixd &theta,
                                  const Mlp &model);
ObjectiveResult proportion_loss(const BatchSlice &batch,
                                const ClassPriorMatrixd &theta,
                                const Mlp &model);

/// Everything an objective may need besides the batch.
struct ObjectiveContext {
  const ClassPriorMatrixd *theta = nullptr;
  const WeightMatrixd *weights = nullptr;
  PrrConfig prr;
  double flood_level = 0.0;
};

/// Dispatch by enum. U-stop trains on the unbiased objective.
ObjectiveResult evaluate_objective(Objective objective,
                                   const BatchSlice &batch,
                                   const Eigen::MatrixXd &logits,
                                   const ObjectiveContext &context);

} // namespace priormix

#endif // PRIORMIX_OBJECTIVES_HPP_
