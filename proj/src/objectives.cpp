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

#include "priormix/objectives.hpp"

#include <cmath>

namespace priormix {
namespace {

constexpr double kProbabilityFloor = 1e-12;
// Zero-one partial risks are ratios of small integers; the flood-level test
// allows for the round-off in 1 - theta.
constexpr double kFloodComparisonSlack = 1e-12;

void check_shape(const BatchSlice &batch, const Eigen::MatrixXd &logits,
                 Eigen::Index bags, Eigen::Index classes) {
  if (logits.rows() != batch.total_size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "logit rows differ from the batch size");
  }
  if (batch.bag_count() != bags || logits.cols() != classes) {
    throw Error(ErrorCode::kDimensionMismatch,
                "batch has " + std::to_string(batch.bag_count()) + " bags and " +
                    std::to_string(logits.cols()) + " classes, expected " +
                    std::to_string(bags) + " and " + std::to_string(classes));
  }
}

/// Fills the rows of bag m with the row vector `per_bag.row(m) / b_m`.
Eigen::MatrixXd spread_over_bags(const BatchSlice &batch,
                                 const Eigen::MatrixXd &per_bag) {
  Eigen::MatrixXd upstream(batch.total_size(), per_bag.cols());
  for (Eigen::Index m = 0; m < batch.bag_count(); ++m) {
    const double inv_size = 1.0 / static_cast<double>(batch.bag_size(m));
    upstream.middleRows(batch.offset(m), batch.bag_size(m)).rowwise() =
        per_bag.row(m) * inv_size;
  }
  return upstream;
}

} // namespace

BatchSlice::BatchSlice(Eigen::MatrixXd features,
                       std::vector<Eigen::Index> offsets)
    : features_(std::move(features)), offsets_(std::move(offsets)) {
  if (offsets_.size() < 2 || offsets_.front() != 0 ||
      offsets_.back() != features_.rows()) {
    throw Error(ErrorCode::kInvalidArgument, "malformed batch offsets");
  }
  for (std::size_t m = 0; m + 1 < offsets_.size(); ++m) {
    if (offsets_[m + 1] <= offsets_[m]) {
      throw Error(ErrorCode::kInvalidArgument,
                  "every bag must contribute to every mini-batch");
    }
  }
}

BatchSlice BatchSlice::from_bags(const BagCollection &bags) {
  Eigen::MatrixXd features(bags.total_size(), bags.dimension());
  std::vector<Eigen::Index> offsets{0};
  for (const auto &bag : bags.bags()) {
    features.middleRows(offsets.back(), bag.size()) = bag.features();
    offsets.push_back(offsets.back() + bag.size());
  }
  return BatchSlice(std::move(features), std::move(offsets));
}

Eigen::MatrixXd bag_means(const BatchSlice &batch,
                          const Eigen::MatrixXd &losses) {
  Eigen::MatrixXd means(batch.bag_count(), losses.cols());
  for (Eigen::Index m = 0; m < batch.bag_count(); ++m) {
    means.row(m) = losses.middleRows(batch.offset(m), batch.bag_size(m))
                       .colwise()
                       .mean();
  }
  return means;
}

const char *to_string(Objective objective) {
  switch (objective) {
  case Objective::kUnbiased:
    return "unbiased";
  case Objective::kBiased:
    return "biased";
  case Objective::kProp:
    return "prop";
  case Objective::kUCorrect:
    return "u-correct";
  case Objective::kUStop:
    return "u-stop";
  case Objective::kUFlood:
    return "u-flood";
  case Objective::kUPrr:
    return "u-prr";
  }
  return "unknown";
}

const std::vector<Objective> &all_objectives() {
  static const std::vector<Objective> objectives{
      Objective::kUnbiased, Objective::kBiased, Objective::kProp,
      Objective::kUCorrect, Objective::kUStop,  Objective::kUFlood,
      Objective::kUPrr};
  return objectives;
}

Objective parse_objective(std::string_view name) {
  for (const Objective objective : all_objectives()) {
    if (name == to_string(objective)) {
      return objective;
    }
  }
  throw Error(ErrorCode::kConfigError,
              "unknown method '" + std::string(name) +
                  "' (expected unbiased, biased, prop, u-correct, u-stop, "
                  "u-flood or u-prr)");
}

ObjectiveResult unbiased_risk(const BatchSlice &batch,
                              const Eigen::MatrixXd &logits,
                              const WeightMatrixd &weights) {
  check_shape(batch, logits, weights.bags(), weights.classes());
  const Eigen::MatrixXd partial = bag_means(batch, ce_loss_matrix(logits));
  ObjectiveResult result;
  result.value = weights.entries().cwiseProduct(partial).sum();
  result.smooth_value = result.value;
  result.upstream = spread_over_bags(batch, weights.entries());
  return result;
}

PartialRiskTable partial_risk_table(const BatchSlice &batch,
                                    const Eigen::MatrixXd &logits,
                                    const ClassPriorMatrixd &theta) {
  check_shape(batch, logits, theta.bags(), theta.classes());
  PartialRiskTable table;
  table.surrogate = bag_means(batch, ce_loss_matrix(logits));
  table.zero_one = bag_means(batch, zo_loss_matrix(logits));
  table.flood_levels =
      Eigen::MatrixXd::Ones(theta.bags(), theta.classes()) - theta.entries();
  return table;
}

ObjectiveResult u_prr(const BatchSlice &batch, const Eigen::MatrixXd &logits,
                      const WeightMatrixd &weights,
                      const ClassPriorMatrixd &theta, const PrrConfig &cfg) {
  if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0) || !(cfg.s_ga > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "PRR needs alpha in [0, 1] and s_ga > 0");
  }
  if (weights.bags() != theta.bags() || weights.classes() != theta.classes()) {
    throw Error(ErrorCode::kDimensionMismatch, "W and theta shapes differ");
  }
  const Eigen::MatrixXd lambda =
      cfg.lambda ? *cfg.lambda : weights.entries().cwiseAbs();
  if (lambda.rows() != theta.bags() || lambda.cols() != theta.classes()) {
    throw Error(ErrorCode::kDimensionMismatch, "lambda shape differs from W");
  }
  ObjectiveResult base = unbiased_risk(batch, logits, weights);
  if (cfg.alpha == 1.0) {
    return base;
  }
  const PartialRiskTable table = partial_risk_table(batch, logits, theta);
  const Eigen::MatrixXd gap = table.zero_one - table.flood_levels;
  const Eigen::MatrixXd surrogate_gap = table.surrogate - table.flood_levels;

  // Zero-one partial risks pick the branch; descent at or above the flood
  // level, scaled ascent below it.
  Eigen::MatrixXd branch(theta.bags(), theta.classes());
  for (Eigen::Index m = 0; m < branch.rows(); ++m) {
    for (Eigen::Index k = 0; k < branch.cols(); ++k) {
      branch(m, k) = gap(m, k) >= -kFloodComparisonSlack ? 1.0 : -cfg.s_ga;
    }
  }
  const double reg_value = lambda.cwiseProduct(gap.cwiseAbs()).sum();
  const double reg_smooth =
      lambda.cwiseProduct(branch).cwiseProduct(surrogate_gap).sum();

  ObjectiveResult result;
  result.value = cfg.alpha * base.value + (1.0 - cfg.alpha) * reg_value;
  result.smooth_value =
      cfg.alpha * base.smooth_value + (1.0 - cfg.alpha) * reg_smooth;
  result.upstream =
      cfg.alpha * base.upstream +
      (1.0 - cfg.alpha) *
          spread_over_bags(batch, lambda.cwiseProduct(branch));
  return result;
}

ObjectiveResult u_flood(const BatchSlice &batch, const Eigen::MatrixXd &logits,
                        const WeightMatrixd &weights, double flood_level) {
  if (!(flood_level >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "flood level must be >= 0");
  }
  ObjectiveResult result = unbiased_risk(batch, logits, weights);
  const double risk = result.value;
  result.value = std::abs(risk - flood_level) + flood_level;
  result.smooth_value = result.value;
  if (risk < flood_level) {
    result.upstream = -result.upstream;
  }
  return result;
}

ObjectiveResult u_correct(const BatchSlice &batch,
                          const Eigen::MatrixXd &logits,
                          const WeightMatrixd &weights) {
  check_shape(batch, logits, weights.bags(), weights.classes());
  const Eigen::MatrixXd partial = bag_means(batch, ce_loss_matrix(logits));
  const Eigen::RowVectorXd per_class =
      weights.entries().cwiseProduct(partial).colwise().sum();
  const Eigen::RowVectorXd sign =
      (per_class.array() < 0.0).select(-Eigen::RowVectorXd::Ones(per_class.size()),
                                       Eigen::RowVectorXd::Ones(per_class.size()));
  ObjectiveResult result;
  result.value = per_class.cwiseAbs().sum();
  result.smooth_value = result.value;
  const Eigen::MatrixXd signed_weights =
      weights.entries().array().rowwise() * sign.array();
  result.upstream = spread_over_bags(batch, signed_weights);
  return result;
}

ObjectiveResult biased_proportion(const BatchSlice &batch,
                                  const Eigen::MatrixXd &logits,
                                  const ClassPriorMatrixd &theta) {
  check_shape(batch, logits, theta.bags(), theta.classes());
  const Eigen::MatrixXd partial = bag_means(batch, ce_loss_matrix(logits));
  const auto bags = static_cast<double>(theta.bags());
  Eigen::MatrixXd per_bag = Eigen::MatrixXd::Zero(theta.bags(), theta.classes());
  double value = 0.0;
  for (Eigen::Index m = 0; m < theta.bags(); ++m) {
    const Eigen::Index pseudo = theta.dominant_class(m);
    value += partial(m, pseudo) / bags;
    per_bag(m, pseudo) = 1.0 / bags;
  }
  ObjectiveResult result;
  result.value = value;
  result.smooth_value = value;
  result.upstream = spread_over_bags(batch, per_bag);
  return result;
}

ObjectiveResult proportion_loss(const BatchSlice &batch,
                                const Eigen::MatrixXd &logits,
                                const ClassPriorMatrixd &theta) {
  check_shape(batch, logits, theta.bags(), theta.classes());
  const Eigen::MatrixXd probabilities = softmax_rows(logits);
  const Eigen::MatrixXd mean_prob =
      bag_means(batch, probabilities).cwiseMax(kProbabilityFloor);
  ObjectiveResult result;
  result.value =
      -(theta.entries().array() * mean_prob.array().log()).sum();
  result.smooth_value = result.value;
  // With a_ik = theta_mk p_ik / (b_m pbar_mk), the gradient of the loss in
  // the logits is (sum_k a_ik) p_i - a_i, which is exactly what backward()
  // produces from upstream weights a.
  const Eigen::MatrixXd ratio =
      theta.entries().array() / mean_prob.array();
  result.upstream = spread_over_bags(batch, ratio);
  result.upstream.array() *= probabilities.array();
  return result;
}

ObjectiveResult unbiased_risk(const BatchSlice &batch,
                              const WeightMatrixd &weights, const Mlp &model) {
  return unbiased_risk(batch, forward(model, batch.features()), weights);
}

PartialRiskTable partial_risk_table(const BatchSlice &batch, const Mlp &model,
                                    const ClassPriorMatrixd &theta) {
  return partial_risk_table(batch, forward(model, batch.features()), theta);
}

ObjectiveResult u_prr(const BatchSlice &batch, const WeightMatrixd &weights,
                      const ClassPriorMatrixd &theta, const PrrConfig &cfg,
                      const Mlp &model) {
  return u_prr(batch, forward(model, batch.features()), weights, theta, cfg);
}

ObjectiveResult u_flood(const BatchSlice &batch, const WeightMatrixd &weights,
                        const Mlp &model, double flood_level) {
  return u_flood(batch, forward(model, batch.features()), weights,
                 flood_level);
}

ObjectiveResult u_correct(const BatchSlice &batch, const WeightMatrixd &weights,
                          const Mlp &model) {
  return u_correct(batch, forward(model, batch.features()), weights);
}

ObjectiveResult biased_proportion(const BatchSlice &batch,
                                  const ClassPriorMatrixd &theta,
                                  const Mlp &model) {
  return biased_proportion(batch, forward(model, batch.features()), theta);
}

ObjectiveResult proportion_loss(const BatchSlice &batch,
                                const ClassPriorMatrixd &theta,
                                const Mlp &model) {
  return proportion_loss(batch, forward(model, batch.features()), theta);
}

ObjectiveResult evaluate_objective(Objective objective,
                                   const BatchSlice &batch,
                                   const Eigen::MatrixXd &logits,
                                   const ObjectiveContext &context) {
  const auto need_weights = [&]() -> const WeightMatrixd & {
    if (context.weights == nullptr) {
      throw Error(ErrorCode::kInvalidArgument, "objective needs W");
    }
    return *context.weights;
  };
  const auto need_theta = [&]() -> const ClassPriorMatrixd & {
    if (context.theta == nullptr) {
      throw Error(ErrorCode::kInvalidArgument, "objective needs theta");
    }
    return *context.theta;
  };
  switch (objective) {
  case Objective::kUnbiased:
  case Objective::kUStop:
    return unbiased_risk(batch, logits, need_weights());
  case Objective::kBiased:
    return biased_proportion(batch, logits, need_theta());
  case Objective::kProp:
    return proportion_loss(batch, logits, need_theta());
  case Objective::kUCorrect:
    return u_correct(batch, logits, need_weights());
  case Objective::kUFlood:
    return u_flood(batch, logits, need_weights(), context.flood_level);
  case Objective::kUPrr:
    return u_prr(batch, logits, need_weights(), need_theta(), context.prr);
  }
  throw Error(ErrorCode::kInvalidArgument, "unhandled objective");
}

} // namespace priormix
