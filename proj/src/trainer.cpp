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

#include "priormix/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include "priormix/csv.hpp"

namespace priormix {

void adam_step(Mlp &params, const Mlp &grads, AdamState &state,
               const AdamOptions &options) {
  ++state.step;
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    auto w = params.weights[l].array();
    auto mw = state.first_moment.weights[l].array();
    auto vw = state.second_moment.weights[l].array();
    adam_update(w, grads.weights[l].array(), mw, vw, state.step, options);
    auto b = params.biases[l].array();
    auto mb = state.first_moment.biases[l].array();
    auto vb = state.second_moment.biases[l].array();
    adam_update(b, grads.biases[l].array(), mb, vb, state.step, options);
  }
}

std::vector<double> RunRecord::test_errors() const {
  std::vector<double> errors;
  errors.reserve(epochs.size());
  for (const auto &row : epochs) {
    errors.push_back(row.test_error);
  }
  return errors;
}

double test_error(const Mlp &model, const LabeledDataset &test) {
  if (test.dimension() != model.input_dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "test features do not match the model input");
  }
  const auto predictions = argmax_rows(forward(model, test.features()));
  Eigen::Index wrong = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] != test.labels()[i]) {
      ++wrong;
    }
  }
  return static_cast<double>(wrong) / static_cast<double>(test.size());
}

double error_drop(const std::vector<double> &trajectory) {
  if (trajectory.empty()) {
    throw Error(ErrorCode::kEmptyTrajectory, "no test errors recorded");
  }
  return trajectory.back() -
         *std::min_element(trajectory.begin(), trajectory.end());
}

namespace {

void validate(const TrainConfig &cfg, const BagCollection &bags) {
  if (cfg.epochs < 1) {
    throw Error(ErrorCode::kInvalidArgument, "epochs must be >= 1");
  }
  if (cfg.batches_per_epoch < 1) {
    throw Error(ErrorCode::kInvalidArgument, "batches_per_epoch must be >= 1");
  }
  if (!(cfg.adam.learning_rate > 0.0) || !(cfg.adam.weight_decay >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "learning rate must be > 0 and weight decay >= 0");
  }
  for (const auto &bag : bags.bags()) {
    if (bag.size() < cfg.batches_per_epoch) {
      throw Error(ErrorCode::kInvalidArgument,
                  "bag " + std::to_string(bag.index() + 1) + " has fewer than " +
                      std::to_string(cfg.batches_per_epoch) +
                      " samples; mini-batches would miss it");
    }
  }
}

struct Evaluation {
  double objective_value;
  double train_ru;
  double test_error;
};

} // namespace

TrainResult train(const BagCollection &bags, const ClassPriorMatrixd &theta,
                  const WeightMatrixd &weights, const Mlp &model_init,
                  const TrainConfig &cfg, const LabeledDataset &test) {
  validate(cfg, bags);
  if (theta.bags() != bags.bag_count() || weights.bags() != bags.bag_count()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "theta, W and the bag collection disagree on M");
  }
  ObjectiveContext context;
  context.theta = &theta;
  context.weights = &weights;
  context.prr = cfg.prr;
  context.flood_level = cfg.flood_level;

  const BatchSlice full = BatchSlice::from_bags(bags);
  const auto evaluate = [&](const Mlp &model) {
    const Eigen::MatrixXd logits = forward(model, full.features());
    return Evaluation{
        evaluate_objective(cfg.objective, full, logits, context).value,
        unbiased_risk(full, logits, weights).value, test_error(model, test)};
  };

  Mlp model = model_init;
  AdamState adam = AdamState::for_model(model);
  std::mt19937_64 rng(cfg.seed);
  RunRecord record;
  {
    const Evaluation initial = evaluate(model);
    record.epochs.push_back(
        {0, initial.objective_value, initial.train_ru, initial.test_error});
  }

  const auto bag_count = static_cast<std::size_t>(bags.bag_count());
  std::vector<std::vector<Eigen::Index>> order(bag_count);
  std::vector<std::vector<Eigen::Index>> slice_sizes(bag_count);
  for (std::size_t m = 0; m < bag_count; ++m) {
    order[m].resize(static_cast<std::size_t>(bags[m].size()));
    std::iota(order[m].begin(), order[m].end(), Eigen::Index{0});
    slice_sizes[m] = split_bag_sizes(bags[m].size(), cfg.batches_per_epoch);
  }

  Mlp previous = model;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (auto &perm : order) {
      std::shuffle(perm.begin(), perm.end(), rng);
    }
    std::vector<Eigen::Index> cursor(bag_count, 0);
    double objective_sum = 0.0;
    for (int b = 0; b < cfg.batches_per_epoch; ++b) {
      std::vector<Eigen::Index> offsets{0};
      for (std::size_t m = 0; m < bag_count; ++m) {
        offsets.push_back(offsets.back() +
                          slice_sizes[m][static_cast<std::size_t>(b)]);
      }
      Eigen::MatrixXd features(offsets.back(), bags.dimension());
      for (std::size_t m = 0; m < bag_count; ++m) {
        const auto take = slice_sizes[m][static_cast<std::size_t>(b)];
        for (Eigen::Index i = 0; i < take; ++i) {
          features.row(offsets[m] + i) = bags[m].features().row(
              order[m][static_cast<std::size_t>(cursor[m] + i)]);
        }
        cursor[m] += take;
      }
      const BatchSlice batch(std::move(features), std::move(offsets));
      const ForwardCache<double> cache = forward_pass(model, batch.features());
      const ObjectiveResult objective =
          evaluate_objective(cfg.objective, batch, cache.logits, context);
      if (!std::isfinite(objective.value) ||
          !objective.upstream.allFinite()) {
        throw Error(ErrorCode::kNonFiniteLoss,
                    "objective is not finite in epoch " +
                        std::to_string(epoch));
      }
      objective_sum += objective.value;
      adam_step(model, backward(model, cache, objective.upstream), adam,
                cfg.adam);
    }
    if (!model.all_finite()) {
      throw Error(ErrorCode::kNonFiniteLoss,
                  "parameters diverged in epoch " + std::to_string(epoch));
    }
    const Evaluation eval = evaluate(model);
    if (cfg.objective == Objective::kUStop && eval.train_ru < 0.0) {
      record.stopped_epoch = epoch;
      model = previous;
      break;
    }
    record.epochs.push_back(
        {epoch, objective_sum / cfg.batches_per_epoch, eval.train_ru,
         eval.test_error});
    if (cfg.objective == Objective::kUStop) {
      previous = model;
    }
  }
  const auto errors = record.test_errors();
  record.final_error = errors.back();
  record.error_drop = error_drop(errors);
  return TrainResult{std::move(model), std::move(record)};
}

void write_run_csv(const std::string &path, const RunRecord &record) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::kIoError, "cannot open " + path + " for writing");
  }
  out << "epoch,objective_value,train_ru,test_error\n";
  for (const auto &row : record.epochs) {
    out << row.epoch << ',' << csv::format_double(row.objective_value) << ','
        << csv::format_double(row.train_ru) << ','
        << csv::format_double(row.test_error) << '\n';
  }
}

} // namespace priormix
