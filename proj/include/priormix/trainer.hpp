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

#ifndef PRIORMIX_TRAINER_HPP_
#define PRIORMIX_TRAINER_HPP_

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "priormix/bags.hpp"
#include "priormix/model.hpp"
#include "priormix/objectives.hpp"
#include "priormix/prior_algebra.hpp"

namespace priormix {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

/*
 * One bias-corrected Adam update in place. `step` is the 1-based index of the
 * update being applied. Weight decay enters as an additive decay * param term
 * in the gradient.
 */
template <typename DerivedP, typename DerivedG, typename DerivedM,
          typename DerivedV>
void adam_update(Eigen::ArrayBase<DerivedP> &params,
                 const Eigen::ArrayBase<DerivedG> &grads,
                 Eigen::ArrayBase<DerivedM> &first_moment,
                 Eigen::ArrayBase<DerivedV> &second_moment, long step,
                 const AdamOptions &options) {
  using Scalar = typename DerivedP::Scalar;
  const auto effective = (grads + Scalar(options.weight_decay) * params).eval();
  first_moment = Scalar(options.beta1) * first_moment +
                 Scalar(1 - options.beta1) * effective;
  second_moment = Scalar(options.beta2) * second_moment +
                  Scalar(1 - options.beta2) * effective.square();
  const Scalar correction1 =
      Scalar(1) - std::pow(Scalar(options.beta1), static_cast<Scalar>(step));
  const Scalar correction2 =
      Scalar(1) - std::pow(Scalar(options.beta2), static_cast<Scalar>(step));
  params -= Scalar(options.learning_rate) * (first_moment / correction1) /
            ((second_moment / correction2).sqrt() + Scalar(options.epsilon));
}

struct AdamState {
  Mlp first_moment;
  Mlp second_moment;
  long step = 0;

  static AdamState for_model(const Mlp &model) {
    return AdamState{Mlp::zeros(model.layer_dims), Mlp::zeros(model.layer_dims),
                     0};
  }
};

void adam_step(Mlp &params, const Mlp &grads, AdamState &state,
               const AdamOptions &options);

struct TrainConfig {
  Objective objective = Objective::kUPrr;
  int epochs = 100;
  int batches_per_epoch = 10;
  AdamOptions adam;
  PrrConfig prr;
  double flood_level = 0.0;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;
  double objective_value = 0.0;
  double train_ru = 0.0;
  double test_error = 0.0;
};

/*
 * Row 0 evaluates the initial model; row t is the state after epoch t. For
 * U-stop the rows end at the epoch whose model is returned.
 */
struct RunRecord {
  std::vector<EpochRecord> epochs;
  double final_error = 0.0;
  double error_drop = 0.0;
  std::optional<int> stopped_epoch;

  std::vector<double> test_errors() const;
};

struct TrainResult {
  Mlp model;
  RunRecord record;
};

/*
 * Stratified mini-batch training: every epoch shuffles each bag on its own,
 * cuts it into `batches_per_epoch` contiguous slices, and each optimizer step
 * sees one slice from every bag.
 */
TrainResult train(const BagCollection &bags, const ClassPriorMatrixd &theta,
                  const WeightMatrixd &weights, const Mlp &model_init,
                  const TrainConfig &cfg, const LabeledDataset &test);

/// Fraction of test samples whose argmax prediction misses the label.
double test_error(const Mlp &model, const LabeledDataset &test);

/// Last entry minus the smallest entry.
double error_drop(const std::vector<double> &trajectory);

void write_run_csv(const std::string &path, const RunRecord &record);

} // namespace priormix

#endif // PRIORMIX_TRAINER_HPP_
