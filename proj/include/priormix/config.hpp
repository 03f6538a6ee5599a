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

#ifndef PRIORMIX_CONFIG_HPP_
#define PRIORMIX_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "priormix/eval.hpp"

namespace priormix {

struct DatasetSource {
  std::string name;
  std::string format = "csv"; // csv | idx
  std::string train;
  std::string test;
  // idx only
  std::string train_labels;
  std::string test_labels;
};

bool operator==(const DatasetSource &a, const DatasetSource &b);
bool operator==(const ThetaSetting &a, const ThetaSetting &b);

/*
 * One JSON document describes a training run or a sweep. `train` uses the
 * first dataset, theta setting and method.
 */
struct ExperimentConfig {
  std::vector<DatasetSource> datasets;
  std::vector<ThetaSetting> theta_settings;
  std::vector<std::string> methods;

  int depth = 3;
  int hidden_width = 128;
  int epochs = 500;
  int batches_per_epoch = 10;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  double alpha = 0.5;
  double s_ga = 1.0;
  double flood_b = 0.0;

  std::vector<double> noise_rates{0.0};
  int trials = 5;
  std::uint64_t base_seed = 0;
  std::string output_dir = "out";
  int jobs = 1;
  bool allow_offgrid = false;
  bool svg = false;

  bool operator==(const ExperimentConfig &) const = default;
};

/// Hyperparameter grids of the reference protocol.
struct HyperparameterGrids {
  std::vector<double> learning_rates{5e-5, 1e-4, 2e-4, 5e-4, 1e-3};
  std::vector<int> batches_per_epoch{500, 200, 100, 50, 20, 10};
  std::vector<double> alphas{0.1, 0.3, 0.5, 0.7, 0.9};
  std::vector<double> s_ga{0.1, 0.2, 0.5, 1, 2, 5, 10};
  std::vector<double> flood_levels{0, 0.05, 0.1};
};

nlohmann::json grids_to_json(const HyperparameterGrids &grids);

ExperimentConfig config_from_json(const nlohmann::json &doc);
nlohmann::json config_to_json(const ExperimentConfig &config);
ExperimentConfig load_config(const std::string &path);

/*
 * Throws ConfigError for unknown methods or theta kinds, missing files, and
 * off-grid hyperparameters (unless allow_offgrid).
 */
void validate_config(const ExperimentConfig &config);

/// Reads every dataset of the config; test splits reuse the train scaler.
std::vector<DatasetEntry> load_datasets(const ExperimentConfig &config);

/// Shared training hyperparameters for `objective`.
TrainConfig make_train_config(const ExperimentConfig &config,
                              Objective objective);

SweepSpec make_sweep_spec(const ExperimentConfig &config);

} // namespace priormix

#endif // PRIORMIX_CONFIG_HPP_
