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

#ifndef PRIORMIX_EVAL_HPP_
#define PRIORMIX_EVAL_HPP_

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "priormix/bags.hpp"
#include "priormix/model.hpp"
#include "priormix/objectives.hpp"
#include "priormix/prior_algebra.hpp"
#include "priormix/trainer.hpp"

namespace priormix {

/// Stable splitmix64 chain over the base seed and the given indices.
std::uint64_t derive_seed(std::uint64_t base,
                          std::initializer_list<std::uint64_t> indices);

struct OracleResult {
  double mc_mean = 0.0;
  double supervised_risk = 0.0;
  double standard_error = 0.0;
  double z_score = 0.0;
};

/// sum_k pi_k * mean cross-entropy of the class-k samples against label k.
double supervised_risk(const Mlp &model, const LabeledDataset &data,
                       const TestPriorsd &pi);

/*
 * Averages the unbiased risk of a fixed model over `redraws` independent bag
 * collections drawn from `source` with priors theta, and compares it with the
 * labeled risk. The second overload takes the rewriting weights explicitly so
 * a deliberately wrong W can serve as a negative control.
 */
OracleResult unbiasedness_oracle(const LabeledDataset &source,
                                 const ClassPriorMatrixd &theta,
                                 const TestPriorsd &pi, const Mlp &model,
                                 Eigen::Index bag_size, int redraws,
                                 std::uint64_t seed);
OracleResult unbiasedness_oracle(const LabeledDataset &source,
                                 const ClassPriorMatrixd &theta,
                                 const WeightMatrixd &weights,
                                 const TestPriorsd &pi, const Mlp &model,
                                 Eigen::Index bag_size, int redraws,
                                 std::uint64_t seed);

/// A named recipe for the class-prior matrix of one sweep setting.
struct ThetaSetting {
  std::string name;
  std::string kind; // symmetric | diag | nonsquare | file
  double a = 0.5;
  double b = 0.05;
  std::string path;
};

ClassPriorMatrixd make_theta(const ThetaSetting &setting, int classes,
                             std::uint64_t seed);

struct DatasetEntry {
  std::string name;
  LabeledDataset train;
  LabeledDataset test;
};

struct MethodEntry {
  std::string name;
  TrainConfig config;
};

struct SweepSpec {
  std::vector<DatasetEntry> datasets;
  std::vector<ThetaSetting> theta_settings;
  std::vector<MethodEntry> methods;
  std::vector<double> noise_rates{0.0};
  int trials = 5;
  std::uint64_t base_seed = 0;
  int depth = 3;
  int hidden_width = 128;
  int jobs = 1;
};

struct CellResult {
  std::string dataset;
  std::string theta_setting;
  std::string method;
  double noise_rate = 0.0;
  int trial = 0;
  bool ok = false;
  std::string error;
  RunRecord record;
};

struct AggregateRow {
  std::string dataset;
  std::string theta_setting;
  std::string method;
  double noise_rate = 0.0;
  int trials = 0;
  double err_mean = 0.0;
  double err_std = 0.0;
  double drop_mean = 0.0;
  double drop_std = 0.0;
};

struct SweepResult {
  std::vector<CellResult> cells;

  /// Mean and sample standard deviation (percent) per setting over trials.
  std::vector<AggregateRow> aggregate() const;
};

/*
 * One training run per (dataset, setting, noise, method, trial). Bags, the
 * true priors and the initial model depend on (dataset, setting, trial) only,
 * so every method and noise level of a trial sees the same data. The noisy
 * priors handed to the learner depend on the noise index as well. Failures are
 * recorded in the cell and do not stop the sweep.
 */
SweepResult run_sweep(const SweepSpec &spec,
                      const std::function<void(const CellResult &)> &progress =
                          nullptr);

/// A single cell, as run_sweep executes it; `trained` receives the model.
CellResult run_cell(const SweepSpec &spec, std::size_t dataset_index,
                    std::size_t theta_index, std::size_t method_index,
                    std::size_t noise_index, int trial,
                    Mlp *trained = nullptr);

void write_sweep_csv(const std::string &path, const SweepResult &result);
void write_aggregate_csv(const std::string &path,
                         const std::vector<AggregateRow> &rows);
void write_failures_csv(const std::string &path, const SweepResult &result);

/// Self-contained SVG: mean error against noise rate, one line per setting.
std::string noise_chart_svg(const std::vector<AggregateRow> &rows);

} // namespace priormix

#endif // PRIORMIX_EVAL_HPP_
