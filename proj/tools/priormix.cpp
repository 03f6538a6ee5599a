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

// priormix: train classifiers from unlabeled bags with known class priors.
//
//   priormix gen-theta --kind symmetric --a 0.5 --b 0.05 --k 10 --out t.csv
//   priormix weights --theta t.csv [--pi pi.csv] --out w.csv
//   priormix train --config run.json
//   priormix sweep --config sweep.json --jobs 2
//   priormix grids

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

#include "priormix/config.hpp"
#include "priormix/csv.hpp"
#include "priormix/eval.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace priormix;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

int exit_code_for(ErrorCode code) {
  switch (code) {
  case ErrorCode::kConfigError:
  case ErrorCode::kInvalidArgument:
  case ErrorCode::kInvalidSimplex:
  case ErrorCode::kGenerationFailed:
    return kExitConfig;
  case ErrorCode::kParseError:
  case ErrorCode::kLabelRangeError:
  case ErrorCode::kMagicMismatch:
  case ErrorCode::kCountMismatch:
  case ErrorCode::kIoError:
  case ErrorCode::kInsufficientClassSamples:
  case ErrorCode::kDimensionMismatch:
    return kExitData;
  case ErrorCode::kRankDeficient:
  case ErrorCode::kNonFiniteLoss:
  case ErrorCode::kEmptyTrajectory:
    return kExitNumeric;
  }
  return kExitNumeric;
}

int report(ErrorCode code, const std::string &message) {
  const int exit_code = exit_code_for(code);
  std::cerr << json{{"error", to_string(code)},
                    {"message", message},
                    {"exit_code", exit_code}}
                   .dump()
            << std::endl;
  return exit_code;
}

void apply_env_seed(ExperimentConfig &config) {
  if (const char *env = std::getenv("PRIORMIX_SEED")) {
    try {
      config.base_seed = std::stoull(env);
    } catch (const std::exception &) {
      throw Error(ErrorCode::kConfigError,
                  std::string("PRIORMIX_SEED is not an integer: ") + env);
    }
  }
}

/// Flags that override fields of the JSON config.
struct Overrides {
  std::optional<std::string> output_dir;
  std::optional<std::string> method;
  std::optional<int> epochs;
  std::optional<int> batches;
  std::optional<double> learning_rate;
  std::optional<double> alpha;
  std::optional<double> s_ga;
  std::optional<double> flood_b;
  std::optional<double> weight_decay;
  std::optional<int> trials;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
  bool allow_offgrid = false;

  void add_to(CLI::App *cmd) {
    cmd->add_option("--output-dir", output_dir, "Output directory");
    cmd->add_option("--method", method, "Replace the method list");
    cmd->add_option("--epochs", epochs);
    cmd->add_option("--batches", batches, "Mini-batches per epoch");
    cmd->add_option("--lr", learning_rate, "Adam learning rate");
    cmd->add_option("--alpha", alpha, "PRR alpha");
    cmd->add_option("--s-ga", s_ga, "PRR gradient-ascent scale");
    cmd->add_option("--flood-b", flood_b, "U-flood level");
    cmd->add_option("--weight-decay", weight_decay);
    cmd->add_option("--trials", trials);
    cmd->add_option("--jobs", jobs, "Parallel sweep cells");
    cmd->add_option("--seed", seed, "Base seed");
    cmd->add_flag("--allow-offgrid", allow_offgrid,
                  "Accept hyperparameters off the reference grids");
  }

  void apply(ExperimentConfig &config) const {
    if (output_dir) config.output_dir = *output_dir;
    if (method) config.methods = {*method};
    if (epochs) config.epochs = *epochs;
    if (batches) config.batches_per_epoch = *batches;
    if (learning_rate) config.learning_rate = *learning_rate;
    if (alpha) config.alpha = *alpha;
    if (s_ga) config.s_ga = *s_ga;
    if (flood_b) config.flood_b = *flood_b;
    if (weight_decay) config.weight_decay = *weight_decay;
    if (trials) config.trials = *trials;
    if (jobs) config.jobs = *jobs;
    if (seed) config.base_seed = *seed;
    if (allow_offgrid) config.allow_offgrid = true;
  }
};

ExperimentConfig prepare_config(const std::string &path,
                                const Overrides &overrides) {
  ExperimentConfig config = load_config(path);
  overrides.apply(config);
  apply_env_seed(config);
  validate_config(config);
  fs::create_directories(config.output_dir);
  return config;
}

void write_text(const fs::path &path, const std::string &text) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  }
  out << text;
}

int cmd_gen_theta(const std::string &kind, double a, double b, int k,
                  std::uint64_t seed, const std::string &out_path) {
  ThetaSetting setting;
  setting.kind = kind;
  setting.a = a;
  setting.b = b;
  const ClassPriorMatrixd theta = make_theta(setting, k, seed);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(theta.entries());
  const auto &sv = svd.singularValues();
  const double condition = sv(0) / sv(sv.size() - 1);
  const std::string info = "rank=" + std::to_string(numerical_rank(theta.entries())) +
                           " condition=" + csv::format_double(condition);
  if (out_path.empty() || out_path == "-") {
    write_matrix_csv("/dev/stdout", theta.entries());
    std::cerr << info << std::endl;
  } else {
    save_theta_csv(out_path, theta);
    std::cout << info << std::endl;
  }
  return 0;
}

int cmd_weights(const std::string &theta_path, const std::string &pi_path,
                const std::string &out_path) {
  const ClassPriorMatrixd theta = load_theta_csv(theta_path);
  const TestPriorsd pi = pi_path.empty()
                             ? TestPriorsd::uniform(theta.classes())
                             : load_priors_csv(pi_path);
  const WeightMatrixd weights = compute_weights(theta, pi);
  write_matrix_csv(out_path.empty() ? "/dev/stdout" : out_path,
                   weights.entries());
  std::cerr << "max_abs=" << csv::format_double(weights.max_abs()) << std::endl;
  return 0;
}

int cmd_train(const std::string &config_path, const Overrides &overrides) {
  const ExperimentConfig config = prepare_config(config_path, overrides);
  SweepSpec spec = make_sweep_spec(config);
  spec.trials = 1;
  Mlp model;
  const CellResult cell = run_cell(spec, 0, 0, 0, 0, 0, &model);
  if (!cell.ok) {
    throw std::runtime_error(cell.error);
  }
  const fs::path out(config.output_dir);
  write_run_csv((out / "run.csv").string(), cell.record);
  save_checkpoint((out / "model.bin").string(), model);
  json summary{{"err", cell.record.final_error},
               {"delta_e", cell.record.error_drop},
               {"stopped_epoch", cell.record.stopped_epoch
                                     ? json(*cell.record.stopped_epoch)
                                     : json(nullptr)},
               {"epochs_recorded", cell.record.epochs.size()},
               {"config", config_to_json(config)}};
  write_text(out / "summary.json", summary.dump(2) + "\n");
  std::cout << "err=" << csv::format_double(100.0 * cell.record.final_error)
            << "% delta_e="
            << csv::format_double(100.0 * cell.record.error_drop) << "%";
  if (cell.record.stopped_epoch) {
    std::cout << " stopped_epoch=" << *cell.record.stopped_epoch;
  }
  std::cout << std::endl;
  return 0;
}

int cmd_sweep(const std::string &config_path, const Overrides &overrides) {
  const ExperimentConfig config = prepare_config(config_path, overrides);
  const SweepSpec spec = make_sweep_spec(config);
  const SweepResult result = run_sweep(spec, [](const CellResult &cell) {
    std::cerr << cell.dataset << " " << cell.theta_setting << " "
              << cell.method << " noise=" << cell.noise_rate
              << " trial=" << cell.trial << ": ";
    if (cell.ok) {
      std::cerr << "err=" << 100.0 * cell.record.final_error << "%"
                << std::endl;
    } else {
      std::cerr << "FAILED " << cell.error << std::endl;
    }
  });
  const fs::path out(config.output_dir);
  const auto rows = result.aggregate();
  write_sweep_csv((out / "sweep.csv").string(), result);
  write_aggregate_csv((out / "aggregate.csv").string(), rows);
  write_failures_csv((out / "failures.csv").string(), result);
  if (config.svg || config.noise_rates.size() > 1) {
    write_text(out / "noise.svg", noise_chart_svg(rows));
  }
  write_text(out / "config.json", config_to_json(config).dump(2) + "\n");
  for (const auto &row : rows) {
    std::cout << row.dataset << "," << row.theta_setting << "," << row.method
              << ",noise=" << row.noise_rate << ": err " << row.err_mean
              << " (" << row.err_std << "), drop " << row.drop_mean << " ("
              << row.drop_std << ")" << std::endl;
  }
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Learning classifiers from unlabeled bags with known class "
               "priors"};
  app.require_subcommand(1);

  std::string kind = "symmetric";
  double a = 0.5;
  double b = 0.05;
  int k = 10;
  std::uint64_t seed = 0;
  std::string out_path;
  auto *gen = app.add_subcommand("gen-theta", "Write a class-prior matrix CSV");
  gen->add_option("--kind", kind, "symmetric | diag | nonsquare")
      ->check(CLI::IsMember({"symmetric", "diag", "nonsquare"}));
  gen->add_option("--a", a);
  gen->add_option("--b", b);
  gen->add_option("--k", k, "Number of classes");
  gen->add_option("--seed", seed);
  gen->add_option("--out", out_path, "Output CSV (stdout when omitted)");

  std::string theta_path;
  std::string pi_path;
  std::string weights_out;
  auto *weights = app.add_subcommand("weights", "Rewriting weights W for a theta CSV");
  weights->add_option("--theta", theta_path)->required();
  weights->add_option("--pi", pi_path, "Test priors CSV (uniform when omitted)");
  weights->add_option("--out", weights_out);

  std::string config_path;
  Overrides train_overrides;
  auto *train_cmd = app.add_subcommand("train", "Train one model from a config");
  train_cmd->add_option("--config", config_path)->required();
  train_overrides.add_to(train_cmd);

  Overrides sweep_overrides;
  auto *sweep = app.add_subcommand("sweep", "Run a method x setting x trial sweep");
  sweep->add_option("--config", config_path)->required();
  sweep_overrides.add_to(sweep);

  auto *grids = app.add_subcommand("grids", "Print the reference hyperparameter grids");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) {
      return cmd_gen_theta(kind, a, b, k, seed, out_path);
    }
    if (*weights) {
      return cmd_weights(theta_path, pi_path, weights_out);
    }
    if (*train_cmd) {
      return cmd_train(config_path, train_overrides);
    }
    if (*sweep) {
      return cmd_sweep(config_path, sweep_overrides);
    }
    if (*grids) {
      std::cout << grids_to_json(HyperparameterGrids{}).dump(2) << std::endl;
      return 0;
    }
  } catch (const Error &e) {
    return report(e.code(), e.what());
  } catch (const std::exception &e) {
    // Cell failures arrive as text; recover the code from the prefix.
    const std::string message = e.what();
    for (int c = 0; c <= static_cast<int>(ErrorCode::kIoError); ++c) {
      const auto code = static_cast<ErrorCode>(c);
      if (message.rfind(std::string(to_string(code)) + ":", 0) == 0) {
        return report(code, message);
      }
    }
    return report(ErrorCode::kNonFiniteLoss, message);
  }
  return 0;
}
