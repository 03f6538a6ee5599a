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

#include "priormix/config.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace priormix {
namespace {

using nlohmann::json;

template <typename T>
void read_optional(const json &doc, const char *key, T &out) {
  if (doc.contains(key)) {
    try {
      out = doc.at(key).get<T>();
    } catch (const json::exception &e) {
      throw Error(ErrorCode::kConfigError,
                  std::string("field '") + key + "': " + e.what());
    }
  }
}

DatasetSource dataset_from_json(const json &doc) {
  DatasetSource source;
  read_optional(doc, "name", source.name);
  read_optional(doc, "format", source.format);
  read_optional(doc, "train", source.train);
  read_optional(doc, "test", source.test);
  read_optional(doc, "train_labels", source.train_labels);
  read_optional(doc, "test_labels", source.test_labels);
  if (source.name.empty()) {
    source.name = std::filesystem::path(source.train).stem().string();
  }
  return source;
}

json dataset_to_json(const DatasetSource &source) {
  json doc{{"name", source.name},
           {"format", source.format},
           {"train", source.train},
           {"test", source.test}};
  if (source.format == "idx") {
    doc["train_labels"] = source.train_labels;
    doc["test_labels"] = source.test_labels;
  }
  return doc;
}

ThetaSetting theta_from_json(const json &doc) {
  ThetaSetting setting;
  read_optional(doc, "kind", setting.kind);
  read_optional(doc, "a", setting.a);
  read_optional(doc, "b", setting.b);
  read_optional(doc, "path", setting.path);
  read_optional(doc, "name", setting.name);
  if (setting.name.empty()) {
    setting.name = setting.kind == "symmetric"
                       ? "symmetric-" + json(setting.a).dump()
                       : setting.kind;
  }
  return setting;
}

json theta_to_json(const ThetaSetting &setting) {
  json doc{{"name", setting.name},
           {"kind", setting.kind},
           {"a", setting.a},
           {"b", setting.b}};
  if (setting.kind == "file") {
    doc["path"] = setting.path;
  }
  return doc;
}

/// Accepts either a singular object or a plural array under two keys.
template <typename T, typename Parse>
std::vector<T> read_list(const json &doc, const char *singular,
                         const char *plural, Parse parse) {
  std::vector<T> out;
  if (doc.contains(plural)) {
    if (!doc.at(plural).is_array()) {
      throw Error(ErrorCode::kConfigError,
                  std::string("'") + plural + "' must be an array");
    }
    for (const auto &item : doc.at(plural)) {
      out.push_back(parse(item));
    }
  } else if (doc.contains(singular)) {
    out.push_back(parse(doc.at(singular)));
  }
  return out;
}

bool on_grid(double value, const std::vector<double> &grid) {
  return std::any_of(grid.begin(), grid.end(), [&](double g) {
    return std::abs(g - value) <= 1e-12 * std::max(1.0, std::abs(g));
  });
}

void require_file(const std::string &path, const std::string &what) {
  if (path.empty() || !std::filesystem::is_regular_file(path)) {
    throw Error(ErrorCode::kConfigError,
                what + " '" + path + "' does not exist");
  }
}

} // namespace

bool operator==(const DatasetSource &a, const DatasetSource &b) {
  return a.name == b.name && a.format == b.format && a.train == b.train &&
         a.test == b.test && a.train_labels == b.train_labels &&
         a.test_labels == b.test_labels;
}

bool operator==(const ThetaSetting &a, const ThetaSetting &b) {
  return a.name == b.name && a.kind == b.kind && a.a == b.a && a.b == b.b &&
         a.path == b.path;
}

nlohmann::json grids_to_json(const HyperparameterGrids &grids) {
  return json{{"learning_rate", grids.learning_rates},
              {"batches_per_epoch", grids.batches_per_epoch},
              {"alpha", grids.alphas},
              {"s_ga", grids.s_ga},
              {"flood_b", grids.flood_levels}};
}

ExperimentConfig config_from_json(const nlohmann::json &doc) {
  if (!doc.is_object()) {
    throw Error(ErrorCode::kConfigError, "config must be a JSON object");
  }
  ExperimentConfig config;
  config.datasets = read_list<DatasetSource>(doc, "dataset", "datasets",
                                             dataset_from_json);
  config.theta_settings =
      read_list<ThetaSetting>(doc, "theta", "thetas", theta_from_json);
  config.methods = read_list<std::string>(
      doc, "method", "methods", [](const json &j) {
        if (!j.is_string()) {
          throw Error(ErrorCode::kConfigError, "methods must be strings");
        }
        return j.get<std::string>();
      });
  read_optional(doc, "depth", config.depth);
  read_optional(doc, "hidden_width", config.hidden_width);
  read_optional(doc, "epochs", config.epochs);
  read_optional(doc, "batches_per_epoch", config.batches_per_epoch);
  read_optional(doc, "learning_rate", config.learning_rate);
  read_optional(doc, "weight_decay", config.weight_decay);
  read_optional(doc, "alpha", config.alpha);
  read_optional(doc, "s_ga", config.s_ga);
  read_optional(doc, "flood_b", config.flood_b);
  read_optional(doc, "noise_rates", config.noise_rates);
  if (doc.contains("noise_rate")) {
    config.noise_rates = {doc.at("noise_rate").get<double>()};
  }
  read_optional(doc, "trials", config.trials);
  read_optional(doc, "base_seed", config.base_seed);
  read_optional(doc, "output_dir", config.output_dir);
  read_optional(doc, "jobs", config.jobs);
  read_optional(doc, "allow_offgrid", config.allow_offgrid);
  read_optional(doc, "svg", config.svg);
  return config;
}

nlohmann::json config_to_json(const ExperimentConfig &config) {
  json datasets = json::array();
  for (const auto &d : config.datasets) {
    datasets.push_back(dataset_to_json(d));
  }
  json thetas = json::array();
  for (const auto &t : config.theta_settings) {
    thetas.push_back(theta_to_json(t));
  }
  return json{{"datasets", datasets},
              {"thetas", thetas},
              {"methods", config.methods},
              {"depth", config.depth},
              {"hidden_width", config.hidden_width},
              {"epochs", config.epochs},
              {"batches_per_epoch", config.batches_per_epoch},
              {"learning_rate", config.learning_rate},
              {"weight_decay", config.weight_decay},
              {"alpha", config.alpha},
              {"s_ga", config.s_ga},
              {"flood_b", config.flood_b},
              {"noise_rates", config.noise_rates},
              {"trials", config.trials},
              {"base_seed", config.base_seed},
              {"output_dir", config.output_dir},
              {"jobs", config.jobs},
              {"allow_offgrid", config.allow_offgrid},
              {"svg", config.svg}};
}

ExperimentConfig load_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kConfigError, "cannot open config " + path);
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception &e) {
    throw Error(ErrorCode::kConfigError, path + ": " + e.what());
  }
  return config_from_json(doc);
}

void validate_config(const ExperimentConfig &config) {
  if (config.datasets.empty() || config.theta_settings.empty() ||
      config.methods.empty()) {
    throw Error(ErrorCode::kConfigError,
                "config needs at least one dataset, theta and method");
  }
  for (const auto &method : config.methods) {
    parse_objective(method);
  }
  for (const auto &d : config.datasets) {
    if (d.format == "csv") {
      require_file(d.train, "train CSV");
      require_file(d.test, "test CSV");
    } else if (d.format == "idx") {
      require_file(d.train, "train images");
      require_file(d.test, "test images");
      require_file(d.train_labels, "train labels");
      require_file(d.test_labels, "test labels");
    } else {
      throw Error(ErrorCode::kConfigError,
                  "dataset format must be csv or idx, got '" + d.format + "'");
    }
  }
  for (const auto &t : config.theta_settings) {
    if (t.kind == "file") {
      require_file(t.path, "theta CSV");
    } else if (t.kind != "symmetric" && t.kind != "diag" &&
               t.kind != "nonsquare") {
      throw Error(ErrorCode::kConfigError,
                  "unknown theta kind '" + t.kind + "'");
    }
  }
  if (config.epochs < 1 || config.batches_per_epoch < 1 || config.trials < 1 ||
      config.depth < 2 || config.hidden_width < 1 || config.jobs < 1) {
    throw Error(ErrorCode::kConfigError,
                "epochs, batches, trials, jobs and widths must be positive");
  }
  if (!(config.learning_rate > 0.0) || !(config.weight_decay >= 0.0) ||
      !(config.alpha >= 0.0 && config.alpha <= 1.0) || !(config.s_ga > 0.0) ||
      !(config.flood_b >= 0.0)) {
    throw Error(ErrorCode::kConfigError, "hyperparameter out of range");
  }
  for (const double noise : config.noise_rates) {
    if (!(noise >= 0.0 && noise < 1.0)) {
      throw Error(ErrorCode::kConfigError, "noise rates must lie in [0, 1)");
    }
  }
  if (config.noise_rates.empty()) {
    throw Error(ErrorCode::kConfigError, "noise_rates must not be empty");
  }
  if (!config.allow_offgrid) {
    const HyperparameterGrids grids;
    const auto off = [](const std::string &name) {
      throw Error(ErrorCode::kConfigError,
                  name + " is off the reference grid (set allow_offgrid)");
    };
    if (!on_grid(config.learning_rate, grids.learning_rates)) {
      off("learning_rate");
    }
    if (std::find(grids.batches_per_epoch.begin(), grids.batches_per_epoch.end(),
                  config.batches_per_epoch) == grids.batches_per_epoch.end()) {
      off("batches_per_epoch");
    }
    if (!on_grid(config.alpha, grids.alphas)) {
      off("alpha");
    }
    if (!on_grid(config.s_ga, grids.s_ga)) {
      off("s_ga");
    }
    if (!on_grid(config.flood_b, grids.flood_levels)) {
      off("flood_b");
    }
  }
}

std::vector<DatasetEntry> load_datasets(const ExperimentConfig &config) {
  std::vector<DatasetEntry> entries;
  for (const auto &source : config.datasets) {
    DatasetEntry entry;
    entry.name = source.name;
    if (source.format == "idx") {
      entry.train = load_idx(source.train, source.train_labels);
      entry.test =
          load_idx(source.test, source.test_labels, entry.train.classes());
    } else {
      MinMaxScaler scaler;
      entry.train = load_csv(source.train, nullptr, &scaler);
      entry.test = load_csv(source.test, &scaler, nullptr, entry.train.classes());
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

TrainConfig make_train_config(const ExperimentConfig &config,
                              Objective objective) {
  TrainConfig cfg;
  cfg.objective = objective;
  cfg.epochs = config.epochs;
  cfg.batches_per_epoch = config.batches_per_epoch;
  cfg.adam.learning_rate = config.learning_rate;
  cfg.adam.weight_decay = config.weight_decay;
  cfg.prr.alpha = config.alpha;
  cfg.prr.s_ga = config.s_ga;
  cfg.flood_level = config.flood_b;
  return cfg;
}

SweepSpec make_sweep_spec(const ExperimentConfig &config) {
  SweepSpec spec;
  spec.datasets = load_datasets(config);
  spec.theta_settings = config.theta_settings;
  for (const auto &name : config.methods) {
    spec.methods.push_back(
        {name, make_train_config(config, parse_objective(name))});
  }
  spec.noise_rates = config.noise_rates;
  spec.trials = config.trials;
  spec.base_seed = config.base_seed;
  spec.depth = config.depth;
  spec.hidden_width = config.hidden_width;
  spec.jobs = config.jobs;
  return spec;
}

} // namespace priormix
