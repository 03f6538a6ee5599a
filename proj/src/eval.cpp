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

#include "priormix/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include "priormix/csv.hpp"

namespace priormix {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::ofstream open_for_write(const std::string &path) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::kIoError, "cannot open " + path + " for writing");
  }
  return out;
}

std::string fmt(double value, int precision = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(precision);
  s << value;
  return s.str();
}

} // namespace

std::uint64_t derive_seed(std::uint64_t base,
                          std::initializer_list<std::uint64_t> indices) {
  std::uint64_t h = splitmix64(base);
  for (const std::uint64_t index : indices) {
    h = splitmix64(h ^ splitmix64(index + 0x632be59bd9b4e019ULL));
  }
  return h;
}

double supervised_risk(const Mlp &model, const LabeledDataset &data,
                       const TestPriorsd &pi) {
  if (pi.classes() != data.classes()) {
    throw Error(ErrorCode::kDimensionMismatch, "pi and data disagree on K");
  }
  const Eigen::MatrixXd losses = ce_loss_matrix(forward(model, data.features()));
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(data.classes());
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(data.classes());
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const int y = data.labels()[static_cast<std::size_t>(i)];
    sums(y) += losses(i, y);
    counts(y) += 1.0;
  }
  return pi.values().dot(sums.cwiseQuotient(counts));
}

OracleResult unbiasedness_oracle(const LabeledDataset &source,
                                 const ClassPriorMatrixd &theta,
                                 const TestPriorsd &pi, const Mlp &model,
                                 Eigen::Index bag_size, int redraws,
                                 std::uint64_t seed) {
  return unbiasedness_oracle(source, theta, compute_weights(theta, pi), pi,
                             model, bag_size, redraws, seed);
}

OracleResult unbiasedness_oracle(const LabeledDataset &source,
                                 const ClassPriorMatrixd &theta,
                                 const WeightMatrixd &weights,
                                 const TestPriorsd &pi, const Mlp &model,
                                 Eigen::Index bag_size, int redraws,
                                 std::uint64_t seed) {
  if (redraws < 100) {
    throw Error(ErrorCode::kInvalidArgument, "need at least 100 redraws");
  }
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int r = 0; r < redraws; ++r) {
    const BagCollection bags = make_bags(
        source, theta, bag_size,
        derive_seed(seed, {static_cast<std::uint64_t>(r)}));
    const double risk =
        unbiased_risk(BatchSlice::from_bags(bags), weights, model).value;
    sum += risk;
    sum_sq += risk * risk;
  }
  const double n = static_cast<double>(redraws);
  OracleResult result;
  result.mc_mean = sum / n;
  const double variance =
      std::max(0.0, (sum_sq - n * result.mc_mean * result.mc_mean) / (n - 1.0));
  result.standard_error = std::sqrt(variance / n);
  result.supervised_risk = supervised_risk(model, source, pi);
  const double gap = std::abs(result.mc_mean - result.supervised_risk);
  result.z_score = result.standard_error > 0.0
                       ? gap / result.standard_error
                       : (gap > 1e-12 ? INFINITY : 0.0);
  return result;
}

ClassPriorMatrixd make_theta(const ThetaSetting &setting, int classes,
                             std::uint64_t seed) {
  if (setting.kind == "symmetric") {
    return symmetric_theta(setting.a, setting.b, classes);
  }
  if (setting.kind == "diag") {
    return diagonal_dominated_theta(classes, seed);
  }
  if (setting.kind == "nonsquare") {
    return nonsquare_theta(classes, seed);
  }
  if (setting.kind == "file") {
    ClassPriorMatrixd theta = load_theta_csv(setting.path);
    if (theta.classes() != classes) {
      throw Error(ErrorCode::kDimensionMismatch,
                  setting.path + " has the wrong number of classes");
    }
    return theta;
  }
  throw Error(ErrorCode::kConfigError,
              "unknown theta kind '" + setting.kind +
                  "' (expected symmetric, diag, nonsquare or file)");
}

CellResult run_cell(const SweepSpec &spec, std::size_t dataset_index,
                    std::size_t theta_index, std::size_t method_index,
                    std::size_t noise_index, int trial, Mlp *trained) {
  const DatasetEntry &data = spec.datasets[dataset_index];
  const ThetaSetting &setting = spec.theta_settings[theta_index];
  const MethodEntry &method = spec.methods[method_index];
  const double noise = spec.noise_rates[noise_index];
  CellResult cell;
  cell.dataset = data.name;
  cell.theta_setting = setting.name;
  cell.method = method.name;
  cell.noise_rate = noise;
  cell.trial = trial;
  try {
    const auto t = static_cast<std::uint64_t>(trial);
    const std::uint64_t data_seed =
        derive_seed(spec.base_seed, {dataset_index, theta_index, t});
    const ClassPriorMatrixd theta =
        make_theta(setting, data.train.classes(), derive_seed(data_seed, {1}));
    const BagCollection bags =
        make_bags(data.train, theta,
                  split_bag_sizes(data.train.size(), theta.bags()),
                  derive_seed(data_seed, {2}));
    const ClassPriorMatrixd learner_theta = perturb_priors(
        theta, noise, derive_seed(data_seed, {3, noise_index}));
    const TestPriorsd pi(data.test.class_frequencies());
    const WeightMatrixd weights = compute_weights(learner_theta, pi);
    const Mlp init = Mlp::init(
        mlp_preset_dims(static_cast<int>(data.train.dimension()),
                        data.train.classes(), spec.depth, spec.hidden_width),
        derive_seed(data_seed, {4}));
    TrainConfig cfg = method.config;
    cfg.seed = derive_seed(data_seed, {5});
    TrainResult result = train(bags, learner_theta, weights, init, cfg, data.test);
    cell.record = std::move(result.record);
    if (trained != nullptr) {
      *trained = std::move(result.model);
    }
    cell.ok = true;
  } catch (const std::exception &e) {
    cell.ok = false;
    cell.error = e.what();
  }
  return cell;
}

SweepResult run_sweep(const SweepSpec &spec,
                      const std::function<void(const CellResult &)> &progress) {
  if (spec.trials < 1 || spec.noise_rates.empty() || spec.methods.empty() ||
      spec.theta_settings.empty() || spec.datasets.empty()) {
    throw Error(ErrorCode::kConfigError, "sweep has an empty dimension");
  }
  struct CellIndex {
    std::size_t dataset, theta, noise, method;
    int trial;
  };
  std::vector<CellIndex> plan;
  for (std::size_t d = 0; d < spec.datasets.size(); ++d) {
    for (std::size_t t = 0; t < spec.theta_settings.size(); ++t) {
      for (std::size_t n = 0; n < spec.noise_rates.size(); ++n) {
        for (std::size_t m = 0; m < spec.methods.size(); ++m) {
          for (int r = 0; r < spec.trials; ++r) {
            plan.push_back({d, t, n, m, r});
          }
        }
      }
    }
  }
  SweepResult result;
  result.cells.resize(plan.size());
  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;
  const auto worker = [&]() {
    for (std::size_t i = next++; i < plan.size(); i = next++) {
      const CellIndex &c = plan[i];
      result.cells[i] =
          run_cell(spec, c.dataset, c.theta, c.method, c.noise, c.trial);
      if (progress) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        progress(result.cells[i]);
      }
    }
  };
  const int jobs = std::max(1, spec.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int j = 0; j < jobs; ++j) {
      threads.emplace_back(worker);
    }
    for (auto &thread : threads) {
      thread.join();
    }
  }
  return result;
}

std::vector<AggregateRow> SweepResult::aggregate() const {
  using Key = std::tuple<std::string, std::string, std::string, double>;
  std::vector<Key> order;
  std::map<Key, std::vector<const CellResult *>> groups;
  for (const auto &cell : cells) {
    if (!cell.ok) {
      continue;
    }
    const Key key{cell.dataset, cell.theta_setting, cell.method,
                  cell.noise_rate};
    if (groups.find(key) == groups.end()) {
      order.push_back(key);
    }
    groups[key].push_back(&cell);
  }
  const auto mean_std = [](const std::vector<double> &xs) {
    double mean = 0.0;
    for (const double x : xs) {
      mean += x;
    }
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (const double x : xs) {
      var += (x - mean) * (x - mean);
    }
    const double sd =
        xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1))
                      : 0.0;
    return std::pair<double, double>{mean, sd};
  };
  std::vector<AggregateRow> rows;
  for (const auto &key : order) {
    const auto &group = groups[key];
    std::vector<double> errs;
    std::vector<double> drops;
    for (const auto *cell : group) {
      errs.push_back(100.0 * cell->record.final_error);
      drops.push_back(100.0 * cell->record.error_drop);
    }
    AggregateRow row;
    std::tie(row.dataset, row.theta_setting, row.method, row.noise_rate) = key;
    row.trials = static_cast<int>(group.size());
    std::tie(row.err_mean, row.err_std) = mean_std(errs);
    std::tie(row.drop_mean, row.drop_std) = mean_std(drops);
    rows.push_back(row);
  }
  return rows;
}

namespace {

std::string setting_label(const std::string &name, double noise) {
  return noise == 0.0 ? name : name + "@noise=" + csv::format_double(noise);
}

} // namespace

void write_sweep_csv(const std::string &path, const SweepResult &result) {
  auto out = open_for_write(path);
  out << "dataset,theta_setting,method,trial,err_pct,drop_pct\n";
  for (const auto &cell : result.cells) {
    if (!cell.ok) {
      continue;
    }
    out << cell.dataset << ',' << setting_label(cell.theta_setting, cell.noise_rate)
        << ',' << cell.method << ',' << cell.trial << ','
        << fmt(100.0 * cell.record.final_error) << ','
        << fmt(100.0 * cell.record.error_drop) << '\n';
  }
}

void write_aggregate_csv(const std::string &path,
                         const std::vector<AggregateRow> &rows) {
  auto out = open_for_write(path);
  out << "dataset,theta_setting,method,noise_rate,trials,err_mean,err_std,"
         "drop_mean,drop_std\n";
  for (const auto &row : rows) {
    out << row.dataset << ',' << row.theta_setting << ',' << row.method << ','
        << csv::format_double(row.noise_rate) << ',' << row.trials << ','
        << fmt(row.err_mean) << ',' << fmt(row.err_std) << ','
        << fmt(row.drop_mean) << ',' << fmt(row.drop_std) << '\n';
  }
}

void write_failures_csv(const std::string &path, const SweepResult &result) {
  auto out = open_for_write(path);
  out << "dataset,theta_setting,method,noise_rate,trial,error\n";
  for (const auto &cell : result.cells) {
    if (cell.ok) {
      continue;
    }
    std::string message = cell.error;
    std::replace(message.begin(), message.end(), ',', ';');
    std::replace(message.begin(), message.end(), '\n', ' ');
    out << cell.dataset << ',' << cell.theta_setting << ',' << cell.method
        << ',' << csv::format_double(cell.noise_rate) << ',' << cell.trial
        << ',' << message << '\n';
  }
}

std::string noise_chart_svg(const std::vector<AggregateRow> &rows) {
  using Series = std::vector<std::pair<double, const AggregateRow *>>;
  std::vector<std::string> names;
  std::map<std::string, Series> series;
  double max_noise = 0.0;
  double max_err = 1.0;
  for (const auto &row : rows) {
    const std::string name =
        row.dataset + " / " + row.theta_setting + " / " + row.method;
    if (series.find(name) == series.end()) {
      names.push_back(name);
    }
    series[name].push_back({row.noise_rate, &row});
    max_noise = std::max(max_noise, row.noise_rate);
    max_err = std::max(max_err, row.err_mean + row.err_std);
  }
  if (max_noise == 0.0) {
    max_noise = 1.0;
  }
  constexpr double kWidth = 640, kHeight = 400, kLeft = 60, kRight = 200,
                   kTop = 30, kBottom = 50;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const auto x_of = [&](double noise) { return kLeft + plot_w * noise / max_noise; };
  const auto y_of = [&](double err) {
    return kTop + plot_h * (1.0 - err / (1.1 * max_err));
  };
  static const char *kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" font-family=\"sans-serif\" "
      << "font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\""
      << kLeft + plot_w << "\" y2=\"" << kTop + plot_h
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft
      << "\" y2=\"" << kTop + plot_h << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\">noise rate (%)</text>\n";
  svg << "<text x=\"14\" y=\"" << kTop + plot_h / 2
      << "\" transform=\"rotate(-90 14 " << kTop + plot_h / 2
      << ")\" text-anchor=\"middle\">test error (%)</text>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double noise = max_noise * tick / 4.0;
    svg << "<text x=\"" << x_of(noise) << "\" y=\"" << kTop + plot_h + 16
        << "\" text-anchor=\"middle\">" << fmt(100.0 * noise, 1) << "</text>\n";
    const double err = 1.1 * max_err * tick / 4.0;
    svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << y_of(err) + 4
        << "\" text-anchor=\"end\">" << fmt(err, 1) << "</text>\n";
  }
  for (std::size_t s = 0; s < names.size(); ++s) {
    auto points = series[names[s]];
    std::sort(points.begin(), points.end(),
              [](const auto &a, const auto &b) { return a.first < b.first; });
    const char *color = kColors[s % (sizeof(kColors) / sizeof(kColors[0]))];
    svg << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\" points=\"";
    for (const auto &[noise, row] : points) {
      svg << x_of(noise) << ',' << y_of(row->err_mean) << ' ';
    }
    svg << "\"/>\n";
    for (const auto &[noise, row] : points) {
      svg << "<line x1=\"" << x_of(noise) << "\" y1=\""
          << y_of(row->err_mean - row->err_std) << "\" x2=\"" << x_of(noise)
          << "\" y2=\"" << y_of(row->err_mean + row->err_std)
          << "\" stroke=\"" << color << "\"/>\n";
      svg << "<circle cx=\"" << x_of(noise) << "\" cy=\"" << y_of(row->err_mean)
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    svg << "<text x=\"" << kLeft + plot_w + 10 << "\" y=\""
        << kTop + 14 + 16 * static_cast<double>(s) << "\" fill=\"" << color
        << "\">" << names[s] << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

} // namespace priormix
