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

#include <cmath>
#include <functional>

#include "doctest.h"
#include "priormix/objectives.hpp"
#include "test_util.hpp"

using namespace priormix;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// ---- Naive reference implementations, written from the formulas with plain
// loops and an unshifted log-softmax. They share nothing with the library
// beyond the logits they are handed.

double ref_ce(const MatrixXd &z, Index i, Index k) {
  double s = 0.0;
  for (Index j = 0; j < z.cols(); ++j) {
    s += std::exp(z(i, j));
  }
  return std::log(s) - z(i, k);
}

double ref_softmax(const MatrixXd &z, Index i, Index k) {
  double s = 0.0;
  for (Index j = 0; j < z.cols(); ++j) {
    s += std::exp(z(i, j));
  }
  return std::exp(z(i, k)) / s;
}

Index ref_argmax(const MatrixXd &z, Index i) {
  Index best = 0;
  for (Index k = 1; k < z.cols(); ++k) {
    if (z(i, k) > z(i, best)) {
      best = k;
    }
  }
  return best;
}

// Mean over bag m's rows of f(i).
double bag_mean(const BatchSlice &b, Index m,
                const std::function<double(Index)> &f) {
  double s = 0.0;
  for (Index i = b.offset(m); i < b.offset(m + 1); ++i) {
    s += f(i);
  }
  return s / static_cast<double>(b.bag_size(m));
}

MatrixXd ref_surrogate(const BatchSlice &b, const MatrixXd &z) {
  const Index k_count = z.cols();
  MatrixXd r(b.bag_count(), k_count);
  for (Index m = 0; m < b.bag_count(); ++m) {
    for (Index k = 0; k < k_count; ++k) {
      r(m, k) = bag_mean(b, m, [&](Index i) { return ref_ce(z, i, k); });
    }
  }
  return r;
}

MatrixXd ref_zero_one(const BatchSlice &b, const MatrixXd &z) {
  MatrixXd r(b.bag_count(), z.cols());
  for (Index m = 0; m < b.bag_count(); ++m) {
    for (Index k = 0; k < z.cols(); ++k) {
      r(m, k) = bag_mean(b, m, [&](Index i) {
        return ref_argmax(z, i) == k ? 0.0 : 1.0;
      });
    }
  }
  return r;
}

double ref_unbiased(const BatchSlice &b, const MatrixXd &z, const MatrixXd &w) {
  return w.cwiseProduct(ref_surrogate(b, z)).sum();
}

// PRR with the branch signs frozen: the function the upstream differentiates.
double ref_prr_smooth(const BatchSlice &b, const MatrixXd &z, const MatrixXd &w,
                      const MatrixXd &theta, double alpha, double s_ga,
                      const MatrixXd &signs_from) {
  const MatrixXd zo = ref_zero_one(b, signs_from);
  const MatrixXd sur = ref_surrogate(b, z);
  double reg = 0.0;
  for (Index m = 0; m < w.rows(); ++m) {
    for (Index k = 0; k < w.cols(); ++k) {
      const double level = 1.0 - theta(m, k);
      const double sign = zo(m, k) >= level ? 1.0 : -s_ga;
      reg += std::abs(w(m, k)) * sign * (sur(m, k) - level);
    }
  }
  return alpha * ref_unbiased(b, z, w) + (1.0 - alpha) * reg;
}

double ref_prr_value(const BatchSlice &b, const MatrixXd &z, const MatrixXd &w,
                     const MatrixXd &theta, double alpha) {
  const MatrixXd zo = ref_zero_one(b, z);
  double reg = 0.0;
  for (Index m = 0; m < w.rows(); ++m) {
    for (Index k = 0; k < w.cols(); ++k) {
      reg += std::abs(w(m, k)) * std::abs(zo(m, k) - (1.0 - theta(m, k)));
    }
  }
  return alpha * ref_unbiased(b, z, w) + (1.0 - alpha) * reg;
}

double ref_flood(const BatchSlice &b, const MatrixXd &z, const MatrixXd &w,
                 double level) {
  return std::abs(ref_unbiased(b, z, w) - level) + level;
}

double ref_correct(const BatchSlice &b, const MatrixXd &z, const MatrixXd &w) {
  const MatrixXd sur = ref_surrogate(b, z);
  double total = 0.0;
  for (Index k = 0; k < w.cols(); ++k) {
    total += std::abs(w.col(k).dot(sur.col(k)));
  }
  return total;
}

double ref_biased(const BatchSlice &b, const MatrixXd &z, const MatrixXd &theta) {
  double total = 0.0;
  for (Index m = 0; m < b.bag_count(); ++m) {
    Index label = 0;
    for (Index k = 1; k < theta.cols(); ++k) {
      if (theta(m, k) > theta(m, label)) {
        label = k;
      }
    }
    total += bag_mean(b, m, [&](Index i) { return ref_ce(z, i, label); });
  }
  return total / static_cast<double>(b.bag_count());
}

double ref_prop(const BatchSlice &b, const MatrixXd &z, const MatrixXd &theta) {
  double total = 0.0;
  for (Index m = 0; m < b.bag_count(); ++m) {
    for (Index k = 0; k < theta.cols(); ++k) {
      const double p = bag_mean(b, m, [&](Index i) { return ref_softmax(z, i, k); });
      total -= theta(m, k) * std::log(std::max(p, 1e-12));
    }
  }
  return total;
}

// ---- Helpers for the finite-difference checks.

VectorXd flatten(const Mlp &m) {
  VectorXd flat(m.parameter_count());
  Index at = 0;
  for (std::size_t l = 0; l < m.layer_count(); ++l) {
    flat.segment(at, m.weights[l].size()) = m.weights[l].reshaped();
    at += m.weights[l].size();
    flat.segment(at, m.biases[l].size()) = m.biases[l];
    at += m.biases[l].size();
  }
  return flat;
}

double &parameter(Mlp &m, Index index) {
  for (std::size_t l = 0; l < m.layer_count(); ++l) {
    if (index < m.weights[l].size()) {
      return m.weights[l].data()[index];
    }
    index -= m.weights[l].size();
    if (index < m.biases[l].size()) {
      return m.biases[l].data()[index];
    }
    index -= m.biases[l].size();
  }
  throw std::out_of_range("parameter index");
}

VectorXd numeric_gradient(Mlp model, const MatrixXd &x,
                          const std::function<double(const MatrixXd &)> &f) {
  const double h = 1e-5;
  VectorXd g(model.parameter_count());
  for (Index p = 0; p < g.size(); ++p) {
    double &theta = parameter(model, p);
    const double saved = theta;
    theta = saved + h;
    const double up = f(forward(model, x));
    theta = saved - h;
    const double down = f(forward(model, x));
    theta = saved;
    g(p) = (up - down) / (2.0 * h);
  }
  return g;
}

double relative_error(const VectorXd &numeric, const VectorXd &analytic) {
  return (numeric - analytic).norm() / std::max(analytic.norm(), 1e-12);
}

BatchSlice random_batch(const std::vector<Index> &sizes, Index d,
                        std::mt19937_64 &rng) {
  std::vector<Index> offsets{0};
  for (const Index s : sizes) {
    offsets.push_back(offsets.back() + s);
  }
  return BatchSlice(testutil::random_matrix(offsets.back(), d, rng), offsets);
}

// M bags holding one (dummy) sample each.
BatchSlice one_row_per_bag(Index m) {
  std::vector<Index> offsets;
  for (Index i = 0; i <= m; ++i) {
    offsets.push_back(i);
  }
  return BatchSlice(MatrixXd::Zero(m, 1), offsets);
}

} // namespace

TEST_CASE("objective names") {
  for (const Objective o : all_objectives()) {
    CHECK(parse_objective(to_string(o)) == o);
  }
  CHECK(all_objectives().size() == 7);
  CHECK(parse_objective("u-prr") == Objective::kUPrr);
  CHECK_THROWS_WITH_AS(parse_objective("u_prr"),
                       doctest::Contains("ConfigError"), Error);
}

TEST_CASE("batch slices") {
  CHECK_THROWS_AS(BatchSlice(MatrixXd::Zero(3, 2), {0, 0, 3}), Error);
  CHECK_THROWS_AS(BatchSlice(MatrixXd::Zero(3, 2), {0, 1, 4}), Error);
  const BatchSlice b(MatrixXd::Zero(5, 1), {0, 2, 5});
  MatrixXd losses(5, 2);
  losses << 1, 0, 3, 0, 1, 1, 2, 1, 3, 4;
  CHECK(bag_means(b, losses) == MatrixXd{{2.0, 0.0}, {2.0, 2.0}});
}

TEST_CASE("unbiased risk: hand computation on the 2x2 example") {
  const BatchSlice b = one_row_per_bag(2);
  const MatrixXd z{{1.0, 0.0}, {0.0, 2.0}};
  const WeightMatrixd w = compute_weights(
      ClassPriorMatrixd(MatrixXd{{0.8, 0.2}, {0.2, 0.8}}), TestPriorsd::uniform(2));
  // ce(z, k) = log(e^z1 + e^z2) - z_k, written out for the four terms.
  const double ce11 = std::log(std::exp(1.0) + 1.0) - 1.0;
  const double ce12 = std::log(std::exp(1.0) + 1.0);
  const double ce21 = std::log(1.0 + std::exp(2.0));
  const double ce22 = std::log(1.0 + std::exp(2.0)) - 2.0;
  const double hand = (2.0 / 3.0) * ce11 - (1.0 / 6.0) * ce12 -
                      (1.0 / 6.0) * ce21 + (2.0 / 3.0) * ce22;
  const ObjectiveResult r = unbiased_risk(b, z, w);
  CHECK(r.value == doctest::Approx(hand).epsilon(1e-12));
  CHECK((r.upstream - w.entries()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("unbiased risk with identity priors is the balanced supervised risk") {
  std::mt19937_64 rng(1);
  const BatchSlice b = random_batch({4, 6, 5}, 1, rng);
  const MatrixXd z = testutil::random_matrix(15, 3, rng);
  const WeightMatrixd w = compute_weights(ClassPriorMatrixd(MatrixXd::Identity(3, 3)),
                                          TestPriorsd::uniform(3));
  double balanced = 0.0;
  for (Index k = 0; k < 3; ++k) {
    balanced += bag_mean(b, k, [&](Index i) { return ref_ce(z, i, k); }) / 3.0;
  }
  CHECK(unbiased_risk(b, z, w).value == doctest::Approx(balanced).epsilon(1e-12));
  CHECK_THROWS_AS(unbiased_risk(b, z, compute_weights(nonsquare_theta(3, 0),
                                                      TestPriorsd::uniform(3))),
                  Error);
}

TEST_CASE("partial risk table") {
  SUBCASE("confident correct model on pure bags") {
    const BatchSlice b(MatrixXd::Zero(6, 1), {0, 2, 4, 6});
    MatrixXd z = MatrixXd::Zero(6, 3);
    for (Index i = 0; i < 6; ++i) {
      z(i, i / 2) = 50.0;
    }
    const ClassPriorMatrixd theta(MatrixXd::Identity(3, 3));
    const PartialRiskTable t = partial_risk_table(b, z, theta);
    CHECK(t.zero_one == MatrixXd::Ones(3, 3) - MatrixXd::Identity(3, 3));
    CHECK(t.flood_levels == t.zero_one);
    CHECK(t.surrogate.diagonal().maxCoeff() < 1e-20);
  }
  SUBCASE("uniform logits resolve to class 1") {
    const BatchSlice b(MatrixXd::Zero(5, 1), {0, 3, 5});
    const PartialRiskTable t = partial_risk_table(
        b, MatrixXd::Zero(5, 2), ClassPriorMatrixd(MatrixXd{{0.8, 0.2}, {0.3, 0.7}}));
    CHECK(t.zero_one == MatrixXd{{0.0, 1.0}, {0.0, 1.0}});
    CHECK((t.surrogate.array() - std::log(2.0)).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("random logits match the reference and rows sum to K-1") {
    std::mt19937_64 rng(4);
    const BatchSlice b = random_batch({7, 3, 5, 9}, 1, rng);
    const MatrixXd z = testutil::random_matrix(24, 2, rng);
    const ClassPriorMatrixd theta = nonsquare_theta(2, 3);
    const PartialRiskTable t = partial_risk_table(b, z, theta);
    CHECK((t.surrogate - ref_surrogate(b, z)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(t.zero_one == ref_zero_one(b, z));
    CHECK((t.zero_one.rowwise().sum().array() == 1.0).all());
    CHECK(t.flood_levels == MatrixXd::Ones(4, 2) - theta.entries());
  }
}

TEST_CASE("partial zero-one risks of the Bayes classifier sit at the flood levels") {
  // Two well separated Gaussians; bag m mixes them by theta row m.
  const ClassPriorMatrixd theta(MatrixXd{{0.8, 0.2}, {0.2, 0.8}});
  const Index per_bag = 400;
  std::mt19937_64 rng(12);
  std::normal_distribution<double> noise(0.0, 1.0);
  MatrixXd x(2 * per_bag, 1);
  for (Index m = 0; m < 2; ++m) {
    const auto counts =
        largest_remainder_counts(theta.entries().row(m).transpose(), per_bag);
    Index row = m * per_bag;
    for (Index k = 0; k < 2; ++k) {
      for (Index c = 0; c < counts[static_cast<std::size_t>(k)]; ++c) {
        x(row++, 0) = (k == 0 ? -5.0 : 5.0) + noise(rng);
      }
    }
  }
  const BatchSlice b(x, {0, per_bag, 2 * per_bag});
  // Bayes rule for equal-variance classes: logits (-x, x).
  MatrixXd z(2 * per_bag, 2);
  z.col(0) = -x.col(0);
  z.col(1) = x.col(0);
  const PartialRiskTable t = partial_risk_table(b, z, theta);
  const double tol = 2.0 / std::sqrt(static_cast<double>(per_bag));
  CHECK((t.zero_one - MatrixXd{{0.2, 0.8}, {0.8, 0.2}}).cwiseAbs().maxCoeff() <
        tol);
}

TEST_CASE("U-PRR") {
  std::mt19937_64 rng(6);
  const BatchSlice b = random_batch({5, 4, 6}, 1, rng);
  const MatrixXd z = testutil::random_matrix(15, 3, rng, 2.0);
  const ClassPriorMatrixd theta = symmetric_theta(0.4, 0.2, 3);
  const WeightMatrixd w = compute_weights(theta, TestPriorsd::uniform(3));

  SUBCASE("alpha = 1 is bit-identical to the unbiased risk") {
    const ObjectiveResult base = unbiased_risk(b, z, w);
    const ObjectiveResult prr = u_prr(b, z, w, theta, PrrConfig{1.0, 3.0, {}});
    CHECK(prr.value == base.value);
    CHECK(prr.upstream == base.upstream);
  }
  SUBCASE("value against the reference") {
    for (const double alpha : {0.0, 0.3, 0.7}) {
      const ObjectiveResult r = u_prr(b, z, w, theta, PrrConfig{alpha, 2.0, {}});
      CHECK(r.value == doctest::Approx(ref_prr_value(b, z, w.entries(),
                                                     theta.entries(), alpha))
                           .epsilon(1e-12));
      CHECK(r.smooth_value ==
            doctest::Approx(ref_prr_smooth(b, z, w.entries(), theta.entries(),
                                           alpha, 2.0, z))
                .epsilon(1e-12));
    }
  }
  SUBCASE("zero trade-off weights leave alpha times the unbiased risk") {
    PrrConfig cfg{0.4, 1.0, MatrixXd::Zero(3, 3)};
    const ObjectiveResult r = u_prr(b, z, w, theta, cfg);
    const ObjectiveResult base = unbiased_risk(b, z, w);
    CHECK(r.value == doctest::Approx(0.4 * base.value).epsilon(1e-14));
    CHECK((r.upstream - 0.4 * base.upstream).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("exactly at the flood level takes the descent branch") {
    const BatchSlice pure(MatrixXd::Zero(6, 1), {0, 2, 4, 6});
    MatrixXd confident = MatrixXd::Zero(6, 3);
    for (Index i = 0; i < 6; ++i) {
      confident(i, i / 2) = 4.0;
    }
    const ClassPriorMatrixd eye(MatrixXd::Identity(3, 3));
    const WeightMatrixd weye = compute_weights(eye, TestPriorsd::uniform(3));
    const PrrConfig cfg{0.5, 7.0, {}};
    const ObjectiveResult r = u_prr(pure, confident, weye, eye, cfg);
    const ObjectiveResult base = unbiased_risk(pure, confident, weye);
    CHECK(r.value == doctest::Approx(0.5 * base.value).epsilon(1e-14));
    // Descent everywhere: + lambda (1 - alpha) / b_m, never -s_ga.
    MatrixXd expected = 0.5 * base.upstream;
    for (Index i = 0; i < 6; ++i) {
      expected.row(i) += 0.5 * weye.entries().cwiseAbs().row(i / 2) / 2.0;
    }
    CHECK((r.upstream - expected).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("invalid configuration") {
    CHECK_THROWS_AS(u_prr(b, z, w, theta, PrrConfig{1.5, 1.0, {}}), Error);
    CHECK_THROWS_AS(u_prr(b, z, w, theta, PrrConfig{0.5, 0.0, {}}), Error);
  }
}

TEST_CASE("U-flood arithmetic") {
  // One bag, one sample, W = [[w, 0], [0, 0]] so R_U = w * ce(z, 1).
  const BatchSlice b = one_row_per_bag(2);
  const auto ce_logits = [](double target) {
    // ce(z, 1) with z = (0, t) is log(1 + e^t); pick t for a target ce.
    return MatrixXd{{0.0, std::log(std::exp(target) - 1.0)}, {0.0, 0.0}};
  };
  const WeightMatrixd plus(MatrixXd{{1.0, 0.0}, {0.0, 0.0}});
  const WeightMatrixd minus(MatrixXd{{-1.0, 0.0}, {0.0, 0.0}});

  const ObjectiveResult descent = u_flood(b, ce_logits(0.3), plus, 0.1);
  CHECK(descent.value == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(descent.upstream == unbiased_risk(b, ce_logits(0.3), plus).upstream);

  const ObjectiveResult ascent = u_flood(b, ce_logits(0.2), minus, 0.1);
  CHECK(ascent.value == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(ascent.upstream == -unbiased_risk(b, ce_logits(0.2), minus).upstream);

  const ObjectiveResult zero = u_flood(b, ce_logits(0.3), plus, 0.0);
  CHECK(zero.value == unbiased_risk(b, ce_logits(0.3), plus).value);

  CHECK_THROWS_AS(u_flood(b, ce_logits(0.3), plus, -0.1), Error);
}

TEST_CASE("U-correct") {
  std::mt19937_64 rng(10);
  const BatchSlice b = random_batch({3, 5, 4}, 1, rng);
  const MatrixXd z = testutil::random_matrix(12, 3, rng);

  const WeightMatrixd nonneg = compute_weights(
      ClassPriorMatrixd(MatrixXd::Identity(3, 3)), TestPriorsd::uniform(3));
  const ObjectiveResult same = u_correct(b, z, nonneg);
  const ObjectiveResult base = unbiased_risk(b, z, nonneg);
  CHECK(same.value == doctest::Approx(base.value).epsilon(1e-14));
  CHECK(same.upstream == base.upstream);

  const WeightMatrixd mixed(MatrixXd{{0.5, -0.4, 0.1}, {0.1, 0.2, 0.0}, {0.0, -0.2, 0.3}});
  const ObjectiveResult flipped = u_correct(b, z, mixed);
  CHECK(flipped.value == doctest::Approx(ref_correct(b, z, mixed.entries())));
  CHECK(flipped.value > unbiased_risk(b, z, mixed).value);
  for (int trial = 0; trial < 50; ++trial) {
    const WeightMatrixd random(testutil::random_matrix(3, 3, rng));
    CHECK(u_correct(b, z, random).value >= 0.0);
  }
}

TEST_CASE("biased proportion") {
  std::mt19937_64 rng(2);
  const BatchSlice b = random_batch({4, 3, 5}, 1, rng);
  const MatrixXd z = testutil::random_matrix(12, 3, rng);
  const ClassPriorMatrixd sym = symmetric_theta(0.5, 0.5 / 3.0, 3);
  const ObjectiveResult r = biased_proportion(b, z, sym);
  CHECK(r.value == doctest::Approx(ref_biased(b, z, sym.entries())).epsilon(1e-12));
  for (Index m = 0; m < 3; ++m) {
    CHECK(sym.dominant_class(m) == m);
    for (Index i = b.offset(m); i < b.offset(m + 1); ++i) {
      for (Index k = 0; k < 3; ++k) {
        const double expected =
            k == m ? 1.0 / (3.0 * static_cast<double>(b.bag_size(m))) : 0.0;
        CHECK(r.upstream(i, k) == doctest::Approx(expected));
      }
    }
  }
  // A uniform row pseudo-labels class 1.
  const ClassPriorMatrixd with_flat(MatrixXd{
      {1.0 / 3, 1.0 / 3, 1.0 / 3}, {0.1, 0.8, 0.1}, {0.1, 0.1, 0.8}});
  CHECK(with_flat.dominant_class(0) == 0);
  const ObjectiveResult flat = biased_proportion(b, z, with_flat);
  CHECK(flat.upstream(0, 0) > 0.0);
  CHECK(flat.upstream(0, 1) == 0.0);
}

TEST_CASE("proportion loss") {
  SUBCASE("matching mean prediction gives the entropy") {
    const ClassPriorMatrixd theta(MatrixXd{{0.7, 0.2, 0.1}, {0.25, 0.5, 0.25},
                                           {0.1, 0.3, 0.6}});
    const BatchSlice b(MatrixXd::Zero(6, 1), {0, 2, 4, 6});
    MatrixXd z(6, 3);
    double entropy = 0.0;
    for (Index i = 0; i < 6; ++i) {
      z.row(i) = theta.entries().row(i / 2).array().log();
    }
    for (Index m = 0; m < 3; ++m) {
      for (Index k = 0; k < 3; ++k) {
        entropy -= theta(m, k) * std::log(theta(m, k));
      }
    }
    const ObjectiveResult r = proportion_loss(b, z, theta);
    CHECK(r.value == doctest::Approx(entropy).epsilon(1e-12));
    // A minimum: any other prediction does no better.
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      const MatrixXd other = z + testutil::random_matrix(6, 3, rng, 0.3);
      CHECK(proportion_loss(b, other, theta).value >= r.value - 1e-12);
    }
  }
  SUBCASE("pure bag against a uniform prediction costs ln 2") {
    const BatchSlice b = one_row_per_bag(2);
    const ClassPriorMatrixd eye(MatrixXd::Identity(2, 2));
    const ObjectiveResult r = proportion_loss(b, MatrixXd::Zero(2, 2), eye);
    CHECK(r.value == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-14));
  }
  SUBCASE("vanishing class probability is clamped") {
    const BatchSlice b = one_row_per_bag(2);
    const ClassPriorMatrixd eye(MatrixXd::Identity(2, 2));
    const MatrixXd z{{-2000.0, 0.0}, {0.0, 2000.0}};
    const ObjectiveResult r = proportion_loss(b, z, eye);
    CHECK(std::isfinite(r.value));
    // Bag 1 predicts class 1 with probability e^-2000; bag 2 is exact.
    CHECK(r.value == doctest::Approx(-std::log(1e-12)).epsilon(1e-9));
  }
}

TEST_CASE("every objective's upstream reproduces finite differences") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::mt19937_64 rng(500 + seed);
    Mlp model = Mlp::init({4, 8, 3}, seed);
    for (auto &bias : model.biases) {
      bias = testutil::random_matrix(bias.size(), 1, rng, 0.1);
    }
    const BatchSlice b = random_batch({5, 3, 4, 6, 4, 5}, 4, rng);
    const ClassPriorMatrixd theta = nonsquare_theta(3, 40 + seed);
    const WeightMatrixd w = compute_weights(theta, TestPriorsd::uniform(3));
    const MatrixXd &we = w.entries();
    const MatrixXd &te = theta.entries();
    const MatrixXd z0 = forward(model, b.features());
    const auto grad = [&](const ObjectiveResult &r) {
      return flatten(backward(model, b.features(), r.upstream));
    };
    CAPTURE(seed);

    SUBCASE("unbiased") {
      const auto f = [&](const MatrixXd &z) { return ref_unbiased(b, z, we); };
      CHECK(relative_error(numeric_gradient(model, b.features(), f),
                           grad(unbiased_risk(b, w, model))) < 1e-4);
    }
    SUBCASE("u-prr with frozen branches") {
      for (const double s_ga : {0.2, 5.0}) {
        const PrrConfig cfg{0.3, s_ga, {}};
        const ObjectiveResult r = u_prr(b, w, theta, cfg, model);
        const auto f = [&](const MatrixXd &z) {
          return ref_prr_smooth(b, z, we, te, 0.3, s_ga, z0);
        };
        CHECK(r.smooth_value == doctest::Approx(f(z0)).epsilon(1e-12));
        CHECK(relative_error(numeric_gradient(model, b.features(), f), grad(r)) <
              1e-4);
      }
    }
    SUBCASE("u-flood on both sides of the level") {
      const double risk = ref_unbiased(b, z0, we);
      for (const double level : {std::max(0.0, risk - 0.5), risk + 0.5}) {
        REQUIRE(std::abs(risk - level) > 1e-6);
        const auto f = [&](const MatrixXd &z) { return ref_flood(b, z, we, level); };
        const ObjectiveResult r = u_flood(b, w, model, level);
        CHECK(r.value == doctest::Approx(f(z0)).epsilon(1e-12));
        CHECK(relative_error(numeric_gradient(model, b.features(), f), grad(r)) <
              1e-4);
      }
    }
    SUBCASE("u-correct") {
      const MatrixXd sur = ref_surrogate(b, z0);
      for (Index k = 0; k < 3; ++k) {
        REQUIRE(std::abs(we.col(k).dot(sur.col(k))) > 1e-6);
      }
      const auto f = [&](const MatrixXd &z) { return ref_correct(b, z, we); };
      const ObjectiveResult r = u_correct(b, w, model);
      CHECK(r.value == doctest::Approx(f(z0)).epsilon(1e-12));
      CHECK(relative_error(numeric_gradient(model, b.features(), f), grad(r)) <
            1e-4);
    }
    SUBCASE("biased") {
      const auto f = [&](const MatrixXd &z) { return ref_biased(b, z, te); };
      const ObjectiveResult r = biased_proportion(b, theta, model);
      CHECK(r.value == doctest::Approx(f(z0)).epsilon(1e-12));
      CHECK(relative_error(numeric_gradient(model, b.features(), f), grad(r)) <
            1e-4);
    }
    SUBCASE("prop") {
      const auto f = [&](const MatrixXd &z) { return ref_prop(b, z, te); };
      const ObjectiveResult r = proportion_loss(b, theta, model);
      CHECK(r.value == doctest::Approx(f(z0)).epsilon(1e-12));
      CHECK(relative_error(numeric_gradient(model, b.features(), f), grad(r)) <
            1e-4);
    }
  }
}

TEST_CASE("dispatch") {
  std::mt19937_64 rng(77);
  const BatchSlice b = random_batch({4, 4}, 1, rng);
  const MatrixXd z = testutil::random_matrix(8, 2, rng);
  const ClassPriorMatrixd theta(MatrixXd{{0.8, 0.2}, {0.3, 0.7}});
  const WeightMatrixd w = compute_weights(theta, TestPriorsd::uniform(2));
  ObjectiveContext ctx;
  ctx.theta = &theta;
  ctx.weights = &w;
  ctx.flood_level = 0.05;
  const double ru = unbiased_risk(b, z, w).value;
  CHECK(evaluate_objective(Objective::kUnbiased, b, z, ctx).value == ru);
  CHECK(evaluate_objective(Objective::kUStop, b, z, ctx).value == ru);
  CHECK(evaluate_objective(Objective::kUFlood, b, z, ctx).value ==
        u_flood(b, z, w, 0.05).value);
  CHECK(evaluate_objective(Objective::kProp, b, z, ctx).value ==
        proportion_loss(b, z, theta).value);
}
