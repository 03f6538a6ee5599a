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

#ifndef PRIORMIX_MODEL_HPP_
#define PRIORMIX_MODEL_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "priormix/error.hpp"
#include "priormix/prior_algebra.hpp"

namespace priormix {

/*
 * Fully connected classifier R^d -> R^K. Hidden layers use a rectifier, the
 * output layer is affine. Weights of layer l are stored out x in, so a batch
 * X (B x in) maps to X * W^T + b^T.
 *
 * The same type doubles as the gradient container returned by backward().
 */
template <typename Scalar> struct MlpModel {
  std::vector<int> layer_dims;
  std::vector<MatrixX<Scalar>> weights;
  std::vector<VectorX<Scalar>> biases;

  std::size_t layer_count() const { return weights.size(); }
  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }

  Eigen::Index parameter_count() const {
    Eigen::Index total = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      total += weights[l].size() + biases[l].size();
    }
    return total;
  }

  bool all_finite() const {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (!weights[l].allFinite() || !biases[l].allFinite()) {
        return false;
      }
    }
    return true;
  }

  /// Zero-filled parameters with the given shape.
  static MlpModel zeros(const std::vector<int> &dims) {
    validate_dims(dims);
    MlpModel model;
    model.layer_dims = dims;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      model.weights.push_back(MatrixX<Scalar>::Zero(dims[l + 1], dims[l]));
      model.biases.push_back(VectorX<Scalar>::Zero(dims[l + 1]));
    }
    return model;
  }

  /// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
  static MlpModel init(const std::vector<int> &dims, std::uint64_t seed) {
    MlpModel model = zeros(dims);
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
      const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dims[l]));
      std::uniform_real_distribution<Scalar> uniform(-scale, scale);
      auto &w = model.weights[l];
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) {
          w(r, c) = uniform(rng);
        }
      }
    }
    return model;
  }

  static void validate_dims(const std::vector<int> &dims) {
    if (dims.size() < 2) {
      throw Error(ErrorCode::kInvalidArgument,
                  "an MLP needs at least input and output dimensions");
    }
    for (const int d : dims) {
      if (d < 1) {
        throw Error(ErrorCode::kInvalidArgument, "layer widths must be >= 1");
      }
    }
  }
};

/*
 * Layer widths for a network of `depth` unit layers (input and output
 * included): depth 3 is one hidden layer, depth 5 is three.
 */
inline std::vector<int> mlp_preset_dims(int input_dim, int classes, int depth,
                                        int hidden_width = 128) {
  if (depth < 2) {
    throw Error(ErrorCode::kInvalidArgument, "depth must be >= 2");
  }
  std::vector<int> dims{input_dim};
  for (int i = 0; i < depth - 2; ++i) {
    dims.push_back(hidden_width);
  }
  dims.push_back(classes);
  return dims;
}

/// Layer inputs saved during the forward pass, plus the logits.
template <typename Scalar> struct ForwardCache {
  std::vector<MatrixX<Scalar>> layer_inputs;
  MatrixX<Scalar> logits;
};

template <typename Scalar, typename Derived>
ForwardCache<Scalar> forward_pass(const MlpModel<Scalar> &model,
                                  const Eigen::MatrixBase<Derived> &inputs) {
  if (inputs.cols() != model.input_dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "input has " + std::to_string(inputs.cols()) +
                    " features, model expects " +
                    std::to_string(model.input_dim()));
  }
  ForwardCache<Scalar> cache;
  cache.layer_inputs.reserve(model.layer_count());
  MatrixX<Scalar> activation = inputs;
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    MatrixX<Scalar> next = activation * model.weights[l].transpose();
    next.rowwise() += model.biases[l].transpose();
    if (l + 1 < model.layer_count()) {
      next = next.cwiseMax(Scalar(0));
    }
    cache.layer_inputs.push_back(std::move(activation));
    activation = std::move(next);
  }
  cache.logits = std::move(activation);
  return cache;
}

template <typename Scalar, typename Derived>
MatrixX<Scalar> forward(const MlpModel<Scalar> &model,
                        const Eigen::MatrixBase<Derived> &inputs) {
  return forward_pass(model, inputs).logits;
}

/// Row-wise log-sum-exp with max subtraction.
template <typename Derived>
VectorX<typename Derived::Scalar>
log_sum_exp_rows(const Eigen::MatrixBase<Derived> &logits) {
  using Scalar = typename Derived::Scalar;
  const VectorX<Scalar> row_max = logits.rowwise().maxCoeff();
  const VectorX<Scalar> sums =
      (logits.colwise() - row_max).array().exp().rowwise().sum().matrix();
  return row_max.array() + sums.array().log();
}

template <typename Derived>
MatrixX<typename Derived::Scalar>
softmax_rows(const Eigen::MatrixBase<Derived> &logits) {
  const auto lse = log_sum_exp_rows(logits);
  return (logits.colwise() - lse).array().exp().matrix();
}

/// Entry (i, k): cross-entropy of row i against class k, lse(z_i) - z_ik.
template <typename Derived>
MatrixX<typename Derived::Scalar>
ce_loss_matrix(const Eigen::MatrixBase<Derived> &logits) {
  using Scalar = typename Derived::Scalar;
  const VectorX<Scalar> lse = log_sum_exp_rows(logits);
  MatrixX<Scalar> losses = (-logits).colwise() + lse;
  // lse >= max logit, so negatives are pure round-off.
  return losses.cwiseMax(Scalar(0));
}

/// Index of the largest entry of each row; ties go to the smallest index.
template <typename Derived>
std::vector<Eigen::Index>
argmax_rows(const Eigen::MatrixBase<Derived> &logits) {
  std::vector<Eigen::Index> best(static_cast<std::size_t>(logits.rows()), 0);
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index arg = 0;
    for (Eigen::Index k = 1; k < logits.cols(); ++k) {
      if (logits(i, k) > logits(i, arg)) {
        arg = k;
      }
    }
    best[static_cast<std::size_t>(i)] = arg;
  }
  return best;
}

/// Entry (i, k): 0 when k is the prediction for row i, else 1.
template <typename Derived>
MatrixX<typename Derived::Scalar>
zo_loss_matrix(const Eigen::MatrixBase<Derived> &logits) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> losses = MatrixX<Scalar>::Ones(logits.rows(), logits.cols());
  const auto predictions = argmax_rows(logits);
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    losses(i, predictions[static_cast<std::size_t>(i)]) = Scalar(0);
  }
  return losses;
}

/*
 * d/dz of sum_{i,k} u_ik * ce(z_i, k) = (sum_k u_ik) * softmax(z_i) - u_i.
 */
template <typename DerivedZ, typename DerivedU>
MatrixX<typename DerivedZ::Scalar>
logit_gradient(const Eigen::MatrixBase<DerivedZ> &logits,
               const Eigen::MatrixBase<DerivedU> &upstream) {
  using Scalar = typename DerivedZ::Scalar;
  const VectorX<Scalar> row_mass = upstream.rowwise().sum();
  return (softmax_rows(logits).array().colwise() * row_mass.array()).matrix() -
         upstream;
}

/*
 * Gradient of sum_{i,k} upstream(i, k) * ce(logits_i, k) with respect to every
 * parameter, using activations saved by forward_pass().
 */
template <typename Scalar, typename Derived>
MlpModel<Scalar> backward(const MlpModel<Scalar> &model,
                          const ForwardCache<Scalar> &cache,
                          const Eigen::MatrixBase<Derived> &upstream) {
  if (upstream.rows() != cache.logits.rows() ||
      upstream.cols() != cache.logits.cols()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "upstream weights must match the logits shape");
  }
  MlpModel<Scalar> grad;
  grad.layer_dims = model.layer_dims;
  grad.weights.resize(model.layer_count());
  grad.biases.resize(model.layer_count());
  MatrixX<Scalar> delta = logit_gradient(cache.logits, upstream);
  for (std::size_t l = model.layer_count(); l-- > 0;) {
    const MatrixX<Scalar> &input = cache.layer_inputs[l];
    grad.weights[l].noalias() = delta.transpose() * input;
    grad.biases[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      MatrixX<Scalar> propagated = delta * model.weights[l];
      delta = (input.array() > Scalar(0))
                  .select(propagated, MatrixX<Scalar>::Zero(
                                          propagated.rows(), propagated.cols()));
    }
  }
  return grad;
}

template <typename Scalar, typename DerivedX, typename DerivedU>
MlpModel<Scalar> backward(const MlpModel<Scalar> &model,
                          const Eigen::MatrixBase<DerivedX> &inputs,
                          const Eigen::MatrixBase<DerivedU> &upstream) {
  return backward(model, forward_pass(model, inputs), upstream);
}

using Mlp = MlpModel<double>;

/*
 * Flat little-endian record: uint64 count of layer dims, each dim as uint64,
 * then per layer the weights (row-major, out x in) followed by the biases, all
 * as IEEE-754 binary64.
 */
void save_checkpoint(const std::string &path, const Mlp &model);
Mlp load_checkpoint(const std::string &path);

} // namespace priormix

#endif // PRIORMIX_MODEL_HPP_
