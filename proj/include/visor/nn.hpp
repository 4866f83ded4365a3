// Copyright 2026 The Visor Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Small building blocks for the hand-differentiated models: flat parameter
// views, affine layers over row-major batches, and plain SGD.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "visor/rng.hpp"

namespace visor::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Non-owning view of one parameter tensor and its gradient buffer.
struct ParamRef {
  std::string name;
  double* value;
  double* grad;
  Eigen::Index size;
};

using ParamList = std::vector<ParamRef>;

Vector flatten_values(const ParamList& params);
Vector flatten_grads(const ParamList& params);
void assign_values(const ParamList& params, const Vector& flat);
void zero_grads(const ParamList& params);
Eigen::Index total_size(const ParamList& params);

/// value -= lr * (grad + weight_decay * value)
void sgd_step(const ParamList& params, double lr, double weight_decay = 0.0);

/// y = x W^T + b for a batch stored one sample per row.
struct Affine {
  Matrix weight;  // out x in
  Vector bias;    // out
  Matrix grad_weight;
  Vector grad_bias;

  Affine() = default;
  Affine(Eigen::Index in, Eigen::Index out);

  /// Uniform(-1/sqrt(in), 1/sqrt(in)) weights, zero bias.
  static Affine init(Eigen::Index in, Eigen::Index out, Rng& rng, double scale = 1.0);

  Eigen::Index in() const { return weight.cols(); }
  Eigen::Index out() const { return weight.rows(); }

  Matrix forward(const Matrix& x) const;
  /// Accumulates parameter gradients and returns dL/dx.
  Matrix backward(const Matrix& x, const Matrix& grad_out);

  void append_params(ParamList& params, const std::string& prefix);
};

Matrix tanh_forward(const Matrix& x);
/// dL/dx given the tanh output y and dL/dy.
Matrix tanh_backward(const Matrix& y, const Matrix& grad_out);

Matrix gelu_forward(const Matrix& x);
Matrix gelu_backward(const Matrix& x, const Matrix& grad_out);

/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& logits);

}  // namespace visor::nn
