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

#include "visor/nn.hpp"

#include <cmath>

namespace visor::nn {

Eigen::Index total_size(const ParamList& params) {
  Eigen::Index n = 0;
  for (const auto& p : params) n += p.size;
  return n;
}

Vector flatten_values(const ParamList& params) {
  Vector flat(total_size(params));
  Eigen::Index offset = 0;
  for (const auto& p : params) {
    flat.segment(offset, p.size) = Eigen::Map<const Vector>(p.value, p.size);
    offset += p.size;
  }
  return flat;
}

Vector flatten_grads(const ParamList& params) {
  Vector flat(total_size(params));
  Eigen::Index offset = 0;
  for (const auto& p : params) {
    flat.segment(offset, p.size) = Eigen::Map<const Vector>(p.grad, p.size);
    offset += p.size;
  }
  return flat;
}

void assign_values(const ParamList& params, const Vector& flat) {
  Eigen::Index offset = 0;
  for (const auto& p : params) {
    Eigen::Map<Vector>(p.value, p.size) = flat.segment(offset, p.size);
    offset += p.size;
  }
}

void zero_grads(const ParamList& params) {
  for (const auto& p : params) Eigen::Map<Vector>(p.grad, p.size).setZero();
}

void sgd_step(const ParamList& params, double lr, double weight_decay) {
  for (const auto& p : params) {
    Eigen::Map<Vector> value(p.value, p.size);
    Eigen::Map<const Vector> grad(p.grad, p.size);
    if (weight_decay != 0.0) {
      value -= lr * (grad + weight_decay * value);
    } else {
      value -= lr * grad;
    }
  }
}

Affine::Affine(Eigen::Index in, Eigen::Index out)
    : weight(Matrix::Zero(out, in)),
      bias(Vector::Zero(out)),
      grad_weight(Matrix::Zero(out, in)),
      grad_bias(Vector::Zero(out)) {}

Affine Affine::init(Eigen::Index in, Eigen::Index out, Rng& rng, double scale) {
  Affine layer(in, out);
  const double bound = scale / std::sqrt(static_cast<double>(in));
  for (Eigen::Index r = 0; r < out; ++r) {
    for (Eigen::Index c = 0; c < in; ++c) layer.weight(r, c) = rng.uniform(-bound, bound);
  }
  return layer;
}

Matrix Affine::forward(const Matrix& x) const {
  Matrix y = x * weight.transpose();
  y.rowwise() += bias.transpose();
  return y;
}

Matrix Affine::backward(const Matrix& x, const Matrix& grad_out) {
  grad_weight.noalias() += grad_out.transpose() * x;
  grad_bias += grad_out.colwise().sum().transpose();
  return grad_out * weight;
}

void Affine::append_params(ParamList& params, const std::string& prefix) {
  params.push_back({prefix + ".weight", weight.data(), grad_weight.data(), weight.size()});
  params.push_back({prefix + ".bias", bias.data(), grad_bias.data(), bias.size()});
}

Matrix tanh_forward(const Matrix& x) { return x.array().tanh().matrix(); }

Matrix tanh_backward(const Matrix& y, const Matrix& grad_out) {
  return (grad_out.array() * (1.0 - y.array().square())).matrix();
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;
}  // namespace

// Tanh approximation of GELU.
Matrix gelu_forward(const Matrix& x) {
  const auto u = kGeluC * (x.array() + kGeluA * x.array().cube());
  return (0.5 * x.array() * (1.0 + u.tanh())).matrix();
}

Matrix gelu_backward(const Matrix& x, const Matrix& grad_out) {
  const auto xa = x.array();
  const Eigen::ArrayXXd t = (kGeluC * (xa + kGeluA * xa.cube())).tanh();
  const Eigen::ArrayXXd du = kGeluC * (1.0 + 3.0 * kGeluA * xa.square());
  const Eigen::ArrayXXd d = 0.5 * (1.0 + t) + 0.5 * xa * (1.0 - t.square()) * du;
  return (grad_out.array() * d).matrix();
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

}  // namespace visor::nn
