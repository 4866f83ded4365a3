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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gradient_cases.hpp"
#include "oracles.hpp"
#include "visor/error.hpp"
#include "visor/synergy.hpp"

using namespace visor;
using namespace visor::synergy;

namespace {

// Single-head pre-norm transformer written as plain loops over one sequence.
Vector reference_layer_norm(const Vector& x, const Vector& gain, const Vector& bias) {
  const double mean = x.mean();
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  Vector out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = gain[i] * (x[i] - mean) / std::sqrt(var + 1e-5) + bias[i];
  return out;
}

Vector affine(const nn::Affine& a, const Vector& x) {
  Vector y(a.out());
  for (Eigen::Index o = 0; o < a.out(); ++o) {
    double s = a.bias[o];
    for (Eigen::Index i = 0; i < a.in(); ++i) s += a.weight(o, i) * x[i];
    y[o] = s;
  }
  return y;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (x + 0.044715 * x * x * x))); }

Vector reference_discriminator(Discriminator& d, const Matrix& seq) {
  const auto n = seq.rows();
  std::vector<Vector> h;
  for (Eigen::Index t = 0; t < n; ++t) h.push_back(affine(d.input_layer(), seq.row(t).transpose()));
  const double scale = 1.0 / std::sqrt(static_cast<double>(d.config().width));
  for (auto& layer : d.layers()) {
    std::vector<Vector> q, k, v;
    for (const auto& x : h) {
      const Vector z = reference_layer_norm(x, layer.norm1.gain, layer.norm1.bias);
      q.push_back(affine(layer.query, z));
      k.push_back(affine(layer.key, z));
      v.push_back(affine(layer.value, z));
    }
    std::vector<Vector> next;
    for (Eigen::Index t = 0; t < n; ++t) {
      std::vector<double> w(n);
      double mx = -1e300;
      for (Eigen::Index s = 0; s < n; ++s) {
        w[s] = q[t].dot(k[s]) * scale;
        mx = std::max(mx, w[s]);
      }
      double z = 0.0;
      for (auto& x : w) z += (x = std::exp(x - mx));
      Vector ctx = Vector::Zero(v[0].size());
      for (Eigen::Index s = 0; s < n; ++s) ctx += (w[s] / z) * v[s];
      Vector x = h[t] + affine(layer.output, ctx);
      const Vector z2 = reference_layer_norm(x, layer.norm2.gain, layer.norm2.bias);
      Vector f = affine(layer.ffn_in, z2);
      for (auto& e : f) e = gelu(e);
      next.push_back(x + affine(layer.ffn_out, f));
    }
    h = next;
  }
  Vector pooled = Vector::Zero(h[0].size());
  for (const auto& x : h) pooled += reference_layer_norm(x, d.final_norm().gain, d.final_norm().bias);
  pooled /= static_cast<double>(n);
  Vector a = affine(d.head_in(), pooled);
  for (auto& e : a) e = gelu(e);
  Vector logits = affine(d.head_out(), a);
  const double mx = logits.maxCoeff();
  Vector p = (logits.array() - mx).exp();
  return p / p.sum();
}

}  // namespace

TEST_CASE("gradient reversal is identity forward and scaled negation backward") {
  Matrix x = Matrix::Random(3, 4);
  CHECK(grl_forward(x) == x);
  CHECK(grl_backward(x, 0.5).isApprox(-0.5 * x));
  CHECK(grl_backward(x, 0.0).isZero());
}

TEST_CASE("discriminator forward matches a loop implementation") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    Discriminator d(4, 3, gradcase::small_disc(), rng);
    nn::ParamList params;
    d.append_params(params);
    for (const auto& p : params) {
      for (Eigen::Index k = 0; k < p.size; ++k) p.value[k] += 0.2 * rng.normal();
    }
    const Matrix seq = gradcase::normal_matrix(rng, 3, 4);
    const Vector fast = d.predict(seq);
    const Vector slow = reference_discriminator(d, seq);
    CHECK((fast - slow).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(fast.sum() == doctest::Approx(1.0));
  }
}

TEST_CASE("adversarial loss is clamped cross-entropy") {
  Vector p(3);
  p << 0.2, 0.5, 0.3;
  CHECK(adversarial_loss(p, 1) == doctest::Approx(-std::log(0.5)));
  p << 1.0, 0.0, 0.0;
  CHECK(adversarial_loss(p, 2) == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("finite-difference gradient checks") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CAPTURE(seed);
    CHECK(gradcase::task_head(seed) < 1e-4);
    CHECK(gradcase::discriminator(seed) < 1e-4);
    CHECK(gradcase::composed(seed) < 1e-4);
  }
}

TEST_CASE("synthetic benchmark is deterministic and task-local") {
  SynergyConfig cfg = gradcase::small_synergy(5);
  const auto a = SyntheticTaskSet::generate(cfg);
  const auto b = SyntheticTaskSet::generate(cfg);
  CHECK(a.tasks() == 4);
  CHECK(a.train(2).shared_tokens == b.train(2).shared_tokens);
  const auto sub = a.subset({3, 1});
  CHECK(sub.tasks() == 2);
  CHECK(sub.origin(0) == 3);
  CHECK(sub.train(0).labels == a.train(3).labels);
  CHECK(a.train(0).shared_tokens.rows() == cfg.train_per_task * cfg.seq_len);
  CHECK_THROWS_AS(a.subset({7}), Error);
}

TEST_CASE("per-task parameters depend only on the origin index") {
  SynergyConfig cfg = gradcase::small_synergy(6);
  SynergyModel full(cfg, {0, 1, 2, 3});
  SynergyModel pair(cfg, {2, 3});
  const auto& a = full.head(2).first().weight;
  const auto& b = pair.head(0).first().weight;
  CHECK(a == b);
}

TEST_CASE("training with lambda zero leaves the discriminator gradient out of the producer") {
  SynergyConfig cfg = gradcase::small_synergy(7);
  const auto data = SyntheticTaskSet::generate(cfg);
  SynergyModel m0(cfg, data.origins());
  SynergyModel m1(cfg, data.origins());
  const auto batch = make_batch(data, {{0, 0}, {1, 1}, {2, 0}, {3, 1}});
  auto p0 = m0.producer_params();
  auto p1 = m1.producer_params();
  oracle::zero(p0);
  oracle::zero(p1);
  cfg.lambda = 0.0;
  m0.objective(batch, 0.0, true);
  m1.objective(batch, 1.0, true);
  const Vector g0 = nn::flatten_grads(p0);
  const Vector g1 = nn::flatten_grads(p1);
  CHECK((g0 - g1).norm() > 1e-9);
}

TEST_CASE("train_synergy reports history from the initial epoch") {
  SynergyConfig cfg = gradcase::small_synergy(8);
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.probe_epochs = 2;
  const auto data = SyntheticTaskSet::generate(cfg);
  const auto r = train_synergy(data, cfg);
  CHECK(r.history.size() == 4);
  CHECK(r.history.front().epoch == 0);
  CHECK(r.heldout_task_losses.size() == 4);
  CHECK(r.probe.heldout_accuracy >= 0.0);
  CHECK(r.probe.heldout_accuracy <= 1.0);
  const auto again = train_synergy(data, cfg);
  CHECK(again.producer_parameters == r.producer_parameters);
  const auto csv = history_csv(r.history);
  CHECK(csv.rfind("epoch,task0_loss,task1_loss,task2_loss,task3_loss,adversarial_loss,disc_accuracy\n", 0) == 0);
}

TEST_CASE("divergence is reported") {
  SynergyConfig cfg = gradcase::small_synergy(9);
  cfg.epochs = 50;
  cfg.learning_rate = 1e6;
  cfg.probe_epochs = 0;
  const auto data = SyntheticTaskSet::generate(cfg);
  try {
    train_synergy(data, cfg);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DivergenceDetected);
  }
}

TEST_CASE("pairwise matrix layout") {
  SynergyConfig cfg = gradcase::small_synergy(10);
  cfg.epochs = 2;
  cfg.probe_epochs = 0;
  const auto data = SyntheticTaskSet::generate(cfg);
  const auto m = pairwise_synergy(data, {{0, 1}}, cfg);
  CHECK(m.improvement.size() == 4);
  CHECK(m.improvement[0][0] == 0.0);
  CHECK(m.improvement[2][3] == 0.0);
  CHECK(m.solo_losses.size() == 4);
  CHECK(matrix_csv(m).rfind("task,with_task0,with_task1,with_task2,with_task3,solo_loss\n", 0) == 0);
}

TEST_CASE("empty sequences are rejected") {
  Rng rng(1);
  Discriminator d(4, 3, gradcase::small_disc(), rng);
  CHECK_THROWS_AS(d.predict(Matrix(0, 4)), Error);
}
