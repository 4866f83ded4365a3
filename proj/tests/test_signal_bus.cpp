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
#include "visor/error.hpp"
#include "visor/signal_bus.hpp"

using namespace visor;

namespace {

// log-sum-exp in long double without max subtraction tricks.
long double reference_nll(const Eigen::MatrixXd& logits, const std::vector<int>& ids) {
  long double total = 0.0L;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    long double z = 0.0L;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) z += std::exp(static_cast<long double>(logits(r, c)));
    total += std::log(z) - static_cast<long double>(logits(r, ids[r]));
  }
  return total / logits.rows();
}

}  // namespace

TEST_CASE("split and concat are inverse") {
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(7, 0, 6);
  const auto e = split(v, 3);
  CHECK(e.task_specific.size() == 3);
  CHECK(e.task_invariant.size() == 4);
  CHECK(concat(e) == v);
  CHECK_THROWS_AS(split(v, 9), Error);
}

TEST_CASE("projection is an affine map") {
  Rng rng(41);
  const auto p = Projection::random(5, 3, rng);
  const Eigen::VectorXd v = gradcase::normal_vector(rng, 5);
  Eigen::VectorXd expect(3);
  for (int o = 0; o < 3; ++o) {
    double s = p.bias[o];
    for (int i = 0; i < 5; ++i) s += p.weight(o, i) * v[i];
    expect[o] = s;
  }
  CHECK((project(p, v) - expect).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(project(Projection::identity(5), v) == v);
  CHECK_THROWS_AS(project(p, Eigen::VectorXd::Zero(4)), Error);
}

TEST_CASE("alignment loss is the squared distance") {
  Eigen::VectorXd a(3), b(3);
  a << 1, 2, 3;
  b << 0, 2, 5;
  CHECK(alignment_loss(a, b) == doctest::Approx(5.0));
  CHECK_THROWS_AS(alignment_loss(a, Eigen::VectorXd::Zero(2)), Error);
}

TEST_CASE("signal-token nll matches a long double oracle") {
  Rng rng(42);
  for (int i = 0; i < 50; ++i) {
    const Eigen::MatrixXd logits = gradcase::normal_matrix(rng, 1 + rng.index(4), 2 + rng.index(8), 3.0);
    std::vector<int> ids;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) ids.push_back(static_cast<int>(rng.index(logits.cols())));
    CHECK(signal_token_nll(logits, ids) == doctest::Approx(static_cast<double>(reference_nll(logits, ids))).epsilon(1e-12));
  }
  Eigen::MatrixXd big(1, 2);
  big << 1000.0, 0.0;
  const std::vector<int> zero{0};
  CHECK(std::isfinite(signal_token_nll(big, zero)));
  const std::vector<int> bad{5};
  try {
    signal_token_nll(big, bad);
    FAIL("expected IndexOutOfVocab");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IndexOutOfVocab);
  }
}

TEST_CASE("gradient checks for the decoder-alignment losses") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CAPTURE(seed);
    CHECK(gradcase::alignment(seed) < 1e-4);
    CHECK(gradcase::token_nll(seed) < 1e-4);
  }
}

TEST_CASE("library grad_check agrees with the analytic gradient of a quadratic") {
  const LossFunction f = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (g) *g = 2.0 * x;
    return x.squaredNorm();
  };
  CHECK(grad_check(f, Eigen::VectorXd::LinSpaced(4, -1, 2)) < 1e-8);
}

TEST_CASE("alignment training reduces both losses and is deterministic") {
  AlignConfig cfg = gradcase::small_align_config();
  cfg.epochs = 30;
  cfg.samples_per_module = 16;
  const auto r = train_alignment(cfg);
  REQUIRE(r.history.size() == 31);
  CHECK(r.history.back().nll < r.history.front().nll);
  CHECK(r.history.back().alignment < r.history.front().alignment);
  CHECK(train_alignment(cfg).checkpoint_json == r.checkpoint_json);
  CHECK(align_history_csv(r.history).rfind("epoch,", 0) == 0);
}

TEST_CASE("signal token ids are disjoint per module") {
  Rng rng(43);
  AlignmentModel m(gradcase::small_align_config(), rng);
  std::set<int> seen;
  for (auto mod : kAllModules) {
    for (int id : m.signal_token_ids(mod)) {
      CHECK(seen.insert(id).second);
      CHECK(id < m.vocab_size());
    }
  }
}
