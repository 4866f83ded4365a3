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

#include "oracles.hpp"
#include "visor/error.hpp"
#include "visor/region_encoder.hpp"

using namespace visor;

namespace {

// Supersampled coverage: each pixel is split into s x s subcells.
double coverage_oracle(const BinaryMask& m, int g, int gx, int gy, int s) {
  const int W = m.width() * s * g;
  const int H = m.height() * s * g;
  long long in = 0;
  long long on = 0;
  for (int y = gy * H / g; y < (gy + 1) * H / g; ++y) {
    for (int x = gx * W / g; x < (gx + 1) * W / g; ++x) {
      ++in;
      if (m.at(x / (s * g), y / (s * g))) ++on;
    }
  }
  return static_cast<double>(on) / static_cast<double>(in);
}

}  // namespace

TEST_CASE("pool_region averages the masked cells") {
  Rng rng(31);
  for (int i = 0; i < 30; ++i) {
    const int w = 2 + static_cast<int>(rng.index(12));
    const int h = 2 + static_cast<int>(rng.index(12));
    const int d = 1 + static_cast<int>(rng.index(5));
    Eigen::MatrixXd values(w * h, d);
    for (Eigen::Index k = 0; k < values.size(); ++k) values.data()[k] = rng.normal();
    const FeatureGrid grid(w, h, values);
    auto mask = oracle::random_mask(rng, w, h, 0.1);
    if (mask.empty()) mask.set(0, 0);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
    int n = 0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!mask.at(x, y)) continue;
        for (int c = 0; c < d; ++c) sum[c] += values(y * w + x, c);
        ++n;
      }
    }
    const auto feature = pool_region(grid, mask, 4);
    CHECK((feature.pooled - sum / n).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(feature.geometry.size() == 16);
    CHECK(feature.fused().size() == d + 16);
  }
}

TEST_CASE("downsample_mask equals supersampled coverage") {
  Rng rng(32);
  for (int i = 0; i < 20; ++i) {
    const auto m = oracle::random_mask(rng, 1 + rng.index(10), 1 + rng.index(10), 0.2);
    const int g = 1 + static_cast<int>(rng.index(5));
    const auto v = downsample_mask(m, g);
    for (int gy = 0; gy < g; ++gy) {
      for (int gx = 0; gx < g; ++gx) CHECK(v[gy * g + gx] == doctest::Approx(coverage_oracle(m, g, gx, gy, 1)));
    }
  }
}

TEST_CASE("box and mask conversions") {
  const auto m = box_to_mask({0.25, 0.25, 0.75, 0.5}, 8, 8);
  CHECK(m.count() == 8);
  CHECK(m.at(2, 2));
  CHECK_FALSE(m.at(2, 4));
  CHECK(mask_to_box(m) == BoundingBox{0.25, 0.25, 0.75, 0.5});
  CHECK_FALSE(mask_to_box(BinaryMask(4, 4)));
  CHECK(box_to_mask({0, 0, 1, 1}, 5, 3).count() == 15);
  CHECK_THROWS_AS(box_to_mask({0.5, 0, 0.1, 1}, 4, 4), Error);
  Rng rng(33);
  for (int i = 0; i < 100; ++i) {
    auto mask = oracle::random_mask(rng, 16, 16, 0.0);
    const auto box = mask_to_box(mask);
    REQUIRE(box);
    const auto filled = box_to_mask(*box, 16, 16);
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) {
        if (mask.at(x, y)) CHECK(filled.at(x, y));
      }
    }
    CHECK(mask_to_box(filled) == box);
  }
}

TEST_CASE("pooling errors") {
  FeatureGrid grid(4, 4, 2);
  CHECK_THROWS_AS(pool_region(grid, BinaryMask(4, 4)), Error);
  try {
    pool_region(grid, BinaryMask(4, 4));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyMask);
  }
  try {
    pool_region(grid, BinaryMask(3, 4));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}
