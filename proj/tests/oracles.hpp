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

// Brute-force reference implementations used to check the metrics and the
// hand-written gradients. None of them call into the library's metric code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "visor/geometry.hpp"
#include "visor/nn.hpp"
#include "visor/rng.hpp"

namespace oracle {

using visor::BinaryMask;
using visor::BoundingBox;

// Counts raster cells of an n x n grid whose centers fall in [xl, xr) x [yt, yb).
inline double raster_box_iou(const BoundingBox& a, const BoundingBox& b, int n) {
  auto inside = [](const BoundingBox& box, double cx, double cy) {
    return cx >= box.xl && cx < box.xr && cy >= box.yt && cy < box.yb;
  };
  long long inter = 0;
  long long uni = 0;
  for (int y = 0; y < n; ++y) {
    const double cy = (y + 0.5) / n;
    for (int x = 0; x < n; ++x) {
      const double cx = (x + 0.5) / n;
      const bool ia = inside(a, cx, cy);
      const bool ib = inside(b, cx, cy);
      inter += (ia && ib) ? 1 : 0;
      uni += (ia || ib) ? 1 : 0;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline std::pair<long long, long long> popcount_overlap(const BinaryMask& a, const BinaryMask& b) {
  long long inter = 0;
  long long uni = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      inter += (a.at(x, y) && b.at(x, y)) ? 1 : 0;
      uni += (a.at(x, y) || b.at(x, y)) ? 1 : 0;
    }
  }
  return {inter, uni};
}

inline double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  const auto [i, u] = popcount_overlap(a, b);
  return static_cast<double>(i) / static_cast<double>(u);
}

inline double ciou(const std::vector<std::pair<BinaryMask, BinaryMask>>& pairs) {
  long long i = 0;
  long long u = 0;
  for (const auto& [p, r] : pairs) {
    const auto [pi, pu] = popcount_overlap(p, r);
    i += pi;
    u += pu;
  }
  return static_cast<double>(i) / static_cast<double>(u);
}

// Frame-by-frame enumeration of an inclusive span intersection.
inline double temporal_iou(std::int64_t a0, std::int64_t a1, std::int64_t b0, std::int64_t b1) {
  long long inter = 0;
  long long uni = 0;
  for (std::int64_t f = std::min(a0, b0); f <= std::max(a1, b1); ++f) {
    const bool ia = f >= a0 && f <= a1;
    const bool ib = f >= b0 && f <= b1;
    inter += (ia && ib) ? 1 : 0;
    uni += (ia || ib) ? 1 : 0;
  }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Exact box intersection on integer-grid boxes through cell enumeration.
inline double video_miou(const std::map<std::int64_t, BoundingBox>& pred,
                         const std::map<std::int64_t, BoundingBox>& ref, int n) {
  double total = 0.0;
  for (const auto& [frame, box] : ref) {
    const auto it = pred.find(frame);
    if (it != pred.end()) total += raster_box_iou(it->second, box, n);
  }
  return total / static_cast<double>(ref.size());
}

// Foreground pixels with a background or out-of-image 4-neighbour.
inline std::vector<std::pair<int, int>> boundary_pixels(const BinaryMask& m) {
  std::vector<std::pair<int, int>> out;
  auto fg = [&](int x, int y) { return x >= 0 && y >= 0 && x < m.width() && y < m.height() && m.at(x, y); };
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (fg(x, y) && (!fg(x - 1, y) || !fg(x + 1, y) || !fg(x, y - 1) || !fg(x, y + 1))) out.emplace_back(x, y);
    }
  }
  return out;
}

// Chebyshev distance transform by exhaustive search over the target set.
inline std::vector<int> chebyshev_distances(const std::vector<std::pair<int, int>>& from,
                                            const std::vector<std::pair<int, int>>& to) {
  std::vector<int> d;
  d.reserve(from.size());
  for (const auto& [x, y] : from) {
    int best = std::numeric_limits<int>::max();
    for (const auto& [u, v] : to) best = std::min(best, std::max(std::abs(x - u), std::abs(y - v)));
    d.push_back(best);
  }
  return d;
}

inline double boundary_f(const BinaryMask& pred, const BinaryMask& ref, int tolerance) {
  const auto bp = boundary_pixels(pred);
  const auto br = boundary_pixels(ref);
  if (bp.empty() && br.empty()) return 1.0;
  if (bp.empty() || br.empty()) return 0.0;
  std::size_t mp = 0;
  for (int d : chebyshev_distances(bp, br)) mp += d <= tolerance ? 1 : 0;
  std::size_t mr = 0;
  for (int d : chebyshev_distances(br, bp)) mr += d <= tolerance ? 1 : 0;
  const double precision = static_cast<double>(mp) / static_cast<double>(bp.size());
  const double recall = static_cast<double>(mr) / static_cast<double>(br.size());
  return precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

inline BinaryMask random_mask(visor::Rng& rng, int w, int h, double density) {
  BinaryMask m(w, h);
  // A few random rectangles plus speckle, so boundaries have varied shapes.
  const int rects = 1 + static_cast<int>(rng.index(3));
  for (int r = 0; r < rects; ++r) {
    const int x0 = static_cast<int>(rng.index(static_cast<std::uint64_t>(w)));
    const int y0 = static_cast<int>(rng.index(static_cast<std::uint64_t>(h)));
    const int x1 = std::min(w, x0 + 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>(w))));
    const int y1 = std::min(h, y0 + 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>(h))));
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) m.set(x, y);
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (rng.bernoulli(density)) m.set(x, y, !m.at(x, y));
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Gradient checking

struct GradReport {
  double max_rel_error = 0.0;
  Eigen::Index worst = -1;
};

// Relative error |a - n| / max(|a|, |n|, floor) per coordinate; the floor
// keeps coordinates whose gradient is essentially zero from dividing by zero.
inline constexpr double kRelFloor = 1e-3;

inline GradReport compare(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
  GradReport r;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), kRelFloor});
    const double e = std::abs(analytic[i] - numeric[i]) / denom;
    if (e > r.max_rel_error) {
      r.max_rel_error = e;
      r.worst = i;
    }
  }
  return r;
}

// Central differences of f at x.
inline Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                        Eigen::VectorXd x, double eps = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + eps;
    const double up = f(x);
    x[i] = keep - eps;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

// Numeric gradient over a parameter list whose values are perturbed in place.
inline Eigen::VectorXd numeric_param_gradient(const visor::nn::ParamList& params,
                                              const std::function<double()>& f, double eps = 1e-6) {
  std::vector<double*> slots;
  for (const auto& p : params) {
    for (Eigen::Index i = 0; i < p.size; ++i) slots.push_back(p.value + i);
  }
  Eigen::VectorXd g(static_cast<Eigen::Index>(slots.size()));
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const double keep = *slots[i];
    *slots[i] = keep + eps;
    const double up = f();
    *slots[i] = keep - eps;
    const double down = f();
    *slots[i] = keep;
    g[static_cast<Eigen::Index>(i)] = (up - down) / (2.0 * eps);
  }
  return g;
}

inline Eigen::VectorXd analytic_param_gradient(const visor::nn::ParamList& params) {
  Eigen::Index n = 0;
  for (const auto& p : params) n += p.size;
  Eigen::VectorXd g(n);
  Eigen::Index k = 0;
  for (const auto& p : params) {
    for (Eigen::Index i = 0; i < p.size; ++i) g[k++] = p.grad[i];
  }
  return g;
}

inline void zero(const visor::nn::ParamList& params) {
  for (const auto& p : params) std::fill(p.grad, p.grad + p.size, 0.0);
}

inline void randomize(const visor::nn::ParamList& params, visor::Rng& rng, double scale) {
  for (const auto& p : params) {
    for (Eigen::Index i = 0; i < p.size; ++i) p.value[i] = scale * rng.normal();
  }
}

}  // namespace oracle
