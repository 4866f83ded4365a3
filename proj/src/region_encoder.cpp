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

#include "visor/region_encoder.hpp"

#include <algorithm>
#include <cmath>

#include "visor/error.hpp"

namespace visor {

FeatureGrid::FeatureGrid(int width, int height, int dim)
    : FeatureGrid(width, height,
                  Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(std::max(width, 0)) *
                                            std::max(height, 0),
                                        std::max(dim, 0))) {}

FeatureGrid::FeatureGrid(int width, int height, Eigen::MatrixXd values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (width < 1 || height < 1 || values_.cols() < 1) {
    fail(ErrorCode::InvalidArgument, "feature grid dimensions must be positive");
  }
  if (values_.rows() != static_cast<Eigen::Index>(width) * height) {
    fail(ErrorCode::DimensionMismatch, "feature grid row count does not match width * height");
  }
  if (!values_.allFinite()) fail(ErrorCode::InvalidArgument, "feature grid has non-finite values");
}

Eigen::VectorXd RegionFeature::fused() const {
  Eigen::VectorXd v(pooled.size() + geometry.size());
  v << pooled, geometry;
  return v;
}

Eigen::VectorXd downsample_mask(const BinaryMask& mask, int g) {
  if (g < 1) fail(ErrorCode::InvalidArgument, "geometry grid must be >= 1");
  const double sx = static_cast<double>(mask.width()) / g;
  const double sy = static_cast<double>(mask.height()) / g;
  Eigen::VectorXd out(static_cast<Eigen::Index>(g) * g);
  for (int gy = 0; gy < g; ++gy) {
    const double y0 = gy * sy;
    const double y1 = (gy + 1) * sy;
    for (int gx = 0; gx < g; ++gx) {
      const double x0 = gx * sx;
      const double x1 = (gx + 1) * sx;
      double covered = 0.0;
      double total = 0.0;
      for (int y = static_cast<int>(std::floor(y0)); y < std::min(mask.height(), static_cast<int>(std::ceil(y1))); ++y) {
        const double oy = std::min<double>(y + 1, y1) - std::max<double>(y, y0);
        if (oy <= 0.0) continue;
        for (int x = static_cast<int>(std::floor(x0)); x < std::min(mask.width(), static_cast<int>(std::ceil(x1))); ++x) {
          const double ox = std::min<double>(x + 1, x1) - std::max<double>(x, x0);
          if (ox <= 0.0) continue;
          const double area = ox * oy;
          total += area;
          if (mask.at(x, y)) covered += area;
        }
      }
      // covered and total accumulate identical terms, so a full cell is exactly 1.
      out[static_cast<Eigen::Index>(gy) * g + gx] = total > 0.0 ? covered / total : 0.0;
    }
  }
  return out;
}

RegionFeature pool_region(const FeatureGrid& grid, const BinaryMask& mask, int geometry_grid) {
  if (mask.width() != grid.width() || mask.height() != grid.height()) {
    fail(ErrorCode::DimensionMismatch, "mask and feature grid sizes differ");
  }
  const auto n = mask.count();
  if (n == 0) fail(ErrorCode::EmptyMask, "cannot pool over an empty mask");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(grid.dim());
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      if (mask.at(x, y)) sum += grid.cell(x, y).transpose();
    }
  }
  return RegionFeature{sum / static_cast<double>(n), downsample_mask(mask, geometry_grid)};
}

BinaryMask box_to_mask(const BoundingBox& box, int width, int height) {
  if (!box.canonical()) fail(ErrorCode::NonCanonicalBox, "box_to_mask requires a canonical box");
  BinaryMask mask(width, height);
  for (int y = 0; y < height; ++y) {
    const double cy = (y + 0.5) / height;
    if (cy < box.yt || cy >= box.yb) continue;
    for (int x = 0; x < width; ++x) {
      const double cx = (x + 0.5) / width;
      if (cx >= box.xl && cx < box.xr) mask.set(x, y);
    }
  }
  return mask;
}

std::optional<BoundingBox> mask_to_box(const BinaryMask& mask) {
  int x0 = mask.width();
  int y0 = mask.height();
  int x1 = -1;
  int y1 = -1;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return std::nullopt;
  const double w = mask.width();
  const double h = mask.height();
  return BoundingBox{x0 / w, y0 / h, (x1 + 1) / w, (y1 + 1) / h};
}

}  // namespace visor
