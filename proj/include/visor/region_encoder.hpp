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

#include <Eigen/Dense>

#include "visor/geometry.hpp"

namespace visor {

/// Dense per-cell features, cell (x, y) at row y * width + x.
class FeatureGrid {
 public:
  FeatureGrid(int width, int height, int dim);
  FeatureGrid(int width, int height, Eigen::MatrixXd values);

  int width() const { return width_; }
  int height() const { return height_; }
  int dim() const { return static_cast<int>(values_.cols()); }

  auto cell(int x, int y) const { return values_.row(static_cast<Eigen::Index>(y) * width_ + x); }
  auto cell(int x, int y) { return values_.row(static_cast<Eigen::Index>(y) * width_ + x); }

  const Eigen::MatrixXd& values() const { return values_; }

 private:
  int width_;
  int height_;
  Eigen::MatrixXd values_;  // (width * height) x dim
};

struct RegionFeature {
  Eigen::VectorXd pooled;
  Eigen::VectorXd geometry;  // g * g, row-major

  /// [pooled; geometry], the vector handed to the decision model.
  Eigen::VectorXd fused() const;
};

inline constexpr int kDefaultGeometryGrid = 16;

/// Mean of the grid vectors under the mask, plus the mask's area-averaged
/// downsample to geometry_grid x geometry_grid.
RegionFeature pool_region(const FeatureGrid& grid, const BinaryMask& mask,
                          int geometry_grid = kDefaultGeometryGrid);

/// Area-averaged downsample of a mask to g x g (fractional pixel overlap).
Eigen::VectorXd downsample_mask(const BinaryMask& mask, int g);

/// Cells whose center lies inside [xl, xr) x [yt, yb).
BinaryMask box_to_mask(const BoundingBox& box, int width, int height);

/// Tight bounding box of the set pixels in normalized coordinates.
std::optional<BoundingBox> mask_to_box(const BinaryMask& mask);

}  // namespace visor
