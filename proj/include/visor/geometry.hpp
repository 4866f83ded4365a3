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

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "visor/protocol.hpp"

namespace visor {

/// Row-major binary mask, one byte per pixel.
class BinaryMask {
 public:
  BinaryMask(int width, int height);
  BinaryMask(int width, int height, std::vector<std::uint8_t> bits);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return bits_.size(); }

  bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool value = true) { bits_[index(x, y)] = value ? 1 : 0; }

  std::span<const std::uint8_t> bits() const { return bits_; }
  std::size_t count() const;
  bool empty() const { return count() == 0; }

  /// Run lengths, row-major, alternating background/foreground and starting
  /// with a (possibly zero) background run: "0 4 12" is four set pixels
  /// followed by twelve clear ones.
  std::string to_rle() const;
  static BinaryMask from_rle(int width, int height, std::string_view rle);

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_;
  int height_;
  std::vector<std::uint8_t> bits_;
};

struct OverlapCounts {
  std::size_t intersection = 0;
  std::size_t union_ = 0;
};

OverlapCounts mask_overlap(const BinaryMask& a, const BinaryMask& b);

double box_iou(const BoundingBox& a, const BoundingBox& b);

/// Region similarity J.
double mask_iou(const BinaryMask& a, const BinaryMask& b);

/// Pixels of the mask that are 4-adjacent to background or to the image edge.
BinaryMask mask_boundary(const BinaryMask& mask);

/// DAVIS default: ceil(0.008 * image diagonal).
int default_boundary_tolerance(int width, int height);

/// Boundary F-measure. A boundary pixel matches when a boundary pixel of the
/// other mask lies within Chebyshev distance `tolerance`.
double boundary_f(const BinaryMask& prediction, const BinaryMask& reference, int tolerance);

using MaskPair = std::pair<BinaryMask, BinaryMask>;  // prediction, reference

/// Cumulative IoU: total intersection over total union across the dataset.
double ciou(std::span<const MaskPair> pairs);

using FrameBoxes = std::map<std::int64_t, BoundingBox>;

enum class FrameAveraging {
  ReferenceFrames,  // frames annotated in the reference
  AllFrames,        // union of annotated and predicted frames
};

/// Mean per-frame box IoU; frames without a prediction count as 0.
double miou_video(const FrameBoxes& prediction, const FrameBoxes& reference,
                  FrameAveraging averaging = FrameAveraging::ReferenceFrames);

double temporal_iou(const TemporalSpan& a, const TemporalSpan& b);

using BoxPair = std::pair<BoundingBox, BoundingBox>;  // prediction, reference

/// Fraction of pairs whose IoU reaches `threshold`.
double accuracy_at(std::span<const BoxPair> pairs, double threshold);

struct JandF {
  double j = 0.0;
  double f = 0.0;
  double mean() const { return 0.5 * (j + f); }
};

/// One video: per-frame (prediction, reference) masks.
using MaskSequence = std::vector<MaskPair>;

/// J and F averaged over frames per sequence, then over sequences. A frame
/// where both masks are empty scores J = 1. A negative tolerance selects the
/// per-frame default.
JandF j_and_f(std::span<const MaskSequence> sequences, int tolerance = -1);

using EvalPair = std::variant<BoxPair, MaskPair, std::pair<TrackedRegion, TrackedRegion>>;

}  // namespace visor
