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

#include "visor/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "visor/error.hpp"

namespace visor {

BinaryMask::BinaryMask(int width, int height)
    : BinaryMask(width, height,
                 std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) *
                                           static_cast<std::size_t>(std::max(height, 0)))) {}

BinaryMask::BinaryMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  if (width < 1 || height < 1) {
    fail(ErrorCode::InvalidArgument, "mask dimensions must be positive, got " +
                                         std::to_string(width) + "x" + std::to_string(height));
  }
  if (bits_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    fail(ErrorCode::DimensionMismatch, "mask bit count " + std::to_string(bits_.size()) +
                                           " does not match " + std::to_string(width) + "x" +
                                           std::to_string(height));
  }
  for (auto& b : bits_) b = b != 0 ? 1 : 0;
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::string BinaryMask::to_rle() const {
  std::string out;
  std::uint8_t current = 0;
  std::size_t run = 0;
  for (auto b : bits_) {
    if (b != current) {
      out += std::to_string(run);
      out.push_back(' ');
      current = b;
      run = 0;
    }
    ++run;
  }
  out += std::to_string(run);
  return out;
}

BinaryMask BinaryMask::from_rle(int width, int height, std::string_view rle) {
  std::vector<std::uint8_t> bits;
  bits.reserve(static_cast<std::size_t>(std::max(width, 0)) *
               static_cast<std::size_t>(std::max(height, 0)));
  std::uint8_t value = 0;
  std::size_t i = 0;
  while (i < rle.size()) {
    while (i < rle.size() && rle[i] == ' ') ++i;
    if (i >= rle.size()) break;
    std::size_t run = 0;
    auto [ptr, ec] = std::from_chars(rle.data() + i, rle.data() + rle.size(), run);
    if (ec != std::errc{}) fail(ErrorCode::InvalidArgument, "malformed run-length string");
    i = static_cast<std::size_t>(ptr - rle.data());
    bits.insert(bits.end(), run, value);
    value ^= 1;
  }
  return BinaryMask(width, height, std::move(bits));
}

OverlapCounts mask_overlap(const BinaryMask& a, const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    fail(ErrorCode::DimensionMismatch,
         "mask sizes differ: " + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
             " vs " + std::to_string(b.width()) + "x" + std::to_string(b.height()));
  }
  OverlapCounts counts;
  const auto bits_a = a.bits();
  const auto bits_b = b.bits();
  for (std::size_t i = 0; i < bits_a.size(); ++i) {
    counts.intersection += bits_a[i] & bits_b[i];
    counts.union_ += bits_a[i] | bits_b[i];
  }
  return counts;
}

double box_iou(const BoundingBox& a, const BoundingBox& b) {
  if (!a.canonical() || !b.canonical()) {
    fail(ErrorCode::InvalidArgument, "box_iou requires canonical boxes");
  }
  if (a.area() <= 0.0 && b.area() <= 0.0) {
    fail(ErrorCode::DegenerateBoxes, "both boxes have zero area");
  }
  const double iw = std::max(0.0, std::min(a.xr, b.xr) - std::max(a.xl, b.xl));
  const double ih = std::max(0.0, std::min(a.yb, b.yb) - std::max(a.yt, b.yt));
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  const auto counts = mask_overlap(a, b);
  if (counts.union_ == 0) fail(ErrorCode::BothEmpty, "both masks are empty");
  return static_cast<double>(counts.intersection) / static_cast<double>(counts.union_);
}

BinaryMask mask_boundary(const BinaryMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  BinaryMask boundary(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      const bool edge = x == 0 || y == 0 || x == w - 1 || y == h - 1;
      if (edge || !mask.at(x - 1, y) || !mask.at(x + 1, y) || !mask.at(x, y - 1) ||
          !mask.at(x, y + 1)) {
        boundary.set(x, y);
      }
    }
  }
  return boundary;
}

int default_boundary_tolerance(int width, int height) {
  const double diagonal = std::hypot(static_cast<double>(width), static_cast<double>(height));
  return static_cast<int>(std::ceil(0.008 * diagonal));
}

namespace {

// Square (Chebyshev) dilation as two separable sliding-window passes.
BinaryMask dilate(const BinaryMask& mask, int radius) {
  if (radius <= 0) return mask;
  const int w = mask.width();
  const int h = mask.height();
  std::vector<std::uint8_t> rows(mask.size());
  std::vector<int> prefix(static_cast<std::size_t>(std::max(w, h)) + 1);
  for (int y = 0; y < h; ++y) {
    prefix[0] = 0;
    for (int x = 0; x < w; ++x) prefix[x + 1] = prefix[x] + (mask.at(x, y) ? 1 : 0);
    for (int x = 0; x < w; ++x) {
      const int lo = std::max(0, x - radius);
      const int hi = std::min(w, x + radius + 1);
      rows[static_cast<std::size_t>(y) * w + x] = prefix[hi] - prefix[lo] > 0 ? 1 : 0;
    }
  }
  std::vector<std::uint8_t> out(mask.size());
  for (int x = 0; x < w; ++x) {
    prefix[0] = 0;
    for (int y = 0; y < h; ++y) prefix[y + 1] = prefix[y] + rows[static_cast<std::size_t>(y) * w + x];
    for (int y = 0; y < h; ++y) {
      const int lo = std::max(0, y - radius);
      const int hi = std::min(h, y + radius + 1);
      out[static_cast<std::size_t>(y) * w + x] = prefix[hi] - prefix[lo] > 0 ? 1 : 0;
    }
  }
  return BinaryMask(w, h, std::move(out));
}

}  // namespace

double boundary_f(const BinaryMask& prediction, const BinaryMask& reference, int tolerance) {
  if (prediction.width() != reference.width() || prediction.height() != reference.height()) {
    fail(ErrorCode::DimensionMismatch, "boundary_f requires equal mask sizes");
  }
  if (tolerance < 0) fail(ErrorCode::InvalidArgument, "boundary tolerance must be >= 0");
  const auto pred_boundary = mask_boundary(prediction);
  const auto ref_boundary = mask_boundary(reference);
  const auto n_pred = pred_boundary.count();
  const auto n_ref = ref_boundary.count();
  if (n_pred == 0 && n_ref == 0) return 1.0;
  if (n_pred == 0 || n_ref == 0) return 0.0;

  const auto matched_pred = mask_overlap(pred_boundary, dilate(ref_boundary, tolerance));
  const auto matched_ref = mask_overlap(ref_boundary, dilate(pred_boundary, tolerance));
  const double precision =
      static_cast<double>(matched_pred.intersection) / static_cast<double>(n_pred);
  const double recall = static_cast<double>(matched_ref.intersection) / static_cast<double>(n_ref);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double ciou(std::span<const MaskPair> pairs) {
  if (pairs.empty()) fail(ErrorCode::EmptyDataset, "ciou over an empty dataset");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (const auto& [pred, ref] : pairs) {
    const auto counts = mask_overlap(pred, ref);
    inter += counts.intersection;
    uni += counts.union_;
  }
  if (uni == 0) fail(ErrorCode::BothEmpty, "every mask in the dataset is empty");
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double miou_video(const FrameBoxes& prediction, const FrameBoxes& reference,
                  FrameAveraging averaging) {
  if (reference.empty()) fail(ErrorCode::EmptyReference, "no annotated reference frames");
  std::set<std::int64_t> frames;
  for (const auto& [frame, box] : reference) frames.insert(frame);
  if (averaging == FrameAveraging::AllFrames) {
    for (const auto& [frame, box] : prediction) frames.insert(frame);
  }
  double total = 0.0;
  for (auto frame : frames) {
    const auto pred = prediction.find(frame);
    const auto ref = reference.find(frame);
    if (pred == prediction.end() || ref == reference.end()) continue;
    total += box_iou(pred->second, ref->second);
  }
  return total / static_cast<double>(frames.size());
}

double temporal_iou(const TemporalSpan& a, const TemporalSpan& b) {
  if (!a.valid() || !b.valid()) fail(ErrorCode::InvalidSpan, "temporal_iou requires valid spans");
  const std::int64_t inter = std::max<std::int64_t>(0, std::min(a.fe, b.fe) - std::max(a.fs, b.fs) + 1);
  const std::int64_t uni = a.length() + b.length() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double accuracy_at(std::span<const BoxPair> pairs, double threshold) {
  if (pairs.empty()) fail(ErrorCode::EmptyDataset, "accuracy over an empty dataset");
  if (!(threshold > 0.0 && threshold < 1.0)) {
    fail(ErrorCode::InvalidArgument, "accuracy threshold must lie in (0, 1)");
  }
  std::size_t hits = 0;
  for (const auto& [pred, ref] : pairs) {
    if (box_iou(pred, ref) >= threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

JandF j_and_f(std::span<const MaskSequence> sequences, int tolerance) {
  if (sequences.empty()) fail(ErrorCode::EmptyDataset, "J&F over no sequences");
  JandF total;
  for (const auto& sequence : sequences) {
    if (sequence.empty()) fail(ErrorCode::EmptyDataset, "J&F sequence without frames");
    double j = 0.0;
    double f = 0.0;
    for (const auto& [pred, ref] : sequence) {
      const auto counts = mask_overlap(pred, ref);
      j += counts.union_ == 0 ? 1.0
                              : static_cast<double>(counts.intersection) /
                                    static_cast<double>(counts.union_);
      const int tol =
          tolerance >= 0 ? tolerance : default_boundary_tolerance(ref.width(), ref.height());
      f += boundary_f(pred, ref, tol);
    }
    total.j += j / static_cast<double>(sequence.size());
    total.f += f / static_cast<double>(sequence.size());
  }
  total.j /= static_cast<double>(sequences.size());
  total.f /= static_cast<double>(sequences.size());
  return total;
}

}  // namespace visor
