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

// Text wire format between the decision model and the backend dispatcher.
//
// An invocation response is free user-facing text plus up to one task made of
// tag blocks:
//
//   Sure! Following I will outline the clock in the video.
//   <Module> Video Segmentation </Module>
//   <Instruction> segmentation: clock </Instruction>
//   <Region> (0.1100, 0.2600, 0.2300, 0.3500) </Region>
//
// Grounding answers use "(Xl, Yt, Xr, Yb)" with normalized corners and, for
// video, "(Xl, Yt, Xr, Yb | Fs, Fe)" with an inclusive frame span.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "visor/embedding.hpp"

namespace visor {

inline constexpr int kDefaultPrecision = 4;

struct BoundingBox {
  double xl = 0.0;
  double yt = 0.0;
  double xr = 0.0;
  double yb = 0.0;

  double width() const { return xr - xl; }
  double height() const { return yb - yt; }
  double area() const { return width() * height(); }
  bool in_unit_range() const;
  bool canonical() const { return in_unit_range() && xl <= xr && yt <= yb; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Sorts the x pair and the y pair so that (xl, yt) is the top-left corner.
BoundingBox canonicalize(const BoundingBox& box);

/// Rounds every coordinate to `precision` decimals (the serialized value).
BoundingBox quantize(const BoundingBox& box, int precision = kDefaultPrecision);

struct TemporalSpan {
  std::int64_t fs = 0;
  std::int64_t fe = 0;

  std::int64_t length() const { return fe - fs + 1; }
  bool valid() const { return fs >= 0 && fs <= fe; }

  friend bool operator==(const TemporalSpan&, const TemporalSpan&) = default;
};

struct TrackedRegion {
  BoundingBox box;
  TemporalSpan span;

  friend bool operator==(const TrackedRegion&, const TrackedRegion&) = default;
};

using Region = std::variant<BoundingBox, TrackedRegion>;

struct GroundedPhrase {
  std::string label;
  Region region;

  friend bool operator==(const GroundedPhrase&, const GroundedPhrase&) = default;
};

enum class ModuleName {
  ImageGeneration,
  ImageSegmentation,
  ImageEditing,
  VideoGeneration,
  VideoSegmentation,
  VideoEditing,
};

inline constexpr ModuleName kAllModules[] = {
    ModuleName::ImageGeneration,   ModuleName::ImageSegmentation, ModuleName::ImageEditing,
    ModuleName::VideoGeneration,   ModuleName::VideoSegmentation, ModuleName::VideoEditing,
};

std::string_view module_display_name(ModuleName name) noexcept;
/// Case- and whitespace-insensitive lookup ("video  segmentation" matches).
std::optional<ModuleName> lookup_module(std::string_view text) noexcept;

struct Task {
  ModuleName module = ModuleName::ImageGeneration;
  std::string instruction;
  std::optional<BoundingBox> region;

  friend bool operator==(const Task&, const Task&) = default;
};

/// One decision-model output. The signal embedding travels out of band next
/// to the text; it is never part of the serialized form.
struct InvocationEnvelope {
  std::string user_response;
  std::optional<Task> task;
  std::optional<SignalEmbedding> embedding;

  friend bool operator==(const InvocationEnvelope&, const InvocationEnvelope&) = default;
};

enum class ParseMode { Strict, Lenient };

enum class GroundingKind { Image, Video };

InvocationEnvelope parse_envelope(std::string_view raw, ParseMode mode = ParseMode::Lenient);
std::string serialize_envelope(const InvocationEnvelope& envelope,
                               int precision = kDefaultPrecision);

/// Empty when the envelope can be serialized and re-parsed to itself,
/// otherwise a description of the first violated precondition.
std::optional<std::string> envelope_violation(const InvocationEnvelope& envelope);

struct GroundedCaption {
  std::string caption;
  std::vector<GroundedPhrase> phrases;

  friend bool operator==(const GroundedCaption&, const GroundedCaption&) = default;
};

/// First line is the caption; each following non-blank line is
/// "label: (Xl, Yt, Xr, Yb)" or, for video, "label: (... | Fs, Fe)".
/// A trailing comma on a phrase line is tolerated.
GroundedCaption parse_grounded_caption(std::string_view raw, GroundingKind kind,
                                       ParseMode mode = ParseMode::Lenient);
std::string serialize_grounded_caption(const GroundedCaption& caption,
                                       int precision = kDefaultPrecision);

BoundingBox parse_box(std::string_view raw, ParseMode mode = ParseMode::Lenient);
TrackedRegion parse_tracking_answer(std::string_view raw, ParseMode mode = ParseMode::Lenient);

/// Answer of a grounded QA prompt: every coordinate group in order of
/// appearance, then the choice named by the closing "the answer is N) text".
struct GroundedAnswer {
  std::vector<Region> regions;
  int option_index = 0;
  std::string option_text;
};

GroundedAnswer parse_grounded_answer(std::string_view raw, GroundingKind kind,
                                     ParseMode mode = ParseMode::Lenient);

std::string format_coordinate(double value, int precision = kDefaultPrecision);
std::string format_box(const BoundingBox& box, int precision = kDefaultPrecision);
std::string format_tracked(const TrackedRegion& region, int precision = kDefaultPrecision);
std::string format_region(const Region& region, int precision = kDefaultPrecision);

/// Escapes '\\', '(' and ':' so a label survives the phrase-line delimiter.
std::string escape_label(std::string_view label);

}  // namespace visor
