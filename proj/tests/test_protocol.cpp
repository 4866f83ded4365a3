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

#include "generators.hpp"
#include "visor/error.hpp"
#include "visor/protocol.hpp"

using namespace visor;

namespace {

constexpr std::string_view kClock =
    "Sure, I will track the clock you circled.\n"
    "<Module> Video Segmentation </Module>\n"
    "<Instruction> segmentation: clock </Instruction>\n"
    "<Region> (0.23, 0.35, 0.11, 0.26) </Region>";

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Ok;
}

}  // namespace

TEST_CASE("clock example") {
  const auto env = parse_envelope(kClock, ParseMode::Lenient);
  REQUIRE(env.task);
  CHECK(module_display_name(env.task->module) == "Video Segmentation");
  CHECK(env.task->instruction == "segmentation: clock");
  REQUIRE(env.task->region);
  CHECK(*env.task->region == BoundingBox{0.11, 0.26, 0.23, 0.35});
  CHECK(env.user_response == "Sure, I will track the clock you circled.");
  CHECK(code_of([] { parse_envelope(kClock, ParseMode::Strict); }) == ErrorCode::NonCanonicalBox);
  CHECK(serialize_envelope(env) ==
        "Sure, I will track the clock you circled.\n<Module> Video Segmentation </Module>\n"
        "<Instruction> segmentation: clock </Instruction>\n<Region> (0.1100, 0.2600, 0.2300, 0.3500) </Region>");
}

TEST_CASE("envelopes round-trip through strict parsing") {
  Rng rng(21);
  for (int i = 0; i < 2000; ++i) {
    const auto env = gen::envelope(rng);
    REQUIRE_FALSE(envelope_violation(env));
    const auto text = serialize_envelope(env);
    const auto back = parse_envelope(text, ParseMode::Strict);
    CHECK(back == env);
    CHECK(serialize_envelope(back) == text);
  }
}

TEST_CASE("grounded captions round-trip") {
  Rng rng(22);
  for (int i = 0; i < 2000; ++i) {
    const auto kind = i % 2 ? GroundingKind::Image : GroundingKind::Video;
    const auto cap = gen::caption(rng, kind);
    const auto text = serialize_grounded_caption(cap);
    const auto back = parse_grounded_caption(text, kind, ParseMode::Strict);
    CHECK(back == cap);
    CHECK(serialize_grounded_caption(back) == text);
  }
}

TEST_CASE("envelope structure errors") {
  CHECK(code_of([] { parse_envelope("<Module> Image Generation"); }) == ErrorCode::UnbalancedTags);
  CHECK(code_of([] { parse_envelope("</Module>"); }) == ErrorCode::UnbalancedTags);
  CHECK(code_of([] { parse_envelope("<Module> <Instruction> x </Instruction> </Module>"); }) ==
        ErrorCode::UnbalancedTags);
  CHECK(code_of([] { parse_envelope("<Module> Audio Generation </Module><Instruction> x </Instruction>"); }) ==
        ErrorCode::UnknownModule);
  CHECK(code_of([] {
          parse_envelope("<Module> Image Generation </Module><Module> Image Editing </Module>");
        }) == ErrorCode::DuplicateBlock);
  CHECK(code_of([] { parse_envelope("<Module> Image Generation </Module>"); }) == ErrorCode::IncompleteTask);
  CHECK(code_of([] { parse_envelope("hi <Instruction> x </Instruction>"); }) == ErrorCode::IncompleteTask);
  CHECK(code_of([] {
          parse_envelope("<Module> Image Editing </Module><Instruction> x </Instruction><Region> (1, 2) </Region>");
        }) == ErrorCode::MalformedRegion);
  CHECK(code_of([] {
          parse_envelope(
              "<Module> Image Editing </Module><Instruction> x </Instruction><Region> (0.1, 0.2, 1.3, 0.4) </Region>");
        }) == ErrorCode::MalformedRegion);
}

TEST_CASE("plain text has no task") {
  const auto env = parse_envelope("  Just chatting.\n");
  CHECK(env.user_response == "Just chatting.");
  CHECK_FALSE(env.task);
  CHECK(serialize_envelope(env) == "Just chatting.");
}

TEST_CASE("module names are matched case- and space-insensitively") {
  CHECK(lookup_module("video   segmentation") == ModuleName::VideoSegmentation);
  CHECK(lookup_module(" IMAGE EDITING ") == ModuleName::ImageEditing);
  CHECK_FALSE(lookup_module("Image"));
}

TEST_CASE("envelope violations") {
  InvocationEnvelope env{" padded", std::nullopt, std::nullopt};
  CHECK(envelope_violation(env));
  env.user_response = "has <Module> tag";
  CHECK(envelope_violation(env));
  env.user_response = "ok";
  env.task = Task{ModuleName::ImageEditing, "x", BoundingBox{0.12345, 0, 1, 1}};
  CHECK(envelope_violation(env));
  env.task->region = BoundingBox{0.5, 0, 0.1, 1};
  CHECK(envelope_violation(env));
  env.task->region = BoundingBox{0.1, 0, 0.5, 1};
  CHECK_FALSE(envelope_violation(env));
}

TEST_CASE("grounding line errors") {
  CHECK(code_of([] { parse_grounded_caption("cap\ndog (0.1, 0.1, 0.2, 0.2)", GroundingKind::Image); }) ==
        ErrorCode::MalformedPhraseLine);
  CHECK(code_of([] { parse_grounded_caption("cap\ndog: (0.1, 0.1, 0.2, 0.2)", GroundingKind::Video); }) ==
        ErrorCode::MissingSpan);
  CHECK(code_of([] { parse_grounded_caption("cap\ndog: (0.1, 0.1, 0.2, 0.2 | 1, 4)", GroundingKind::Image); }) ==
        ErrorCode::SpanOnImage);
  CHECK(code_of([] { parse_grounded_caption("cap\ndog: (0.1, 0.1, 0.2, 0.2 | 9, 4)", GroundingKind::Video); }) ==
        ErrorCode::InvalidSpan);
  CHECK(code_of([] { parse_tracking_answer("(0.1, 0.1, 0.2, 0.2 | a, 4)"); }) == ErrorCode::MalformedRegion);
}

TEST_CASE("phrase lines tolerate trailing commas and escaped labels") {
  const auto cap = parse_grounded_caption("A cat.\ncat: (0.1, 0.2, 0.3, 0.4),\na\\:b: (0, 0, 1, 1)", GroundingKind::Image);
  REQUIRE(cap.phrases.size() == 2);
  CHECK(cap.caption == "A cat.");
  CHECK(cap.phrases[1].label == "a:b");
  CHECK(escape_label("l(e)f:t\\") == "l\\(e)f\\:t\\\\");
}

TEST_CASE("box and track parsing") {
  CHECK(parse_box("(0.5, 0.5, 0.25, 0.75)") == BoundingBox{0.25, 0.5, 0.5, 0.75});
  CHECK(code_of([] { parse_box("(0.5, 0.5, 0.25, 0.75)", ParseMode::Strict); }) == ErrorCode::NonCanonicalBox);
  const auto t = parse_tracking_answer("(0.1, 0.2, 0.3, 0.4 | 3, 17)", ParseMode::Strict);
  CHECK(t.span == TemporalSpan{3, 17});
  CHECK(format_tracked(t) == "(0.1000, 0.2000, 0.3000, 0.4000 | 3, 17)");
  CHECK(format_coordinate(1.0) == "1.0000");
  CHECK(quantize(BoundingBox{0.123456, 0, 1, 1}).xl == 0.1235);
}

TEST_CASE("grounded answers") {
  const auto a = parse_grounded_answer(
      "The target object mentioned in the question is \"dog,\" with the position given by (0.1000, 0.2000, "
      "0.3000, 0.4000). Therefore, the answer is 2) brown.",
      GroundingKind::Image, ParseMode::Strict);
  REQUIRE(a.regions.size() == 1);
  CHECK(a.option_index == 2);
  CHECK(a.option_text == "brown");
  CHECK(code_of([] { parse_grounded_answer("no clause (0.1, 0.1, 0.2, 0.2)", GroundingKind::Image); }) ==
        ErrorCode::MalformedAnswer);
  CHECK(code_of([] { parse_grounded_answer("the answer is two", GroundingKind::Image); }) ==
        ErrorCode::MalformedAnswer);
  const auto v = parse_grounded_answer("The objects are the dog (0.1, 0.1, 0.2, 0.2 | 0, 5) and the cat (0, 0, 1, 1 | 2, 3). "
                                       "Therefore, the answer is 1) running.",
                                       GroundingKind::Video);
  CHECK(v.regions.size() == 2);
}
