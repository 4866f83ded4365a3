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

#include "visor/datagen.hpp"
#include "visor/dispatch.hpp"
#include "visor/error.hpp"

using namespace visor;

namespace {

InvocationEnvelope task(ModuleName m, std::string instruction, std::optional<BoundingBox> region = {}) {
  InvocationEnvelope env;
  env.user_response = "ok";
  env.task = Task{m, std::move(instruction), region};
  return env;
}

BinaryMask square(int n, int lo, int hi) {
  BinaryMask m(n, n);
  for (int y = lo; y < hi; ++y) {
    for (int x = lo; x < hi; ++x) m.set(x, y);
  }
  return m;
}

}  // namespace

TEST_CASE("registry lists the eight backend rows") {
  const auto reg = build_registry();
  CHECK(reg.size() == 8);
  REQUIRE(reg.find("Video Generation", "image-to-video"));
  CHECK(reg.find("Video Generation", "image-to-video")->required_inputs.count(Modality::Image));
  CHECK(reg.find("Image Segmentation")->outputs.count(Modality::Mask));
  CHECK(reg.find("Image Editing")->requires_region);
  CHECK_FALSE(reg.find("Audio"));
  CHECK_THROWS_AS(Registry({{"A", "", std::nullopt, {}, {}, {}, false, false},
                            {"A", "", std::nullopt, {}, {}, {}, false, false}}),
                  Error);
}

TEST_CASE("text turns need no module") {
  Workspace ws;
  const auto r = route(InvocationEnvelope{"hello", std::nullopt, std::nullopt}, ws, build_registry());
  CHECK(r.status == ExecutionStatus::Success);
  CHECK(r.module.empty());
  CHECK(r.produced.empty());
}

TEST_CASE("image segmentation with a region yields an image, a mask and a box") {
  Workspace ws;
  ws.attach_image(32, 32, "photo");
  const auto r = route(task(ModuleName::ImageSegmentation, "segmentation: dog", BoundingBox{0.25, 0.25, 0.5, 0.5}),
                       ws, build_registry());
  REQUIRE(r.status == ExecutionStatus::Success);
  REQUIRE(r.produced.size() == 3);
  CHECK(r.produced[1].mask->count() == 64);
  CHECK(*r.produced[2].box == BoundingBox{0.25, 0.25, 0.5, 0.5});
}

TEST_CASE("video generation picks its variant from the workspace") {
  const auto reg = build_registry();
  Workspace empty;
  CHECK(route(task(ModuleName::VideoGeneration, "a boat"), empty, reg).module == "Video Generation (text-to-video)");
  Workspace with_image;
  with_image.attach_image(16, 16, "still");
  CHECK(route(task(ModuleName::VideoGeneration, "animate"), with_image, reg).module ==
        "Video Generation (image-to-video)");
}

TEST_CASE("validation failures") {
  const auto reg = build_registry();
  Workspace ws;
  auto r = route(task(ModuleName::ImageEditing, "editing: recolor", BoundingBox{0, 0, 1, 1}), ws, reg);
  CHECK(r.status == ExecutionStatus::ValidationFailure);
  ws.attach_image(16, 16, "img");
  r = route(task(ModuleName::ImageEditing, "editing: recolor"), ws, reg);
  CHECK(r.status == ExecutionStatus::ValidationFailure);
  CHECK(r.diagnostics == "region required");
  ws.attach_mask(square(16, 2, 6));
  CHECK(route(task(ModuleName::ImageEditing, "editing: recolor"), ws, reg).status == ExecutionStatus::Success);

  RouteOptions strict;
  strict.embedding_required = true;
  r = route(task(ModuleName::ImageGeneration, "a cat"), ws, reg, strict);
  CHECK(r.status == ExecutionStatus::ValidationFailure);
  auto env = task(ModuleName::ImageGeneration, "a cat");
  env.embedding = SignalEmbedding{};
  CHECK(route(env, ws, reg).status == ExecutionStatus::ValidationFailure);
}

TEST_CASE("embedding-only routing needs an embedding") {
  RouteOptions opts;
  opts.mode = MessageMode::EmbeddingOnly;
  Workspace ws;
  CHECK(route(task(ModuleName::ImageGeneration, "a cat"), ws, build_registry(), opts).status ==
        ExecutionStatus::RoutingFailure);
}

TEST_CASE("corrupt inputs surface as specialist failures") {
  Workspace ws;
  Asset bad;
  bad.kind = Modality::Video;
  bad.width = 8;
  bad.height = 8;
  bad.frames = 4;
  bad.corrupt = true;
  ws.attach(bad);
  const auto r = route(task(ModuleName::VideoEditing, "editing: blur"), ws, build_registry());
  CHECK(r.status == ExecutionStatus::SpecialistFailure);
  CHECK(r.module == "Video Editing");
  CHECK(r.to_json().find("\"specialist_failure\"") != std::string::npos);
  const auto& spec = *build_registry().find("Video Editing");
  try {
    simulate_specialist(spec, ws, "x", std::nullopt, std::nullopt);
    FAIL("expected SpecialistFailure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SpecialistFailure);
  }
}

TEST_CASE("workspace handles are content addressed") {
  Workspace ws;
  const auto a = ws.attach_image(16, 16, "x");
  const auto b = ws.attach_image(16, 16, "x");
  const auto c = ws.attach_image(16, 16, "y");
  CHECK(a == b);
  CHECK(a != c);
  CHECK(ws.order().size() == 2);
  CHECK(ws.latest(Modality::Image)->handle == c);
  CHECK_FALSE(ws.has(Modality::Video));

  const auto reg = build_registry();
  const auto r = route(task(ModuleName::ImageEditing, "editing: sky", BoundingBox{0, 0, 0.5, 0.5}), ws, reg);
  REQUIRE(r.status == ExecutionStatus::Success);
  commit(ws, r);
  CHECK(ws.turn() == 1);
  CHECK(ws.contains(r.handles().front()));
  CHECK(route(task(ModuleName::ImageEditing, "editing: sky", BoundingBox{0, 0, 0.5, 0.5}), ws, reg).handles() !=
        r.handles());
}

TEST_CASE("generation proxy") {
  SignalEmbedding e{Eigen::VectorXd::Ones(2), Eigen::VectorXd::Zero(2)};
  Eigen::VectorXd target(4);
  target << 1, 1, 0, 0;
  CHECK(generation_proxy("x", e, target) == doctest::Approx(1.0));
  CHECK(generation_proxy("", e, target) == doctest::Approx(0.5));
  CHECK(generation_proxy("x", std::nullopt, target) == 0.5);
  CHECK(generation_proxy("x", e, Eigen::VectorXd(-target)) == 0.5);
}

TEST_CASE("message modes") {
  CHECK(parse_message_mode("text_only") == MessageMode::TextOnly);
  CHECK(message_mode_name(MessageMode::EmbeddingOnly) == "embedding_only");
  CHECK_THROWS_AS(parse_message_mode("both"), Error);
}

TEST_CASE("ablation on a small corpus keeps the qualitative ordering") {
  TurnCorpusConfig cfg;
  cfg.turns = 200;
  const auto corpus = make_turn_corpus(cfg);
  const auto reg = build_registry();
  const auto fallback = corpus_classifier(cfg);
  const auto hybrid = msgpass_ablation(corpus, MessageMode::Hybrid, reg, fallback);
  const auto text = msgpass_ablation(corpus, MessageMode::TextOnly, reg, fallback);
  const auto emb = msgpass_ablation(corpus, MessageMode::EmbeddingOnly, reg, fallback);
  CHECK(hybrid.success_rate == 1.0);
  CHECK(emb.success_rate < hybrid.success_rate);
  CHECK(text.mean_proxy < hybrid.mean_proxy);
  CHECK(hybrid.records.size() == 200);
  CHECK(ablation_csv({hybrid, text, emb}).rfind("mode,", 0) == 0);
  CHECK(transcript_jsonl(hybrid) == transcript_jsonl(msgpass_ablation(corpus, MessageMode::Hybrid, reg, fallback)));
}
