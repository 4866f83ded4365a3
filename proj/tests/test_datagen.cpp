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

#include <set>

#include "golden_counts.hpp"
#include "visor/datagen.hpp"
#include "visor/error.hpp"

using namespace visor;

TEST_CASE("function table matches the published counts") {
  CHECK(function_table().size() == golden::kFunctionCounts.size());
  int total = 0;
  for (const auto& row : function_table()) {
    REQUIRE(golden::kFunctionCounts.count(row.id));
    CHECK(row.paper_count == golden::kFunctionCounts.at(row.id));
    total += row.paper_count;
  }
  CHECK(total == golden::kTotal);
  CHECK(GenConfig::paper_scale().total() == golden::kTotal);
  CHECK(find_function("video_editing_text")->module == ModuleName::VideoEditing);
  CHECK_FALSE(find_function("nope"));
}

TEST_CASE("desk-scale samples are valid, unique and ordered") {
  const auto cfg = GenConfig::desk_scale(15);
  const auto samples = generate_samples(cfg);
  CHECK(samples.size() == cfg.total());
  CHECK(samples.size() == 15 * 18);
  std::set<std::string> ids;
  for (const auto& s : samples) {
    CHECK(ids.insert(s.sample_id).second);
    const auto bad = validate_sample(s);
    CHECK_MESSAGE(!bad, s.function << ": " << bad.value_or(""));
  }
  CHECK(samples.front().function == "image_generation");
  CHECK(samples.back().grounding);
}

TEST_CASE("generation is byte-deterministic and per-function seeded") {
  auto cfg = GenConfig::desk_scale(5);
  const auto a = samples_jsonl(generate_samples(cfg));
  CHECK(a == samples_jsonl(generate_samples(cfg)));
  auto more = cfg;
  more.function_counts["image_generation"] = 9;
  const auto x = generate_function(cfg, "video_editing_text");
  const auto y = generate_function(more, "video_editing_text");
  CHECK(samples_jsonl(x) == samples_jsonl(y));
  auto other = cfg;
  other.seed = 8;
  CHECK(samples_jsonl(generate_samples(other)) != a);
}

TEST_CASE("every grounding task renders parseable targets") {
  Rng rng(51);
  for (GroundingTask t : kAllGroundingTasks) {
    CAPTURE(grounding_task_name(t));
    CHECK(parse_grounding_task(grounding_task_name(t)) == t);
    for (int i = 0; i < 20; ++i) {
      const auto scene = make_scene(t, rng);
      const auto p = render_grounding_prompt(t, scene);
      CHECK_FALSE(p.prompt.empty());
      CHECK_FALSE(p.target.empty());
    }
  }
  CHECK_THROWS_AS(parse_grounding_task("captioning"), Error);
}

TEST_CASE("validate_sample detects a tampered target") {
  auto cfg = GenConfig::desk_scale(0);
  cfg.function_counts["image_editing_box"] = 1;
  auto s = generate_samples(cfg).at(0);
  CHECK_FALSE(validate_sample(s));
  s.target += " <Module>";
  CHECK(validate_sample(s));
}

TEST_CASE("jsonl records carry the schema") {
  auto cfg = GenConfig::desk_scale(1);
  const auto samples = generate_samples(cfg);
  const auto line = samples.front().to_json();
  CHECK(line.find("visor.instruction.v1") != std::string::npos);
  CHECK(line.find('\n') == std::string::npos);
  CHECK(samples_jsonl({}).empty());
}

TEST_CASE("negative counts are rejected") {
  auto cfg = GenConfig::desk_scale(1);
  cfg.function_counts["image_generation"] = -1;
  CHECK_THROWS_AS(generate_samples(cfg), Error);
}

TEST_CASE("turn corpus is deterministic with the requested size") {
  TurnCorpusConfig cfg;
  cfg.turns = 50;
  const auto a = make_turn_corpus(cfg);
  const auto b = make_turn_corpus(cfg);
  REQUIRE(a.size() == 50);
  int text = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].raw_response == b[i].raw_response);
    CHECK(a[i].embedding == b[i].embedding);
    if (a[i].expected_module.empty()) ++text;
  }
  CHECK(text < 50);
}
