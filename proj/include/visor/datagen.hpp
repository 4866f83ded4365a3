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

// Template-based instruction-tuning data: invocation samples per backend
// function and prompt/target pairs for the six grounding tasks.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "visor/dispatch.hpp"
#include "visor/protocol.hpp"
#include "visor/rng.hpp"

namespace visor {

inline constexpr std::string_view kInstructionSchema = "visor.instruction.v1";

/// One row of the invocation data table.
struct FunctionRow {
  std::string id;        // stable key, e.g. "image_segmentation_sketch"
  std::string function;  // display name of the backend function
  ModuleName module;
  std::vector<std::string> system_input;  // what the user hands the system
  std::vector<std::string> module_input;  // what the backend module receives
  std::string data_source;
  int paper_count;
};

const std::vector<FunctionRow>& function_table();
const FunctionRow* find_function(std::string_view id);

enum class GroundingTask {
  GroundedImageCaptioning,
  ReferringImageSegmentation,
  GroundedVideoCaptioning,
  ReferringVideoTracking,
  GroundedImageQA,
  GroundedVideoQA,
};

inline constexpr GroundingTask kAllGroundingTasks[] = {
    GroundingTask::GroundedImageCaptioning, GroundingTask::ReferringImageSegmentation,
    GroundingTask::GroundedVideoCaptioning, GroundingTask::ReferringVideoTracking,
    GroundingTask::GroundedImageQA,         GroundingTask::GroundedVideoQA};

std::string_view grounding_task_name(GroundingTask task);
/// Throws UnsupportedTask for unknown names.
GroundingTask parse_grounding_task(std::string_view name);
GroundingKind grounding_kind(GroundingTask task);

struct SceneObject {
  std::string label;
  BoundingBox box;
  TemporalSpan span;  // ignored for image scenes
};

/// Synthetic annotation a grounding prompt is rendered from.
struct GroundingScene {
  std::string caption;
  std::vector<SceneObject> objects;  // objects[0] is the referred / asked-about one
  std::string query;                 // referring expression
  std::string question;
  std::vector<std::string> options;
  int answer = 1;  // 1-based index into options
  std::int64_t frames = 0;
};

GroundingScene make_scene(GroundingTask task, Rng& rng, int precision = kDefaultPrecision);

struct RenderedPrompt {
  std::string prompt;
  std::string target;
};

RenderedPrompt render_grounding_prompt(GroundingTask task, const GroundingScene& scene,
                                       int precision = kDefaultPrecision);

struct Annotations {
  std::vector<std::pair<std::string, Region>> regions;  // label, region
  std::optional<int> answer;
};

struct InstructionSample {
  std::string sample_id;
  std::string function;  // function row id or grounding task name
  bool grounding = false;
  std::vector<std::string> system_input;
  std::vector<std::string> module_input;
  std::string prompt;
  std::string target;
  Annotations annotations;

  std::string to_json() const;
};

struct GenConfig {
  std::map<std::string, int> function_counts;
  std::map<std::string, int> grounding_counts;
  std::uint64_t seed = 7;
  int precision = kDefaultPrecision;

  /// Every function at its paper amount, no grounding samples.
  static GenConfig paper_scale();
  /// Small counts for every function and grounding task.
  static GenConfig desk_scale(int per_function = 20);
  std::size_t total() const;
};

/// Samples in table order, then grounding tasks in declaration order. Each
/// function draws from its own sub-seed.
std::vector<InstructionSample> generate_samples(const GenConfig& cfg);

/// Samples of one function row id or grounding task name.
std::vector<InstructionSample> generate_function(const GenConfig& cfg, std::string_view id);

/// Strict-parses the target and compares it with the annotations; returns
/// a description of the first mismatch.
std::optional<std::string> validate_sample(const InstructionSample& sample, int precision = kDefaultPrecision);

std::string samples_jsonl(const std::vector<InstructionSample>& samples);

// ---------------------------------------------------------------------------
// Scripted turns for the message-passing ablation

struct TurnCorpusConfig {
  int turns = 1000;
  int task_specific_dim = 8;
  int task_invariant_dim = 8;
  int mask_size = 32;
  int scene_feature_dim = 8;
  double embedding_noise = 0.35;  // per-coordinate spread of oracle embeddings around their module centroid
  double text_turn_fraction = 0.1;
  std::uint64_t seed = 11;
};

/// Classifier the corpus embeddings are drawn around.
CentroidClassifier corpus_classifier(const TurnCorpusConfig& cfg);

std::vector<ScriptedTurn> make_turn_corpus(const TurnCorpusConfig& cfg);

}  // namespace visor
