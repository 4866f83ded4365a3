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

// Backend module registry, simulated specialists and envelope routing.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "visor/embedding.hpp"
#include "visor/geometry.hpp"
#include "visor/protocol.hpp"
#include "visor/region_encoder.hpp"
#include "visor/signal_bus.hpp"

namespace visor {

enum class Modality { Text, Image, Video, BBox, Mask, Region };

std::string_view modality_name(Modality m);

struct ModuleSpec {
  std::string name;                  // display name, e.g. "Video Generation"
  std::string variant;               // "text-to-video", "image-to-video" or empty
  std::optional<ModuleName> module;  // empty for plain text generation
  std::set<Modality> required_inputs;
  std::set<Modality> optional_inputs;
  std::set<Modality> outputs;
  bool requires_region = false;
  bool accepts_embedding = false;

  std::string key() const { return variant.empty() ? name : name + " (" + variant + ")"; }
};

class Registry {
 public:
  explicit Registry(std::vector<ModuleSpec> specs);

  const std::vector<ModuleSpec>& specs() const { return specs_; }
  std::size_t size() const { return specs_.size(); }

  /// First spec with this display name, or null.
  const ModuleSpec* find(std::string_view name) const;
  /// Spec by display name and variant, or null.
  const ModuleSpec* find(std::string_view name, std::string_view variant) const;

 private:
  std::vector<ModuleSpec> specs_;
};

/// The eight backend rows: text generation, image generation/segmentation/
/// editing, text- and image-to-video generation, video segmentation/editing.
Registry build_registry();

// ---------------------------------------------------------------------------
// Workspace

/// Ground truth for a segmentation fixture. Every grid feature is
/// inside * direction + clutter with clutter orthogonal to direction, and the
/// query projection maps the oracle embedding onto direction, so the oracle
/// query reproduces `truth` exactly at threshold 0.5.
struct SegmentationScene {
  BinaryMask truth;
  FeatureGrid grid;
  Projection query;          // embedding -> grid feature space
  Eigen::VectorXd direction;  // unit vector in grid feature space

  static SegmentationScene make(const BinaryMask& truth, const Eigen::VectorXd& oracle_embedding,
                                int feature_dim, std::uint64_t seed);
};

struct Asset {
  std::string handle;
  Modality kind = Modality::Image;
  int width = 0;
  int height = 0;
  std::int64_t frames = 0;  // videos only
  std::map<std::string, std::string> metadata;
  std::optional<BinaryMask> mask;
  std::optional<BoundingBox> box;
  bool corrupt = false;  // specialists refuse corrupt inputs
};

/// Per-turn annotations known to the harness but never to the router.
struct TurnFixture {
  Eigen::VectorXd target;  // oracle signal embedding, concatenated
  std::optional<SegmentationScene> scene;
};

/// Content-addressed asset store for one conversation.
class Workspace {
 public:
  /// Adds the asset (its handle is derived from the content) and returns the
  /// handle. Re-adding identical content yields the same handle.
  std::string attach(Asset asset);
  std::string attach_image(int width, int height, std::string_view tag);
  std::string attach_video(int width, int height, std::int64_t frames, std::string_view tag);
  std::string attach_mask(const BinaryMask& mask);

  bool contains(std::string_view handle) const;
  const Asset& get(std::string_view handle) const;
  bool has(Modality kind) const;
  /// Most recently attached asset of this kind.
  const Asset* latest(Modality kind) const;
  const std::vector<std::string>& order() const { return order_; }

  int turn() const { return turn_; }
  void set_turn(int turn) { turn_ = turn; }

  std::optional<TurnFixture> fixture;

 private:
  std::map<std::string, Asset, std::less<>> assets_;
  std::vector<std::string> order_;
  int turn_ = 0;
};

std::string content_handle(const Asset& asset);

// ---------------------------------------------------------------------------
// Routing

enum class ExecutionStatus { Success, RoutingFailure, ValidationFailure, SpecialistFailure };

std::string_view execution_status_name(ExecutionStatus s);

struct ExecutionResult {
  ExecutionStatus status = ExecutionStatus::Success;
  std::string module;  // resolved spec key, empty for text-only turns
  std::vector<Asset> produced;
  std::string diagnostics;
  std::optional<double> proxy_score;

  std::vector<std::string> handles() const;
  std::string to_json() const;
};

enum class MessageMode { Hybrid, TextOnly, EmbeddingOnly };

std::string_view message_mode_name(MessageMode m);
MessageMode parse_message_mode(std::string_view name);

/// Nearest-centroid module classifier over concatenated embeddings.
struct CentroidClassifier {
  std::vector<ModuleName> modules;
  std::vector<Eigen::VectorXd> centroids;

  static CentroidClassifier seeded(int dim, std::uint64_t seed);
  ModuleName classify(const Eigen::VectorXd& v) const;
};

struct RouteOptions {
  MessageMode mode = MessageMode::Hybrid;
  bool embedding_required = false;
  std::optional<CentroidClassifier> fallback;  // used when the module text is absent
};

/// Pure function of its inputs; the caller commits produced assets.
/// TextOnly drops the embedding. EmbeddingOnly drops the module name and the
/// instruction and picks the module with the fallback classifier.
ExecutionResult route(const InvocationEnvelope& envelope, const Workspace& ws,
                      const Registry& registry, const RouteOptions& options = {});

/// Records route's outputs into the workspace and advances the turn.
void commit(Workspace& ws, const ExecutionResult& result);

/// Stand-in specialist for a validated request. Throws SpecialistFailure on
/// corrupt inputs.
ExecutionResult simulate_specialist(const ModuleSpec& spec, const Workspace& ws,
                                    const std::string& instruction,
                                    const std::optional<BoundingBox>& region,
                                    const std::optional<SignalEmbedding>& embedding);

/// 0.5 * [instruction present] + 0.5 * max(0, cos(embedding, target)).
double generation_proxy(const std::string& instruction,
                        const std::optional<SignalEmbedding>& embedding,
                        const std::optional<Eigen::VectorXd>& target);

// ---------------------------------------------------------------------------
// Message-passing ablation

struct ScriptedTurn {
  std::string raw_response;  // canonical envelope text
  std::optional<SignalEmbedding> embedding;
  Workspace workspace;
  std::string expected_module;  // spec key, empty for text turns
};

struct TurnRecord {
  int turn = 0;
  std::string raw_response;
  MessageMode mode = MessageMode::Hybrid;
  ExecutionResult result;
};

struct AblationReport {
  MessageMode mode = MessageMode::Hybrid;
  double success_rate = 0.0;
  double mean_proxy = 0.0;  // over task turns, failures count as 0
  std::size_t n = 0;
  std::vector<TurnRecord> records;
};

AblationReport msgpass_ablation(const std::vector<ScriptedTurn>& corpus, MessageMode mode,
                                const Registry& registry, const CentroidClassifier& fallback,
                                bool embedding_required = false);

std::string transcript_jsonl(const AblationReport& report);
std::string ablation_csv(const std::vector<AblationReport>& reports);

}  // namespace visor
