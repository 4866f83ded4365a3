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

#include "visor/dispatch.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "visor/error.hpp"
#include "visor/rng.hpp"

namespace visor {

std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::Text: return "Text";
    case Modality::Image: return "Image";
    case Modality::Video: return "Video";
    case Modality::BBox: return "BBox";
    case Modality::Mask: return "Mask";
    case Modality::Region: return "Region";
  }
  return "?";
}

Registry::Registry(std::vector<ModuleSpec> specs) : specs_(std::move(specs)) {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    for (std::size_t j = i + 1; j < specs_.size(); ++j) {
      if (specs_[i].key() == specs_[j].key()) {
        fail(ErrorCode::InvalidArgument, "duplicate module spec " + specs_[i].key());
      }
    }
    if (specs_[i].module && specs_[i].required_inputs.empty()) {
      fail(ErrorCode::InvalidArgument, specs_[i].key() + " declares no inputs");
    }
  }
}

const ModuleSpec* Registry::find(std::string_view name) const {
  for (const auto& s : specs_) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const ModuleSpec* Registry::find(std::string_view name, std::string_view variant) const {
  for (const auto& s : specs_) {
    if (s.name == name && s.variant == variant) return &s;
  }
  return nullptr;
}

Registry build_registry() {
  using M = Modality;
  std::vector<ModuleSpec> specs;
  specs.push_back({"Text Generation", "", std::nullopt, {}, {}, {M::Text}, false, false});
  specs.push_back({"Image Generation", "", ModuleName::ImageGeneration, {M::Text}, {}, {M::Image},
                   false, true});
  specs.push_back({"Image Segmentation", "", ModuleName::ImageSegmentation, {M::Text, M::Image},
                   {}, {M::Image, M::Mask, M::BBox}, false, true});
  specs.push_back({"Image Editing", "", ModuleName::ImageEditing, {M::Text, M::Image},
                   {M::BBox, M::Mask}, {M::Image}, true, true});
  specs.push_back({"Video Generation", "text-to-video", ModuleName::VideoGeneration, {M::Text}, {},
                   {M::Video}, false, true});
  specs.push_back({"Video Generation", "image-to-video", ModuleName::VideoGeneration, {M::Image},
                   {}, {M::Video}, false, true});
  specs.push_back({"Video Segmentation", "", ModuleName::VideoSegmentation, {M::Text, M::Video},
                   {M::BBox, M::Mask}, {M::Video, M::Mask, M::BBox}, true, true});
  specs.push_back({"Video Editing", "", ModuleName::VideoEditing, {M::Text, M::Video}, {},
                   {M::Video}, false, true});
  return Registry(std::move(specs));
}

// ---------------------------------------------------------------------------
// Workspace

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

Eigen::VectorXd unit_normal(int dim, Rng& rng) {
  Eigen::VectorXd v(dim);
  for (auto& x : v) x = rng.normal();
  return v / v.norm();
}

}  // namespace

std::string content_handle(const Asset& asset) {
  std::ostringstream key;
  key << modality_name(asset.kind) << '|' << asset.width << 'x' << asset.height << '|'
      << asset.frames << '|';
  for (const auto& [k, v] : asset.metadata) key << k << '=' << v << ';';
  if (asset.mask) key << "|mask:" << asset.mask->to_rle();
  if (asset.box) key << "|box:" << format_box(*asset.box);
  if (asset.corrupt) key << "|corrupt";
  return lower_ascii(modality_name(asset.kind)) + "-" + hex64(fnv1a(key.str()));
}

SegmentationScene SegmentationScene::make(const BinaryMask& truth,
                                          const Eigen::VectorXd& oracle_embedding, int feature_dim,
                                          std::uint64_t seed) {
  if (feature_dim < 2) fail(ErrorCode::InvalidArgument, "scene features need at least 2 dims");
  const double norm2 = oracle_embedding.squaredNorm();
  if (!(norm2 > 0.0)) fail(ErrorCode::InvalidArgument, "oracle embedding must be non-zero");
  Rng rng(seed);
  const Eigen::VectorXd u = unit_normal(feature_dim, rng);
  Eigen::MatrixXd values(static_cast<Eigen::Index>(truth.width()) * truth.height(), feature_dim);
  for (int y = 0; y < truth.height(); ++y) {
    for (int x = 0; x < truth.width(); ++x) {
      Eigen::VectorXd clutter(feature_dim);
      for (auto& c : clutter) c = 0.35 * rng.normal();
      clutter -= clutter.dot(u) * u;
      const double inside = truth.at(x, y) ? 1.0 : 0.0;
      values.row(static_cast<Eigen::Index>(y) * truth.width() + x) = (inside * u + clutter).transpose();
    }
  }
  Projection query{u * oracle_embedding.transpose() / norm2, Eigen::VectorXd::Zero(feature_dim)};
  return SegmentationScene{truth, FeatureGrid(truth.width(), truth.height(), std::move(values)),
                           std::move(query), u};
}

std::string Workspace::attach(Asset asset) {
  asset.handle = content_handle(asset);
  const std::string handle = asset.handle;
  if (assets_.find(handle) == assets_.end()) {
    assets_.emplace(handle, std::move(asset));
  } else {
    order_.erase(std::remove(order_.begin(), order_.end(), handle), order_.end());
  }
  order_.push_back(handle);
  return handle;
}

std::string Workspace::attach_image(int width, int height, std::string_view tag) {
  Asset a;
  a.kind = Modality::Image;
  a.width = width;
  a.height = height;
  a.metadata["tag"] = std::string(tag);
  return attach(std::move(a));
}

std::string Workspace::attach_video(int width, int height, std::int64_t frames,
                                    std::string_view tag) {
  Asset a;
  a.kind = Modality::Video;
  a.width = width;
  a.height = height;
  a.frames = frames;
  a.metadata["tag"] = std::string(tag);
  return attach(std::move(a));
}

std::string Workspace::attach_mask(const BinaryMask& mask) {
  Asset a;
  a.kind = Modality::Mask;
  a.width = mask.width();
  a.height = mask.height();
  a.mask = mask;
  return attach(std::move(a));
}

bool Workspace::contains(std::string_view handle) const { return assets_.find(handle) != assets_.end(); }

const Asset& Workspace::get(std::string_view handle) const {
  const auto it = assets_.find(handle);
  if (it == assets_.end()) fail(ErrorCode::InvalidArgument, "unknown asset handle " + std::string(handle));
  return it->second;
}

bool Workspace::has(Modality kind) const { return latest(kind) != nullptr; }

const Asset* Workspace::latest(Modality kind) const {
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    const auto& a = assets_.find(*it)->second;
    if (a.kind == kind) return &a;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// Results

std::string_view execution_status_name(ExecutionStatus s) {
  switch (s) {
    case ExecutionStatus::Success: return "success";
    case ExecutionStatus::RoutingFailure: return "routing_failure";
    case ExecutionStatus::ValidationFailure: return "validation_failure";
    case ExecutionStatus::SpecialistFailure: return "specialist_failure";
  }
  return "?";
}

std::vector<std::string> ExecutionResult::handles() const {
  std::vector<std::string> out;
  for (const auto& a : produced) out.push_back(a.handle);
  return out;
}

namespace {

nlohmann::ordered_json result_json(const ExecutionResult& r) {
  nlohmann::ordered_json j;
  j["status"] = execution_status_name(r.status);
  j["module"] = r.module;
  auto produced = nlohmann::ordered_json::array();
  for (const auto& a : r.produced) {
    nlohmann::ordered_json item;
    item["handle"] = a.handle;
    item["modality"] = modality_name(a.kind);
    if (a.box) item["box"] = format_box(*a.box);
    produced.push_back(std::move(item));
  }
  j["produced"] = std::move(produced);
  j["diagnostics"] = r.diagnostics;
  if (r.proxy_score) {
    j["proxy_score"] = *r.proxy_score;
  } else {
    j["proxy_score"] = nullptr;
  }
  return j;
}

}  // namespace

std::string ExecutionResult::to_json() const { return result_json(*this).dump(); }

std::string_view message_mode_name(MessageMode m) {
  switch (m) {
    case MessageMode::Hybrid: return "hybrid";
    case MessageMode::TextOnly: return "text_only";
    case MessageMode::EmbeddingOnly: return "embedding_only";
  }
  return "?";
}

MessageMode parse_message_mode(std::string_view name) {
  if (name == "hybrid") return MessageMode::Hybrid;
  if (name == "text_only") return MessageMode::TextOnly;
  if (name == "embedding_only") return MessageMode::EmbeddingOnly;
  fail(ErrorCode::InvalidArgument, "unknown message mode " + std::string(name));
}

CentroidClassifier CentroidClassifier::seeded(int dim, std::uint64_t seed) {
  if (dim < 1) fail(ErrorCode::InvalidArgument, "centroid dimension must be positive");
  CentroidClassifier c;
  for (ModuleName m : kAllModules) {
    Rng rng(derive_seed(seed, "centroid-" + std::string(module_display_name(m))));
    c.modules.push_back(m);
    c.centroids.push_back(unit_normal(dim, rng));
  }
  return c;
}

ModuleName CentroidClassifier::classify(const Eigen::VectorXd& v) const {
  if (centroids.empty()) fail(ErrorCode::InvalidArgument, "classifier has no centroids");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < centroids.size(); ++i) {
    if (centroids[i].size() != v.size()) {
      fail(ErrorCode::ShapeMismatch, "embedding size does not match the centroids");
    }
    const double d = (centroids[i] - v).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return modules[best];
}

// ---------------------------------------------------------------------------
// Specialists

double generation_proxy(const std::string& instruction,
                        const std::optional<SignalEmbedding>& embedding,
                        const std::optional<Eigen::VectorXd>& target) {
  double score = instruction.empty() ? 0.0 : 0.5;
  if (embedding && target && embedding->dim() == target->size()) {
    const Eigen::VectorXd v = concat(*embedding);
    const double denom = v.norm() * target->norm();
    if (denom > 0.0) score += 0.5 * std::max(0.0, v.dot(*target) / denom);
  }
  return score;
}

namespace {

void check_usable(const Asset& a) {
  if (a.corrupt) fail(ErrorCode::SpecialistFailure, "input asset " + a.handle + " is corrupt");
  if (a.kind == Modality::Video && a.frames <= 0) {
    fail(ErrorCode::SpecialistFailure, "input video " + a.handle + " has no frames");
  }
}

Asset media_output(Modality kind, const ModuleSpec& spec, const std::string& instruction,
                   const Asset* source, const std::optional<BoundingBox>& region, bool embedded) {
  Asset out;
  out.kind = kind;
  out.width = source ? source->width : 64;
  out.height = source ? source->height : 64;
  if (kind == Modality::Video) out.frames = source && source->frames > 0 ? source->frames : 16;
  out.metadata["module"] = spec.key();
  out.metadata["instruction"] = instruction;
  out.metadata["embedding"] = embedded ? "present" : "absent";
  if (source) out.metadata["source"] = source->handle;
  if (region) out.metadata["region"] = format_box(*region);
  out.handle = content_handle(out);
  return out;
}

Eigen::VectorXd text_query(const SegmentationScene& scene, const std::string& instruction) {
  const auto dim = scene.direction.size();
  if (instruction.empty()) return Eigen::VectorXd::Zero(dim);
  Rng rng(fnv1a(instruction));
  Eigen::VectorXd r(dim);
  for (auto& x : r) x = rng.normal();
  r -= r.dot(scene.direction) * scene.direction;
  const double n = r.norm();
  if (n > 0.0) r /= n;
  return scene.direction + 0.8 * r;
}

BinaryMask segment(const SegmentationScene& scene, const Eigen::VectorXd& query,
                   const std::optional<BoundingBox>& region) {
  BinaryMask out(scene.truth.width(), scene.truth.height());
  std::optional<BinaryMask> gate;
  if (region) gate = box_to_mask(*region, out.width(), out.height());
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      if (gate && !gate->at(x, y)) continue;
      if (scene.grid.cell(x, y).dot(query) > 0.5) out.set(x, y);
    }
  }
  return out;
}

}  // namespace

ExecutionResult simulate_specialist(const ModuleSpec& spec, const Workspace& ws,
                                    const std::string& instruction,
                                    const std::optional<BoundingBox>& region,
                                    const std::optional<SignalEmbedding>& embedding) {
  ExecutionResult result;
  result.module = spec.key();
  const Asset* image = ws.latest(Modality::Image);
  const Asset* video = ws.latest(Modality::Video);
  const Asset* source = nullptr;
  if (spec.required_inputs.count(Modality::Video)) {
    source = video;
  } else if (spec.required_inputs.count(Modality::Image)) {
    source = image;
  }
  if (source) check_usable(*source);
  const auto& fixture = ws.fixture;
  const std::optional<Eigen::VectorXd> target =
      fixture ? std::optional<Eigen::VectorXd>(fixture->target) : std::nullopt;

  const bool segmentation = spec.outputs.count(Modality::Mask) > 0;
  if (!segmentation) {
    const Modality kind = *spec.outputs.begin();
    result.produced.push_back(media_output(kind, spec, instruction, source, region, embedding.has_value()));
    result.proxy_score = generation_proxy(instruction, embedding, target);
    result.diagnostics = "generated " + std::string(modality_name(kind));
    return result;
  }

  const Modality media = spec.outputs.count(Modality::Video) ? Modality::Video : Modality::Image;
  const int width = source ? source->width : 64;
  const int height = source ? source->height : 64;
  BinaryMask mask(std::max(width, 1), std::max(height, 1));
  if (fixture && fixture->scene) {
    const auto& scene = *fixture->scene;
    Eigen::VectorXd query;
    if (embedding) {
      query = project(scene.query, concat(*embedding));
    } else {
      query = text_query(scene, instruction);
    }
    mask = segment(scene, query, region);
    result.proxy_score = mask_iou(mask, scene.truth);
  } else if (region) {
    mask = box_to_mask(*region, mask.width(), mask.height());
  } else if (const Asset* drawn = ws.latest(Modality::Mask); drawn && drawn->mask) {
    mask = *drawn->mask;
  }

  result.produced.push_back(media_output(media, spec, instruction, source, region, embedding.has_value()));
  Asset mask_asset;
  mask_asset.kind = Modality::Mask;
  mask_asset.width = mask.width();
  mask_asset.height = mask.height();
  mask_asset.metadata["module"] = spec.key();
  mask_asset.mask = mask;
  mask_asset.handle = content_handle(mask_asset);
  result.produced.push_back(std::move(mask_asset));
  Asset box_asset;
  box_asset.kind = Modality::BBox;
  box_asset.metadata["module"] = spec.key();
  box_asset.box = quantize(mask_to_box(mask).value_or(BoundingBox{0.0, 0.0, 0.0, 0.0}));
  box_asset.handle = content_handle(box_asset);
  result.produced.push_back(std::move(box_asset));
  result.diagnostics = "segmented " + std::to_string(mask.count()) + " pixels";
  return result;
}

// ---------------------------------------------------------------------------
// Routing

namespace {

ExecutionResult failed(ExecutionStatus status, std::string module, std::string why) {
  ExecutionResult r;
  r.status = status;
  r.module = std::move(module);
  r.diagnostics = std::move(why);
  return r;
}

bool outputs_match(const ModuleSpec& spec, const ExecutionResult& r) {
  std::set<Modality> kinds;
  for (const auto& a : r.produced) kinds.insert(a.kind);
  return kinds == spec.outputs && r.produced.size() == spec.outputs.size();
}

}  // namespace

ExecutionResult route(const InvocationEnvelope& envelope, const Workspace& ws,
                      const Registry& registry, const RouteOptions& options) {
  std::optional<SignalEmbedding> embedding = envelope.embedding;
  if (options.mode == MessageMode::TextOnly) embedding.reset();
  if (!envelope.task) {
    ExecutionResult r;
    r.diagnostics = "text response";
    return r;
  }

  ModuleName module = envelope.task->module;
  std::string instruction = envelope.task->instruction;
  if (options.mode == MessageMode::EmbeddingOnly) {
    instruction.clear();
    if (!embedding) return failed(ExecutionStatus::RoutingFailure, "", "no module text and no embedding");
    if (!options.fallback) return failed(ExecutionStatus::RoutingFailure, "", "no fallback classifier");
    try {
      module = options.fallback->classify(concat(*embedding));
    } catch (const Error& e) {
      return failed(ExecutionStatus::RoutingFailure, "", e.what());
    }
  }

  const std::string name(module_display_name(module));
  const ModuleSpec* spec = nullptr;
  if (module == ModuleName::VideoGeneration) {
    spec = registry.find(name, ws.has(Modality::Image) ? "image-to-video" : "text-to-video");
  } else {
    spec = registry.find(name);
  }
  if (!spec) return failed(ExecutionStatus::RoutingFailure, "", "no registered module " + name);

  for (Modality m : spec->required_inputs) {
    if (m == Modality::Text) continue;
    if (!ws.has(m)) {
      return failed(ExecutionStatus::ValidationFailure, spec->key(),
                    "missing input " + std::string(modality_name(m)));
    }
  }
  if (spec->requires_region && !envelope.task->region && !ws.has(Modality::Mask)) {
    return failed(ExecutionStatus::ValidationFailure, spec->key(), "region required");
  }
  if (options.embedding_required && spec->accepts_embedding && !embedding) {
    return failed(ExecutionStatus::ValidationFailure, spec->key(), "signal embedding required");
  }
  if (embedding && embedding->dim() == 0) {
    return failed(ExecutionStatus::ValidationFailure, spec->key(), "empty signal embedding");
  }

  try {
    ExecutionResult r = simulate_specialist(*spec, ws, instruction, envelope.task->region, embedding);
    if (!outputs_match(*spec, r)) {
      return failed(ExecutionStatus::SpecialistFailure, spec->key(), "outputs do not match the module spec");
    }
    return r;
  } catch (const Error& e) {
    return failed(ExecutionStatus::SpecialistFailure, spec->key(), e.what());
  }
}

void commit(Workspace& ws, const ExecutionResult& result) {
  if (result.status == ExecutionStatus::Success) {
    for (const auto& a : result.produced) ws.attach(a);
  }
  ws.set_turn(ws.turn() + 1);
}

// ---------------------------------------------------------------------------
// Ablation

AblationReport msgpass_ablation(const std::vector<ScriptedTurn>& corpus, MessageMode mode,
                                const Registry& registry, const CentroidClassifier& fallback,
                                bool embedding_required) {
  RouteOptions options;
  options.mode = mode;
  options.embedding_required = embedding_required;
  options.fallback = fallback;

  AblationReport report;
  report.mode = mode;
  report.n = corpus.size();
  std::size_t successes = 0;
  std::size_t task_turns = 0;
  double proxy_sum = 0.0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& turn = corpus[i];
    ExecutionResult result;
    try {
      InvocationEnvelope env = parse_envelope(turn.raw_response, ParseMode::Strict);
      env.embedding = turn.embedding;
      result = route(env, turn.workspace, registry, options);
    } catch (const Error& e) {
      result = failed(ExecutionStatus::RoutingFailure, "", e.what());
    }
    if (result.status == ExecutionStatus::Success && result.module != turn.expected_module) {
      result = failed(ExecutionStatus::RoutingFailure, result.module,
                      "routed to " + (result.module.empty() ? std::string("text") : result.module) +
                          ", expected " +
                          (turn.expected_module.empty() ? std::string("text") : turn.expected_module));
    }
    if (result.status == ExecutionStatus::Success) ++successes;
    if (!turn.expected_module.empty()) {
      ++task_turns;
      if (result.status == ExecutionStatus::Success && result.proxy_score) proxy_sum += *result.proxy_score;
    }
    report.records.push_back(TurnRecord{static_cast<int>(i), turn.raw_response, mode, std::move(result)});
  }
  report.success_rate = corpus.empty() ? 0.0 : static_cast<double>(successes) / static_cast<double>(corpus.size());
  report.mean_proxy = task_turns == 0 ? 0.0 : proxy_sum / static_cast<double>(task_turns);
  return report;
}

std::string transcript_jsonl(const AblationReport& report) {
  std::string out;
  for (const auto& rec : report.records) {
    nlohmann::ordered_json j;
    j["turn"] = rec.turn;
    j["raw_response"] = rec.raw_response;
    j["mode"] = message_mode_name(rec.mode);
    j["execution_result"] = result_json(rec.result);
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string ablation_csv(const std::vector<AblationReport>& reports) {
  std::ostringstream out;
  out.precision(10);
  out << "mode,success_rate,mean_proxy,n\n";
  for (const auto& r : reports) {
    out << message_mode_name(r.mode) << ',' << r.success_rate << ',' << r.mean_proxy << ',' << r.n
        << '\n';
  }
  return out.str();
}

}  // namespace visor
