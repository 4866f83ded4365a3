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

#include "visor/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "visor/error.hpp"
#include "visor/region_encoder.hpp"
#include "visor/signal_bus.hpp"

namespace visor {

const std::vector<FunctionRow>& function_table() {
  using M = ModuleName;
  static const std::vector<FunctionRow> rows = {
      {"image_generation", "Image Generation", M::ImageGeneration, {"Text"}, {"Image-Caption"},
       "CC3M", 4000},
      {"image_segmentation_sketch", "Image Segmentation", M::ImageSegmentation,
       {"Text", "Sketch", "Image"}, {"Image", "Sketch"}, "RefCOCO", 4000},
      {"image_segmentation_reference", "Image Segmentation", M::ImageSegmentation,
       {"Text", "Sketch", "Image", "Reference-Image"}, {"Image", "Reference-Image", "Sketch"},
       "RefCOCO", 5000},
      {"image_segmentation_object", "Image Segmentation", M::ImageSegmentation, {"Text", "Image"},
       {"Image", "Object-Name"}, "gRefCOCO", 2028},
      {"image_editing_sketch", "Image Editing", M::ImageEditing, {"Text", "Sketch", "Image"},
       {"Image", "Sketch"}, "COCO2017", 4000},
      {"image_editing_box", "Image Editing", M::ImageEditing, {"Text", "Image"},
       {"Image", "Bounding-Box"}, "MagicBrush", 5000},
      {"video_generation_text", "Video Generation", M::VideoGeneration, {"Text"}, {"Video-Caption"},
       "WebVid", 7000},
      {"video_generation_image", "Video Generation", M::VideoGeneration, {"Text", "Image"},
       {"Image"}, "LAION-400M", 4000},
      {"video_segmentation_sketch", "Video Segmentation", M::VideoSegmentation,
       {"Text", "Sketch", "Video"}, {"Video", "Reference-Image", "Sketch"}, "WebVid, VG", 5000},
      {"video_segmentation_box", "Video Segmentation", M::VideoSegmentation, {"Text", "Video"},
       {"Video", "Reference-Image", "Bounding-Box"}, "WebVid", 5000},
      {"video_editing_sketch", "Video Editing", M::VideoEditing, {"Text", "Sketch", "Video"},
       {"Video", "Editing-Query"}, "WebVid", 5000},
      {"video_editing_text", "Video Editing", M::VideoEditing, {"Text", "Video"},
       {"Video", "Editing-Query"}, "WebVid", 5000},
  };
  return rows;
}

const FunctionRow* find_function(std::string_view id) {
  for (const auto& row : function_table()) {
    if (row.id == id) return &row;
  }
  return nullptr;
}

std::string_view grounding_task_name(GroundingTask task) {
  switch (task) {
    case GroundingTask::GroundedImageCaptioning: return "grounded_image_captioning";
    case GroundingTask::ReferringImageSegmentation: return "referring_image_segmentation";
    case GroundingTask::GroundedVideoCaptioning: return "grounded_video_captioning";
    case GroundingTask::ReferringVideoTracking: return "referring_video_tracking";
    case GroundingTask::GroundedImageQA: return "grounded_image_qa";
    case GroundingTask::GroundedVideoQA: return "grounded_video_qa";
  }
  return "?";
}

GroundingTask parse_grounding_task(std::string_view name) {
  for (GroundingTask t : kAllGroundingTasks) {
    if (grounding_task_name(t) == name) return t;
  }
  fail(ErrorCode::UnsupportedTask, "unsupported grounding task '" + std::string(name) + "'");
}

GroundingKind grounding_kind(GroundingTask task) {
  switch (task) {
    case GroundingTask::GroundedVideoCaptioning:
    case GroundingTask::ReferringVideoTracking:
    case GroundingTask::GroundedVideoQA:
      return GroundingKind::Video;
    default:
      return GroundingKind::Image;
  }
}

// ---------------------------------------------------------------------------
// Vocabulary

namespace {

const std::vector<std::string> kObjects = {
    "dog",    "cat",     "clock",  "girl",     "boy",    "man",      "woman",    "car",
    "bicycle", "bench",  "ball",   "book",     "cup",    "umbrella", "horse",    "bird",
    "kite",   "chair",   "table",  "laptop",   "bottle", "tree",     "boat",     "train",
    "skateboard", "pizza", "giraffe", "elephant", "backpack", "lamp", "vase", "surfboard"};
const std::vector<std::string> kColors = {"red",   "green", "blue",  "yellow",
                                          "black", "white", "pink",  "brown"};
const std::vector<std::string> kActions = {"sitting", "running", "standing", "jumping",
                                           "sleeping", "walking", "waiting", "turning"};
const std::vector<std::string> kPlaces = {"in the park",   "on the beach",  "in a kitchen",
                                          "on a street",   "in the snow",   "by the river",
                                          "in a classroom", "on a rooftop"};
const std::vector<std::string> kSpots = {"chair", "ground", "bed", "sofa", "bench", "table",
                                         "grass", "floor"};

const std::string& pick(const std::vector<std::string>& items, Rng& rng) {
  return items[static_cast<std::size_t>(rng.index(items.size()))];
}

std::vector<std::string> pick_distinct(const std::vector<std::string>& items, std::size_t n, Rng& rng) {
  std::vector<std::string> pool = items;
  rng.shuffle(pool);
  pool.resize(std::min(n, pool.size()));
  return pool;
}

std::string article(const std::string& word) {
  const char c = word.empty() ? 'x' : word.front();
  return (c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u') ? "an" : "a";
}

std::string capitalize(std::string s) {
  if (!s.empty() && s.front() >= 'a' && s.front() <= 'z') s.front() = static_cast<char>(s.front() - 'a' + 'A');
  return s;
}

BoundingBox random_box(Rng& rng, int precision) {
  const double w = rng.uniform(0.08, 0.5);
  const double h = rng.uniform(0.08, 0.5);
  const double xl = rng.uniform(0.0, 1.0 - w);
  const double yt = rng.uniform(0.0, 1.0 - h);
  return quantize(BoundingBox{xl, yt, xl + w, yt + h}, precision);
}

TemporalSpan random_span(Rng& rng, std::int64_t frames) {
  const auto a = static_cast<std::int64_t>(rng.index(static_cast<std::uint64_t>(frames)));
  const auto b = static_cast<std::int64_t>(rng.index(static_cast<std::uint64_t>(frames)));
  return TemporalSpan{std::min(a, b), std::max(a, b)};
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string caption_phrase(Rng& rng) {
  const std::string color = pick(kColors, rng);
  const std::string object = pick(kObjects, rng);
  return article(color) + " " + color + " " + object + " " + pick(kActions, rng) + " " + pick(kPlaces, rng);
}

}  // namespace

// ---------------------------------------------------------------------------
// Grounding prompts

GroundingScene make_scene(GroundingTask task, Rng& rng, int precision) {
  GroundingScene scene;
  const bool video = grounding_kind(task) == GroundingKind::Video;
  scene.frames = video ? static_cast<std::int64_t>(16 + rng.index(113)) : 0;
  const auto labels = pick_distinct(kObjects, 2 + rng.index(2), rng);
  for (const auto& label : labels) {
    SceneObject obj{label, random_box(rng, precision), {}};
    if (video) obj.span = random_span(rng, scene.frames);
    scene.objects.push_back(std::move(obj));
  }
  const std::string color = pick(kColors, rng);
  const std::string action = pick(kActions, rng);
  const std::string place = pick(kPlaces, rng);
  scene.caption = capitalize(article(color)) + " " + color + " " + labels[0] + " is " + action +
                  " near the " + labels[1] + " " + place + ".";
  scene.query = capitalize(article(color)) + " " + color + " " + labels[0] + " " + action + " " + place;

  const auto form = rng.index(3);
  std::vector<std::string> options;
  if (form == 0) {
    scene.question = "Where is the " + labels[0] + " " + action + "?";
    options = pick_distinct(kSpots, 4, rng);
  } else if (form == 1) {
    scene.question = "What color is the " + labels[0] + "?";
    options = pick_distinct(kColors, 4, rng);
  } else {
    scene.question = "What is the " + labels[0] + " doing?";
    options = pick_distinct(kActions, 4, rng);
  }
  scene.options = options;
  scene.answer = static_cast<int>(rng.index(options.size())) + 1;
  return scene;
}

namespace {

std::string options_line(const GroundingScene& scene) {
  std::string out = "Q: " + scene.question + " A: ";
  for (std::size_t i = 0; i < scene.options.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(i + 1) + ") " + scene.options[i];
  }
  return out + ".";
}

std::string answer_clause(const GroundingScene& scene) {
  return "Therefore, the answer is " + std::to_string(scene.answer) + ") " +
         scene.options[static_cast<std::size_t>(scene.answer - 1)] + ".";
}

Region scene_region(const SceneObject& obj, bool video) {
  if (video) return TrackedRegion{obj.box, obj.span};
  return obj.box;
}

}  // namespace

RenderedPrompt render_grounding_prompt(GroundingTask task, const GroundingScene& scene, int precision) {
  if (scene.objects.size() < 2) fail(ErrorCode::InvalidArgument, "grounding scene needs two objects");
  for (const auto& obj : scene.objects) {
    if (!obj.box.canonical() || !obj.box.in_unit_range()) {
      fail(ErrorCode::InvalidArgument, "scene boxes must be canonical");
    }
  }
  const bool video = grounding_kind(task) == GroundingKind::Video;
  RenderedPrompt out;
  switch (task) {
    case GroundingTask::GroundedImageCaptioning:
    case GroundingTask::GroundedVideoCaptioning: {
      if (video) {
        out.prompt =
            "Please generate a caption for the given video, and link each part of the caption to "
            "specific objects in the video with its temporal presence duration.\nYou should denote it "
            "with a bounding box with the starting and ending frame number in format as "
            "\"object: (Xl, Yt, Xr, Yb | Fs, Fe)\".";
      } else {
        out.prompt =
            "Please generate a detailed caption for the given image, and clearly link each part of "
            "the caption to specific objects or areas in the image which you can denote with a "
            "bounding box with \"object: (Xl, Yt, Xr, Yb)\" format.";
      }
      GroundedCaption caption{scene.caption, {}};
      for (const auto& obj : scene.objects) caption.phrases.push_back({obj.label, scene_region(obj, video)});
      out.target = serialize_grounded_caption(caption, precision);
      break;
    }
    case GroundingTask::ReferringImageSegmentation:
      out.prompt =
          "Please identify the target object from the given images based on the following text "
          "query: \"" + scene.query + "\".\nPlease output the bounding box (Xl, Yt, Xr, Yb) of the "
          "target object.";
      out.target = format_box(scene.objects[0].box, precision);
      break;
    case GroundingTask::ReferringVideoTracking:
      out.prompt =
          "Please track the specified object throughout the video based on the following given "
          "description, and mark its starting and ending position in each frame:\n\"" +
          scene.query + ".\"\nPlease output in the format of \"(Xl, Yt, Xr, Yb | Fs, Fe)\".";
      out.target = format_tracked(TrackedRegion{scene.objects[0].box, scene.objects[0].span}, precision);
      break;
    case GroundingTask::GroundedImageQA:
      out.prompt = "Based on the given image, please select the correct answer among all the "
                   "candidates:\n" + options_line(scene) +
                   "\nPlease first identify and ground the target object (in coordinates) mentioned "
                   "in the question, and then proceed to answer the question.";
      out.target = "The target object mentioned in the question is \"" + scene.objects[0].label +
                   ",\" with the position given by " + format_box(scene.objects[0].box, precision) +
                   ". " + answer_clause(scene);
      break;
    case GroundingTask::GroundedVideoQA:
      out.prompt = "Based on the provided video, answer the following question by choosing the most "
                   "appropriate answer from the options given.\n" + options_line(scene) +
                   "\nFirst, analyze the spatial position and temporality of the target object "
                   "mentioned in the question within the video, and based on this analysis, "
                   "determine the answer to the question.";
      out.target = "The objects involved in the question are the " + scene.objects[0].label + " " +
                   format_region(scene_region(scene.objects[0], true), precision) + " and the " +
                   scene.objects[1].label + " " +
                   format_region(scene_region(scene.objects[1], true), precision) + ". " +
                   answer_clause(scene);
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Invocation samples

namespace {

struct Invocation {
  std::string prompt;
  InvocationEnvelope envelope;
};

bool takes_region(const FunctionRow& row) {
  for (const auto& m : row.module_input) {
    if (m == "Sketch" || m == "Bounding-Box") return true;
  }
  return false;
}

std::string attachments(const FunctionRow& row) {
  std::string out;
  for (const auto& m : row.system_input) {
    if (m == "Text") continue;
    std::string tag = m;
    std::transform(tag.begin(), tag.end(), tag.begin(), [](char c) {
      return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
    });
    out += "[" + tag + "] ";
  }
  return out;
}

std::string edit_query(const std::string& object, Rng& rng) {
  switch (rng.index(3)) {
    case 0: return "change the " + object + " to " + pick(kColors, rng);
    case 1: return "remove the " + object;
    default: return "replace the " + object + " with " + article(pick(kObjects, rng)) + " " + pick(kObjects, rng);
  }
}

Invocation make_invocation(const FunctionRow& row, Rng& rng, int precision) {
  Invocation inv;
  Task task;
  task.module = row.module;
  const std::string object = pick(kObjects, rng);
  const std::string color = pick(kColors, rng);
  const std::string lead = attachments(row);
  const bool sketch =
      std::find(row.system_input.begin(), row.system_input.end(), "Sketch") != row.system_input.end();
  std::string reply;
  switch (row.module) {
    case ModuleName::ImageGeneration: {
      const std::string caption = caption_phrase(rng);
      inv.prompt = lead + (rng.bernoulli(0.5) ? "Please draw " + caption + "."
                                              : "Can you generate an image of " + caption + "?");
      reply = "Sure! Here is an image of " + caption + ".";
      task.instruction = caption;
      break;
    }
    case ModuleName::VideoGeneration: {
      const std::string caption = caption_phrase(rng);
      if (row.id == "video_generation_image") {
        inv.prompt = lead + "Please turn this picture into a video: " + caption + ".";
        reply = "Sure! I will animate the picture you provided.";
      } else {
        inv.prompt = lead + "Can you make a video of " + caption + "?";
        reply = "Sure! Here is a video of " + caption + ".";
      }
      task.instruction = caption;
      break;
    }
    case ModuleName::ImageSegmentation:
    case ModuleName::VideoSegmentation: {
      const bool video = row.module == ModuleName::VideoSegmentation;
      const std::string media = video ? "video" : "image";
      if (sketch) {
        inv.prompt = lead + "Can you help me " + (video ? "track" : "segment") + " the " + object +
                     " I circled in the " + media + "?";
      } else if (row.id == "image_segmentation_object") {
        inv.prompt = lead + "Please segment all the " + color + " " + object + " in this image.";
      } else {
        inv.prompt = lead + "Please track the " + color + " " + object + " in this " + media + ".";
      }
      if (row.id == "image_segmentation_reference") {
        inv.prompt += " It is the one shown in the reference image.";
      }
      reply = "Sure! Following I will outline the " + object + " in the " + media + ".";
      task.instruction = "segmentation: " + (row.id == "image_segmentation_object" ? color + " " + object : object);
      break;
    }
    case ModuleName::ImageEditing:
    case ModuleName::VideoEditing: {
      const std::string media = row.module == ModuleName::VideoEditing ? "video" : "image";
      const std::string query = edit_query(object, rng);
      inv.prompt = lead + "Please " + query + (sketch ? " where I scribbled" : "") + " in this " + media + ".";
      reply = "Sure! I will " + query + " in the " + media + ".";
      task.instruction = "editing: " + query;
      break;
    }
  }
  if (takes_region(row)) task.region = random_box(rng, precision);
  inv.envelope.user_response = reply;
  inv.envelope.task = task;
  return inv;
}

InstructionSample make_sample(const std::string& id, std::uint64_t seed, int index) {
  InstructionSample s;
  s.function = id;
  s.sample_id = hex64(fnv1a(std::string(kInstructionSchema) + "|" + id + "|" + std::to_string(seed) +
                            "|" + std::to_string(index)));
  return s;
}

std::vector<std::string> grounding_inputs(GroundingTask task) {
  return {"Text", grounding_kind(task) == GroundingKind::Video ? "Video" : "Image"};
}

int checked_count(const std::map<std::string, int>& counts, const std::string& id) {
  const auto it = counts.find(id);
  const int n = it == counts.end() ? 0 : it->second;
  if (n < 0) fail(ErrorCode::ConfigError, "count for " + id + " must be >= 0");
  return n;
}

}  // namespace

GenConfig GenConfig::paper_scale() {
  GenConfig cfg;
  for (const auto& row : function_table()) cfg.function_counts[row.id] = row.paper_count;
  for (GroundingTask t : kAllGroundingTasks) cfg.grounding_counts[std::string(grounding_task_name(t))] = 0;
  return cfg;
}

GenConfig GenConfig::desk_scale(int per_function) {
  GenConfig cfg;
  for (const auto& row : function_table()) cfg.function_counts[row.id] = per_function;
  for (GroundingTask t : kAllGroundingTasks) {
    cfg.grounding_counts[std::string(grounding_task_name(t))] = per_function;
  }
  return cfg;
}

std::size_t GenConfig::total() const {
  std::size_t n = 0;
  for (const auto& [id, c] : function_counts) n += static_cast<std::size_t>(std::max(c, 0));
  for (const auto& [id, c] : grounding_counts) n += static_cast<std::size_t>(std::max(c, 0));
  return n;
}

std::vector<InstructionSample> generate_function(const GenConfig& cfg, std::string_view id) {
  if (cfg.precision < 1 || cfg.precision > 12) fail(ErrorCode::ConfigError, "precision must be in [1, 12]");
  const std::string key(id);
  std::vector<InstructionSample> out;
  Rng rng(derive_seed(cfg.seed, "datagen-" + key));
  if (const FunctionRow* row = find_function(id)) {
    const int n = checked_count(cfg.function_counts, key);
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      auto inv = make_invocation(*row, rng, cfg.precision);
      auto s = make_sample(key, cfg.seed, i);
      s.system_input = row->system_input;
      s.module_input = row->module_input;
      s.prompt = inv.prompt;
      s.target = serialize_envelope(inv.envelope, cfg.precision);
      if (inv.envelope.task->region) s.annotations.regions.push_back({"region", *inv.envelope.task->region});
      out.push_back(std::move(s));
    }
    return out;
  }
  const GroundingTask task = parse_grounding_task(id);
  const int n = checked_count(cfg.grounding_counts, key);
  const bool video = grounding_kind(task) == GroundingKind::Video;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto scene = make_scene(task, rng, cfg.precision);
    const auto rendered = render_grounding_prompt(task, scene, cfg.precision);
    auto s = make_sample(key, cfg.seed, i);
    s.grounding = true;
    s.system_input = grounding_inputs(task);
    s.module_input = {};
    s.prompt = rendered.prompt;
    s.target = rendered.target;
    switch (task) {
      case GroundingTask::ReferringImageSegmentation:
      case GroundingTask::ReferringVideoTracking:
      case GroundingTask::GroundedImageQA:
        s.annotations.regions.push_back({scene.objects[0].label, scene_region(scene.objects[0], video)});
        break;
      case GroundingTask::GroundedVideoQA:
        for (std::size_t k = 0; k < 2; ++k) {
          s.annotations.regions.push_back({scene.objects[k].label, scene_region(scene.objects[k], true)});
        }
        break;
      default:
        for (const auto& obj : scene.objects) s.annotations.regions.push_back({obj.label, scene_region(obj, video)});
    }
    if (task == GroundingTask::GroundedImageQA || task == GroundingTask::GroundedVideoQA) {
      s.annotations.answer = scene.answer;
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<InstructionSample> generate_samples(const GenConfig& cfg) {
  for (const auto& [id, c] : cfg.function_counts) {
    if (!find_function(id)) fail(ErrorCode::ConfigError, "unknown function '" + id + "'");
  }
  for (const auto& [id, c] : cfg.grounding_counts) parse_grounding_task(id);
  std::vector<InstructionSample> out;
  out.reserve(cfg.total());
  for (const auto& row : function_table()) {
    auto part = generate_function(cfg, row.id);
    std::move(part.begin(), part.end(), std::back_inserter(out));
  }
  for (GroundingTask t : kAllGroundingTasks) {
    auto part = generate_function(cfg, grounding_task_name(t));
    std::move(part.begin(), part.end(), std::back_inserter(out));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation and output

namespace {

bool close_box(const BoundingBox& a, const BoundingBox& b, double tol) {
  return std::abs(a.xl - b.xl) <= tol && std::abs(a.yt - b.yt) <= tol && std::abs(a.xr - b.xr) <= tol &&
         std::abs(a.yb - b.yb) <= tol;
}

bool close_region(const Region& a, const Region& b, double tol) {
  if (a.index() != b.index()) return false;
  if (const auto* box = std::get_if<BoundingBox>(&a)) return close_box(*box, std::get<BoundingBox>(b), tol);
  const auto& ta = std::get<TrackedRegion>(a);
  const auto& tb = std::get<TrackedRegion>(b);
  return close_box(ta.box, tb.box, tol) && ta.span == tb.span;
}

std::optional<std::string> compare_regions(const std::vector<Region>& parsed,
                                           const Annotations& ann, double tol) {
  if (parsed.size() != ann.regions.size()) {
    return "target has " + std::to_string(parsed.size()) + " regions, annotations " +
           std::to_string(ann.regions.size());
  }
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    if (!close_region(parsed[i], ann.regions[i].second, tol)) {
      return "region " + std::to_string(i) + " differs from its annotation";
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::string> validate_sample(const InstructionSample& sample, int precision) {
  const double tol = 0.5 * std::pow(10.0, -precision) + 1e-12;
  try {
    if (const FunctionRow* row = find_function(sample.function)) {
      const auto env = parse_envelope(sample.target, ParseMode::Strict);
      if (!env.task) return std::string("target has no task");
      if (env.task->module != row->module) return std::string("target names the wrong module");
      std::vector<Region> parsed;
      if (env.task->region) parsed.push_back(*env.task->region);
      if (auto diff = compare_regions(parsed, sample.annotations, tol)) return diff;
      if (serialize_envelope(env, precision) != sample.target) return std::string("target is not canonical");
      return std::nullopt;
    }
    const GroundingTask task = parse_grounding_task(sample.function);
    const GroundingKind kind = grounding_kind(task);
    std::vector<Region> parsed;
    switch (task) {
      case GroundingTask::GroundedImageCaptioning:
      case GroundingTask::GroundedVideoCaptioning: {
        const auto caption = parse_grounded_caption(sample.target, kind, ParseMode::Strict);
        for (std::size_t i = 0; i < caption.phrases.size(); ++i) {
          if (i < sample.annotations.regions.size() &&
              caption.phrases[i].label != sample.annotations.regions[i].first) {
            return "phrase " + std::to_string(i) + " label differs";
          }
          parsed.push_back(caption.phrases[i].region);
        }
        break;
      }
      case GroundingTask::ReferringImageSegmentation:
        parsed.push_back(parse_box(sample.target, ParseMode::Strict));
        break;
      case GroundingTask::ReferringVideoTracking:
        parsed.push_back(parse_tracking_answer(sample.target, ParseMode::Strict));
        break;
      case GroundingTask::GroundedImageQA:
      case GroundingTask::GroundedVideoQA: {
        const auto answer = parse_grounded_answer(sample.target, kind, ParseMode::Strict);
        parsed = answer.regions;
        if (!sample.annotations.answer || answer.option_index != *sample.annotations.answer) {
          return std::string("answer index differs from its annotation");
        }
        break;
      }
    }
    return compare_regions(parsed, sample.annotations, tol);
  } catch (const Error& e) {
    return std::string(error_code_name(e.code())) + ": " + e.what();
  }
}

std::string InstructionSample::to_json() const {
  nlohmann::ordered_json j;
  j["schema"] = kInstructionSchema;
  j["sample_id"] = sample_id;
  j["function"] = function;
  j["kind"] = grounding ? "grounding" : "invocation";
  j["system_input"] = system_input;
  j["module_input"] = module_input;
  j["prompt"] = prompt;
  j["target"] = target;
  auto regions = nlohmann::ordered_json::array();
  for (const auto& [label, region] : annotations.regions) {
    nlohmann::ordered_json r;
    r["label"] = label;
    const BoundingBox& box =
        std::holds_alternative<BoundingBox>(region) ? std::get<BoundingBox>(region) : std::get<TrackedRegion>(region).box;
    r["box"] = {box.xl, box.yt, box.xr, box.yb};
    if (const auto* t = std::get_if<TrackedRegion>(&region)) r["span"] = {t->span.fs, t->span.fe};
    regions.push_back(std::move(r));
  }
  nlohmann::ordered_json ann;
  ann["regions"] = std::move(regions);
  if (annotations.answer) ann["answer"] = *annotations.answer;
  j["annotations"] = std::move(ann);
  return j.dump();
}

std::string samples_jsonl(const std::vector<InstructionSample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    out += s.to_json();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Turn corpus

CentroidClassifier corpus_classifier(const TurnCorpusConfig& cfg) {
  return CentroidClassifier::seeded(cfg.task_specific_dim + cfg.task_invariant_dim,
                                    derive_seed(cfg.seed, "centroids"));
}

namespace {

BinaryMask random_truth(int size, Rng& rng) {
  BinaryMask mask(size, size);
  const int w = 6 + static_cast<int>(rng.index(static_cast<std::uint64_t>(size / 2)));
  const int h = 6 + static_cast<int>(rng.index(static_cast<std::uint64_t>(size / 2)));
  const int x0 = static_cast<int>(rng.index(static_cast<std::uint64_t>(size - w + 1)));
  const int y0 = static_cast<int>(rng.index(static_cast<std::uint64_t>(size - h + 1)));
  const bool ellipse = rng.bernoulli(0.5);
  const double cx = x0 + w / 2.0;
  const double cy = y0 + h / 2.0;
  for (int y = y0; y < y0 + h; ++y) {
    for (int x = x0; x < x0 + w; ++x) {
      if (ellipse) {
        const double dx = (x + 0.5 - cx) / (w / 2.0);
        const double dy = (y + 0.5 - cy) / (h / 2.0);
        if (dx * dx + dy * dy > 1.0) continue;
      }
      mask.set(x, y);
    }
  }
  return mask;
}

}  // namespace

std::vector<ScriptedTurn> make_turn_corpus(const TurnCorpusConfig& cfg) {
  if (cfg.turns < 0 || cfg.task_specific_dim < 1 || cfg.task_invariant_dim < 1 || cfg.mask_size < 12) {
    fail(ErrorCode::ConfigError, "turn corpus dimensions out of range");
  }
  const auto registry = build_registry();
  const auto classifier = corpus_classifier(cfg);
  Rng rng(derive_seed(cfg.seed, "turn-corpus"));

  struct Kind {
    ModuleName module;
    std::string key;
  };
  std::vector<Kind> kinds;
  for (const auto& spec : registry.specs()) {
    if (spec.module) kinds.push_back({*spec.module, spec.key()});
  }

  std::vector<ScriptedTurn> corpus;
  corpus.reserve(static_cast<std::size_t>(cfg.turns));
  for (int t = 0; t < cfg.turns; ++t) {
    ScriptedTurn turn;
    turn.workspace.set_turn(t);
    const std::string object = pick(kObjects, rng);
    InvocationEnvelope env;
    if (rng.bernoulli(cfg.text_turn_fraction)) {
      env.user_response = "The " + object + " is " + pick(kActions, rng) + " " + pick(kPlaces, rng) + ".";
      turn.raw_response = serialize_envelope(env);
      corpus.push_back(std::move(turn));
      continue;
    }
    const Kind& kind = kinds[static_cast<std::size_t>(rng.index(kinds.size()))];
    const auto centroid_index = static_cast<std::size_t>(
        std::find(classifier.modules.begin(), classifier.modules.end(), kind.module) - classifier.modules.begin());
    Eigen::VectorXd target = classifier.centroids[centroid_index];
    for (auto& x : target) x += cfg.embedding_noise * rng.normal();

    Task task;
    task.module = kind.module;
    const int size = cfg.mask_size;
    std::optional<BinaryMask> truth;
    switch (kind.module) {
      case ModuleName::ImageGeneration:
      case ModuleName::VideoGeneration:
        task.instruction = caption_phrase(rng);
        if (kind.key == "Video Generation (image-to-video)") {
          turn.workspace.attach_image(size, size, "still-" + std::to_string(t));
        }
        env.user_response = "Sure! Here is what you asked for.";
        break;
      case ModuleName::ImageSegmentation:
        turn.workspace.attach_image(size, size, "photo-" + std::to_string(t));
        truth = random_truth(size, rng);
        task.instruction = "segmentation: " + object;
        if (rng.bernoulli(0.5)) task.region = quantize(*mask_to_box(*truth));
        env.user_response = "Sure! Following I will outline the " + object + " in the image.";
        break;
      case ModuleName::VideoSegmentation:
        turn.workspace.attach_video(size, size, 8 + static_cast<std::int64_t>(rng.index(25)),
                                    "clip-" + std::to_string(t));
        truth = random_truth(size, rng);
        task.instruction = "segmentation: " + object;
        task.region = quantize(*mask_to_box(*truth));
        env.user_response = "Sure! Following I will outline the " + object + " in the video.";
        break;
      case ModuleName::ImageEditing:
        turn.workspace.attach_image(size, size, "photo-" + std::to_string(t));
        task.instruction = "editing: " + edit_query(object, rng);
        task.region = random_box(rng, kDefaultPrecision);
        env.user_response = "Sure! I will edit the marked area.";
        break;
      case ModuleName::VideoEditing:
        turn.workspace.attach_video(size, size, 8 + static_cast<std::int64_t>(rng.index(25)),
                                    "clip-" + std::to_string(t));
        task.instruction = "editing: " + edit_query(object, rng);
        env.user_response = "Sure! I will edit the video.";
        break;
    }
    TurnFixture fixture;
    fixture.target = target;
    if (truth) {
      fixture.scene = SegmentationScene::make(*truth, target, cfg.scene_feature_dim,
                                              derive_seed(cfg.seed, "scene-" + std::to_string(t)));
    }
    turn.workspace.fixture = std::move(fixture);
    env.task = task;
    turn.raw_response = serialize_envelope(env);
    turn.embedding = split(target, cfg.task_specific_dim);
    turn.expected_module = kind.key;
    corpus.push_back(std::move(turn));
  }
  return corpus;
}

}  // namespace visor
