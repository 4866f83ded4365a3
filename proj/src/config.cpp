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

#include "visor/config.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "visor/error.hpp"
#include "visor/hash.hpp"

namespace visor {

namespace {

constexpr std::string_view kDefaults = R"(seed: 7
output_dir: out
datagen:
  scale: desk
  per_function: 20
  precision: 4
  counts: {}
align:
  task_specific_dim: 32
  task_invariant_dim: 32
  caption_dim: 16
  condition_dim: 24
  signal_tokens: 4
  filler_tokens: 8
  samples_per_module: 48
  epochs: 60
  batch_size: 16
  learning_rate: 0.05
  alignment_weight: 1.0
synergy:
  tasks: [{source: shared, label: 0}, {source: shared, label: 0}, {source: private, label: 1}, {source: private, label: 2}]
  shared_latent: 4
  private_latent: 4
  shared_input: 16
  private_input: 8
  shared_dim: 16
  private_dim: 8
  seq_len: 2
  head_hidden: 16
  input_noise: 0.1
  signature_scale: 0.25
  train_per_task: 200
  heldout_per_task: 200
  epochs: 200
  batch_size: 128
  learning_rate: 0.05
  disc_learning_rate: 0.2
  weight_decay: 0.0
  lambda: 1.0
  warmup_epochs: 0
  alternating: false
  inner_steps: 1
  discriminator: {layers: 2, width: 32, ffn_hidden: 64, head_hidden: 32}
  probe_epochs: 60
  probe_learning_rate: 0.1
  probe_batch_size: 32
matrix:
  seeds: 5
  train_per_task: 40
  heldout_per_task: 400
  epochs: 150
  batch_size: 32
  lambda: 1.0
  pairs: [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]]
  synergistic_pair: [0, 1]
  control_pair: [2, 3]
ablation:
  turns: 1000
  task_specific_dim: 8
  task_invariant_dim: 8
  mask_size: 32
  scene_feature_dim: 8
  embedding_noise: 0.35
  text_turn_fraction: 0.1
  modes: [hybrid, text_only, embedding_only]
  embedding_required: false
metrics:
  instances: 200
  mask_size: 48
  jitter: 0.05
  frames: 24
pipeline:
  stages: ["1.1", "1.2", "1.3", "2.1", "2.2", "2.3", "3"]
)";

// Maps whose keys are free-form rather than fixed by the defaults.
bool open_map(const std::string& path) { return path == "datagen.counts"; }

YAML::Node sorted_map(const YAML::Node& node) {
  std::map<std::string, YAML::Node> items;
  for (const auto& kv : node) items[kv.first.as<std::string>()] = kv.second;
  YAML::Node out(YAML::NodeType::Map);
  for (const auto& [k, v] : items) out[k] = v;
  return out;
}

void merge(YAML::Node base, const YAML::Node& over, const std::string& path) {
  if (!over.IsMap()) fail(ErrorCode::ConfigError, "'" + path + "' must be a mapping");
  for (const auto& kv : over) {
    const auto key = kv.first.as<std::string>();
    const std::string child = path.empty() ? key : path + "." + key;
    if (open_map(path)) {
      base[key] = YAML::Clone(kv.second);
      continue;
    }
    if (!base[key]) fail(ErrorCode::ConfigError, "unknown config key '" + child + "'");
    YAML::Node target = base[key];
    if (target.IsMap() && !open_map(child)) {
      merge(target, kv.second, child);
    } else if (open_map(child)) {
      if (!kv.second.IsMap() && !kv.second.IsNull()) {
        fail(ErrorCode::ConfigError, "'" + child + "' must be a mapping");
      }
      YAML::Node merged = YAML::Clone(target);
      if (kv.second.IsMap()) {
        for (const auto& item : kv.second) merged[item.first.as<std::string>()] = YAML::Clone(item.second);
      }
      base[key] = sorted_map(merged);
    } else {
      base[key] = YAML::Clone(kv.second);
    }
  }
}

YAML::Node parse_yaml(std::string_view text) {
  try {
    return YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    fail(ErrorCode::ConfigError, std::string("invalid YAML: ") + e.what());
  }
}

YAML::Node at(const YAML::Node& root, std::string_view dotted) {
  std::string path(dotted);
  std::size_t start = 0;
  YAML::Node cur = root;
  while (true) {
    const auto dot = path.find('.', start);
    const auto key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!cur.IsMap() || !cur[key]) fail(ErrorCode::ConfigError, "missing config key '" + path + "'");
    cur.reset(cur[key]);
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return cur;
}

template <class T>
T get(const YAML::Node& root, std::string_view dotted) {
  const YAML::Node node = at(root, dotted);
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail(ErrorCode::ConfigError, "config key '" + std::string(dotted) + "' has the wrong type");
  }
}

void emit(YAML::Emitter& out, const YAML::Node& node, bool flow) {
  switch (node.Type()) {
    case YAML::NodeType::Map:
      if (flow) out << YAML::Flow;
      out << YAML::BeginMap;
      for (const auto& kv : node) {
        out << YAML::Key << kv.first.as<std::string>() << YAML::Value;
        emit(out, kv.second, flow || kv.second.IsSequence());
      }
      out << YAML::EndMap;
      break;
    case YAML::NodeType::Sequence:
      out << YAML::Flow << YAML::BeginSeq;
      for (const auto& item : node) emit(out, item, true);
      out << YAML::EndSeq;
      break;
    case YAML::NodeType::Scalar: {
      const auto text = node.Scalar();
      if (node.Tag() == "!") {
        out << YAML::DoubleQuoted << text;
      } else {
        out << text;
      }
      break;
    }
    default:
      out << YAML::Null;
  }
}

}  // namespace

std::string_view default_config_yaml() { return kDefaults; }

struct Config::Impl {
  YAML::Node root;
};

Config::Config() : impl_(std::make_unique<Impl>()) { impl_->root = parse_yaml(kDefaults); }
Config::~Config() = default;
Config::Config(const Config& other) : impl_(std::make_unique<Impl>()) {
  impl_->root = YAML::Clone(other.impl_->root);
}
Config& Config::operator=(const Config& other) {
  if (this != &other) impl_->root = YAML::Clone(other.impl_->root);
  return *this;
}

Config Config::defaults() { return Config(); }

Config Config::from_yaml(std::string_view text) {
  Config cfg;
  const YAML::Node user = parse_yaml(text);
  if (user.IsNull()) return cfg;
  merge(cfg.impl_->root, user, "");
  cfg.stages();
  return cfg;
}

Config Config::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return from_yaml(text.str());
}

void Config::set(std::string_view dotted_key, std::string_view value) {
  const std::string key(dotted_key);
  YAML::Node user(YAML::NodeType::Map);
  YAML::Node leaf = user;
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    parts.push_back(key.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  std::string text;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    text += std::string(2 * i, ' ') + parts[i] + ":";
    text += i + 1 == parts.size() ? " " + std::string(value) + "\n" : "\n";
  }
  merge(impl_->root, parse_yaml(text), "");
  stages();
}

std::string Config::dump() const {
  YAML::Emitter out;
  emit(out, impl_->root, false);
  return std::string(out.c_str()) + "\n";
}

std::string Config::hash() const { return sha256_hex(dump()); }

std::uint64_t Config::seed() const { return get<std::uint64_t>(impl_->root, "seed"); }

std::string Config::output_dir() const { return get<std::string>(impl_->root, "output_dir"); }

GenConfig Config::gen_config() const {
  const auto& r = impl_->root;
  const auto scale = get<std::string>(r, "datagen.scale");
  GenConfig cfg;
  if (scale == "paper") {
    cfg = GenConfig::paper_scale();
  } else if (scale == "desk") {
    cfg = GenConfig::desk_scale(get<int>(r, "datagen.per_function"));
  } else {
    fail(ErrorCode::ConfigError, "datagen.scale must be 'desk' or 'paper'");
  }
  for (const auto& kv : at(r, "datagen.counts")) {
    const auto id = kv.first.as<std::string>();
    int count = 0;
    try {
      count = kv.second.as<int>();
    } catch (const YAML::Exception&) {
      fail(ErrorCode::ConfigError, "datagen.counts." + id + " must be an integer");
    }
    if (find_function(id)) {
      cfg.function_counts[id] = count;
    } else {
      cfg.grounding_counts[std::string(grounding_task_name(parse_grounding_task(id)))] = count;
    }
  }
  cfg.seed = seed();
  cfg.precision = get<int>(r, "datagen.precision");
  return cfg;
}

AlignConfig Config::align_config() const {
  const auto& r = impl_->root;
  AlignConfig c;
  c.task_specific_dim = get<int>(r, "align.task_specific_dim");
  c.task_invariant_dim = get<int>(r, "align.task_invariant_dim");
  c.caption_dim = get<int>(r, "align.caption_dim");
  c.condition_dim = get<int>(r, "align.condition_dim");
  c.signal_tokens = get<int>(r, "align.signal_tokens");
  c.filler_tokens = get<int>(r, "align.filler_tokens");
  c.samples_per_module = get<int>(r, "align.samples_per_module");
  c.epochs = get<int>(r, "align.epochs");
  c.batch_size = get<int>(r, "align.batch_size");
  c.learning_rate = get<double>(r, "align.learning_rate");
  c.alignment_weight = get<double>(r, "align.alignment_weight");
  c.seed = seed();
  return c;
}

synergy::SynergyConfig Config::synergy_config() const {
  const auto& r = impl_->root;
  synergy::SynergyConfig c;
  c.tasks.clear();
  for (const auto& t : at(r, "synergy.tasks")) {
    synergy::TaskDefinition def;
    std::string source;
    try {
      source = t["source"].as<std::string>();
      def.label_function = t["label"].as<int>();
    } catch (const YAML::Exception&) {
      fail(ErrorCode::ConfigError, "synergy.tasks entries need 'source' and 'label'");
    }
    if (source == "shared") {
      def.source = synergy::LabelSource::Shared;
    } else if (source == "private") {
      def.source = synergy::LabelSource::Private;
    } else {
      fail(ErrorCode::ConfigError, "synergy task source must be 'shared' or 'private'");
    }
    c.tasks.push_back(def);
  }
  c.shared_latent = get<int>(r, "synergy.shared_latent");
  c.private_latent = get<int>(r, "synergy.private_latent");
  c.shared_input = get<int>(r, "synergy.shared_input");
  c.private_input = get<int>(r, "synergy.private_input");
  c.shared_dim = get<int>(r, "synergy.shared_dim");
  c.private_dim = get<int>(r, "synergy.private_dim");
  c.seq_len = get<int>(r, "synergy.seq_len");
  c.head_hidden = get<int>(r, "synergy.head_hidden");
  c.input_noise = get<double>(r, "synergy.input_noise");
  c.signature_scale = get<double>(r, "synergy.signature_scale");
  c.train_per_task = get<int>(r, "synergy.train_per_task");
  c.heldout_per_task = get<int>(r, "synergy.heldout_per_task");
  c.epochs = get<int>(r, "synergy.epochs");
  c.batch_size = get<int>(r, "synergy.batch_size");
  c.learning_rate = get<double>(r, "synergy.learning_rate");
  c.disc_learning_rate = get<double>(r, "synergy.disc_learning_rate");
  c.weight_decay = get<double>(r, "synergy.weight_decay");
  c.lambda = get<double>(r, "synergy.lambda");
  c.warmup_epochs = get<int>(r, "synergy.warmup_epochs");
  c.alternating = get<bool>(r, "synergy.alternating");
  c.inner_steps = get<int>(r, "synergy.inner_steps");
  c.disc.layers = get<int>(r, "synergy.discriminator.layers");
  c.disc.width = get<int>(r, "synergy.discriminator.width");
  c.disc.ffn_hidden = get<int>(r, "synergy.discriminator.ffn_hidden");
  c.disc.head_hidden = get<int>(r, "synergy.discriminator.head_hidden");
  c.probe_epochs = get<int>(r, "synergy.probe_epochs");
  c.probe_learning_rate = get<double>(r, "synergy.probe_learning_rate");
  c.probe_batch_size = get<int>(r, "synergy.probe_batch_size");
  c.seed = seed();
  return c;
}

MatrixConfig Config::matrix_config() const {
  const auto& r = impl_->root;
  MatrixConfig m;
  m.base = synergy_config();
  m.base.train_per_task = get<int>(r, "matrix.train_per_task");
  m.base.heldout_per_task = get<int>(r, "matrix.heldout_per_task");
  m.base.epochs = get<int>(r, "matrix.epochs");
  m.base.batch_size = get<int>(r, "matrix.batch_size");
  m.base.lambda = get<double>(r, "matrix.lambda");
  m.seeds = get<int>(r, "matrix.seeds");
  if (m.seeds < 1) fail(ErrorCode::ConfigError, "matrix.seeds must be >= 1");
  const int k = static_cast<int>(m.base.tasks.size());
  auto read_pair = [&](const YAML::Node& node, const std::string& what) {
    if (!node.IsSequence() || node.size() != 2) fail(ErrorCode::ConfigError, what + " must be [i, j]");
    const auto p = std::make_pair(node[0].as<int>(), node[1].as<int>());
    if (p.first < 0 || p.second < 0 || p.first >= k || p.second >= k || p.first == p.second) {
      fail(ErrorCode::ConfigError, what + " must name two distinct tasks");
    }
    return p;
  };
  for (const auto& p : at(r, "matrix.pairs")) m.pairs.push_back(read_pair(p, "matrix.pairs entry"));
  m.synergistic_pair = read_pair(at(r, "matrix.synergistic_pair"), "matrix.synergistic_pair");
  m.control_pair = read_pair(at(r, "matrix.control_pair"), "matrix.control_pair");
  return m;
}

AblationConfig Config::ablation_config() const {
  const auto& r = impl_->root;
  AblationConfig a;
  a.corpus.turns = get<int>(r, "ablation.turns");
  a.corpus.task_specific_dim = get<int>(r, "ablation.task_specific_dim");
  a.corpus.task_invariant_dim = get<int>(r, "ablation.task_invariant_dim");
  a.corpus.mask_size = get<int>(r, "ablation.mask_size");
  a.corpus.scene_feature_dim = get<int>(r, "ablation.scene_feature_dim");
  a.corpus.embedding_noise = get<double>(r, "ablation.embedding_noise");
  a.corpus.text_turn_fraction = get<double>(r, "ablation.text_turn_fraction");
  a.corpus.seed = seed();
  for (const auto& m : at(r, "ablation.modes")) {
    try {
      a.modes.push_back(parse_message_mode(m.as<std::string>()));
    } catch (const Error& e) {
      fail(ErrorCode::ConfigError, e.what());
    }
  }
  a.embedding_required = get<bool>(r, "ablation.embedding_required");
  return a;
}

MetricsConfig Config::metrics_config() const {
  const auto& r = impl_->root;
  MetricsConfig m;
  m.instances = get<int>(r, "metrics.instances");
  m.mask_size = get<int>(r, "metrics.mask_size");
  m.jitter = get<double>(r, "metrics.jitter");
  m.frames = get<int>(r, "metrics.frames");
  if (m.instances < 1 || m.mask_size < 4 || m.frames < 1 || m.jitter < 0.0) {
    fail(ErrorCode::ConfigError, "metrics settings out of range");
  }
  return m;
}

std::vector<std::string> Config::stages() const {
  static const std::vector<std::string> kOrder = {"1.1", "1.2", "1.3", "2.1", "2.2", "2.3", "3"};
  std::vector<std::string> out;
  for (const auto& s : at(impl_->root, "pipeline.stages")) out.push_back(s.as<std::string>());
  std::size_t last = 0;
  bool first = true;
  for (const auto& s : out) {
    const auto it = std::find(kOrder.begin(), kOrder.end(), s);
    if (it == kOrder.end()) fail(ErrorCode::ConfigError, "unknown pipeline stage '" + s + "'");
    const auto pos = static_cast<std::size_t>(it - kOrder.begin());
    if (!first && pos <= last) {
      fail(ErrorCode::ConfigError, "pipeline stage " + s + " is out of order (stages run 1.1, 1.2, 1.3, "
                                   "2.1, 2.2, 2.3, 3)");
    }
    last = pos;
    first = false;
  }
  return out;
}

}  // namespace visor
