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

// Run configuration: a YAML key-value tree whose defaults are compiled in.
// User files and --set overrides are merged onto the defaults; keys that the
// defaults do not define are rejected.

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "visor/datagen.hpp"
#include "visor/signal_bus.hpp"
#include "visor/synergy.hpp"

namespace visor {

struct MatrixConfig {
  synergy::SynergyConfig base;
  std::vector<std::pair<int, int>> pairs;
  int seeds = 5;
  std::pair<int, int> synergistic_pair{0, 1};
  std::pair<int, int> control_pair{2, 3};
};

struct AblationConfig {
  TurnCorpusConfig corpus;
  std::vector<MessageMode> modes;
  bool embedding_required = false;
};

struct MetricsConfig {
  int instances = 200;
  int mask_size = 48;
  double jitter = 0.05;
  int frames = 24;
};

class Config {
 public:
  Config();
  ~Config();
  Config(const Config&);
  Config& operator=(const Config&);

  static Config defaults();
  static Config from_yaml(std::string_view text);
  static Config from_file(const std::string& path);

  /// Replaces one value addressed by a dotted path ("synergy.epochs") with
  /// the YAML scalar or flow collection in `value`.
  void set(std::string_view dotted_key, std::string_view value);

  /// Canonical YAML; identical configs dump identically.
  std::string dump() const;
  /// SHA-256 of dump(), lowercase hex.
  std::string hash() const;

  std::uint64_t seed() const;
  std::string output_dir() const;
  GenConfig gen_config() const;
  AlignConfig align_config() const;
  synergy::SynergyConfig synergy_config() const;
  MatrixConfig matrix_config() const;
  AblationConfig ablation_config() const;
  MetricsConfig metrics_config() const;
  std::vector<std::string> stages() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string_view default_config_yaml();

}  // namespace visor
