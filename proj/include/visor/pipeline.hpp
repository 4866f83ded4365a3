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

// Subcommand runners. Each writes its artifacts under an output directory
// and finishes with manifest.json listing every artifact with its digest.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "visor/config.hpp"
#include "visor/protocol.hpp"

namespace visor {

inline constexpr std::string_view kManifestSchema = "visor.manifest.v1";

std::string_view library_version() noexcept;

struct Artifact {
  std::string path;  // relative to the output directory, '/' separated
  std::string sha256;
  std::uint64_t bytes = 0;
};

struct RunOutcome {
  std::string subcommand;
  std::vector<Artifact> artifacts;  // sorted by path, manifest excluded
  std::string manifest_json;
  std::string summary_json;  // headline numbers of the run
};

/// Subcommands that write artifacts.
const std::vector<std::string>& run_subcommands();

/// Runs one subcommand. Without `force`, an output directory that already
/// holds a manifest is refused with IoError.
RunOutcome run_subcommand(std::string_view name, const Config& config,
                          const std::filesystem::path& out_dir, bool force);

/// Parse kinds accepted by parse_to_json.
enum class ParseKind { Envelope, ImageCaption, VideoCaption, Box, Track, ImageAnswer, VideoAnswer };

ParseKind parse_kind(std::string_view name);

/// Parses `raw` and returns the structure as JSON, including the canonical
/// re-serialization under "canonical".
std::string parse_to_json(ParseKind kind, std::string_view raw, ParseMode mode);

/// Region metrics used by the metric passes, as "metric,value,count" CSV.
struct MetricRow {
  std::string metric;
  double value = 0.0;
  std::size_t count = 0;
};

std::string metrics_csv(const std::vector<MetricRow>& rows);

/// Seeded synthetic predictions scored against their references.
std::vector<MetricRow> synthetic_metric_pass(const MetricsConfig& cfg, std::uint64_t seed);

}  // namespace visor
