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

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "visor/config.hpp"
#include "visor/error.hpp"
#include "visor/hash.hpp"
#include "visor/pipeline.hpp"

using namespace visor;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Ok;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("visor_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Everything small enough for a unit test.
Config tiny() {
  Config c;
  c.set("datagen.per_function", "2");
  c.set("align.epochs", "3");
  c.set("align.samples_per_module", "4");
  c.set("synergy.epochs", "2");
  c.set("synergy.train_per_task", "8");
  c.set("synergy.heldout_per_task", "8");
  c.set("synergy.probe_epochs", "2");
  c.set("metrics.instances", "10");
  return c;
}

}  // namespace

TEST_CASE("defaults dump canonically and hash stably") {
  const Config a;
  const Config b = Config::from_yaml(a.dump());
  CHECK(a.dump() == b.dump());
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() == sha256_hex(a.dump()));
  CHECK(a.seed() == 7);
  CHECK(a.stages().size() == 7);
  CHECK(Config::from_yaml("").dump() == a.dump());
}

TEST_CASE("YAML defaults agree with the synergy struct defaults") {
  const auto a = Config().synergy_config();
  const synergy::SynergyConfig b;
  CHECK(a.signature_scale == b.signature_scale);
  CHECK(a.input_noise == b.input_noise);
  CHECK(a.batch_size == b.batch_size);
  CHECK(a.epochs == b.epochs);
  CHECK(a.learning_rate == b.learning_rate);
  CHECK(a.disc_learning_rate == b.disc_learning_rate);
  CHECK(a.weight_decay == b.weight_decay);
  CHECK(a.lambda == b.lambda);
  CHECK(a.alternating == b.alternating);
  CHECK(a.train_per_task == b.train_per_task);
  CHECK(a.probe_epochs == b.probe_epochs);
  CHECK(a.probe_learning_rate == b.probe_learning_rate);
  CHECK(a.probe_batch_size == b.probe_batch_size);
  CHECK(a.seed == b.seed);
}

TEST_CASE("sha256 known answer") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("unknown and mistyped keys are config errors") {
  CHECK(code_of([] { Config::from_yaml("synergy:\n  epochz: 3\n"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { Config::from_yaml("seed: [1, 2]\n").seed(); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { Config::from_yaml("seed: 1\n  bad: : :\n"); }) == ErrorCode::ConfigError);
  Config c;
  CHECK(code_of([&] { c.set("align.nope", "1"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { Config::from_file("/nonexistent/visor.yaml"); }) == ErrorCode::IoError);
}

TEST_CASE("set overrides one value and changes the hash") {
  Config c;
  const auto before = c.hash();
  c.set("synergy.epochs", "5");
  CHECK(c.synergy_config().epochs == 5);
  CHECK(c.hash() != before);
  c.set("seed", "11");
  CHECK(c.synergy_config().seed == 11);
  c.set("datagen.counts", "{image_generation: 3}");
  CHECK(c.gen_config().function_counts.at("image_generation") == 3);
}

TEST_CASE("stages must follow training order") {
  Config c;
  CHECK(code_of([&] { c.set("pipeline.stages", "[\"1.1\", \"3\", \"1.3\"]"); }) == ErrorCode::ConfigError);
  CHECK(code_of([&] { c.set("pipeline.stages", "[\"4\"]"); }) == ErrorCode::ConfigError);
  c.set("pipeline.stages", "[\"1.3\", \"2.1\"]");
  CHECK(c.stages() == std::vector<std::string>{"1.3", "2.1"});
}

TEST_CASE("stage 3 needs the stage 1.3 checkpoint") {
  Config c = tiny();
  c.set("pipeline.stages", "[\"3\"]");
  const auto dir = scratch("stage3");
  CHECK(code_of([&] { run_subcommand("pipeline", c, dir, false); }) == ErrorCode::ConfigError);
  c.set("pipeline.stages", "[\"1.3\", \"3\"]");
  fs::remove_all(dir);
  const auto r = run_subcommand("pipeline", c, dir, false);
  const auto report = nlohmann::json::parse(slurp(dir / "stage_3/synergy_report.json"));
  CHECK(report["align_checkpoint_sha256"] == sha256_hex(slurp(dir / "stage_1.3/align_checkpoint.json")));
  fs::remove_all(dir);
}

TEST_CASE("gen-data with zero samples writes an empty file") {
  Config c;
  c.set("datagen.per_function", "0");
  const auto dir = scratch("zero");
  const auto r = run_subcommand("gen-data", c, dir, false);
  CHECK(fs::file_size(dir / "instructions.jsonl") == 0);
  CHECK(nlohmann::json::parse(r.summary_json)["samples"] == 0);
  fs::remove_all(dir);
}

TEST_CASE("reruns need force and replace the previous artifacts") {
  Config c = tiny();
  const auto dir = scratch("force");
  const auto first = run_subcommand("eval-metrics", c, dir, false);
  CHECK(code_of([&] { run_subcommand("eval-metrics", c, dir, false); }) == ErrorCode::IoError);
  const auto second = run_subcommand("train-align", c, dir, true);
  CHECK_FALSE(fs::exists(dir / "metrics.csv"));
  CHECK(fs::exists(dir / "align_history.csv"));
  fs::remove_all(dir);
}

TEST_CASE("manifest lists every artifact with its digest") {
  Config c = tiny();
  const auto dir = scratch("manifest");
  const auto r = run_subcommand("gen-data", c, dir, false);
  const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(m["schema"] == std::string(kManifestSchema));
  CHECK(m["subcommand"] == "gen-data");
  CHECK(m["config_hash"] == c.hash());
  CHECK(m["artifacts"].size() == r.artifacts.size());
  for (const auto& a : m["artifacts"]) {
    const auto body = slurp(dir / a["path"].get<std::string>());
    CHECK(a["sha256"] == sha256_hex(body));
    CHECK(a["bytes"] == body.size());
  }
  CHECK(slurp(dir / "config.yaml") == c.dump());
  fs::remove_all(dir);
}

TEST_CASE("small pipeline runs are reproducible") {
  Config c = tiny();
  const auto a = run_subcommand("pipeline", c, scratch("pipe_a"), false);
  const auto b = run_subcommand("pipeline", c, scratch("pipe_b"), false);
  REQUIRE(a.artifacts.size() == b.artifacts.size());
  for (std::size_t i = 0; i < a.artifacts.size(); ++i) {
    CHECK(a.artifacts[i].path == b.artifacts[i].path);
    CHECK(a.artifacts[i].sha256 == b.artifacts[i].sha256);
  }
  fs::remove_all(scratch("pipe_a"));
  fs::remove_all(scratch("pipe_b"));
}

TEST_CASE("metric pass and parse front end") {
  MetricsConfig mc;
  mc.instances = 20;
  const auto rows = synthetic_metric_pass(mc, 3);
  CHECK_FALSE(rows.empty());
  for (const auto& r : rows) {
    CHECK(r.value >= 0.0);
    CHECK(r.value <= 1.0);
  }
  CHECK(metrics_csv(rows).rfind("metric,value,count\n", 0) == 0);
  const auto j = nlohmann::json::parse(parse_to_json(ParseKind::Box, "(0.5, 0.5, 0.25, 0.75)", ParseMode::Lenient));
  CHECK(j["canonical"] == "(0.2500, 0.5000, 0.5000, 0.7500)");
  CHECK(code_of([] { parse_kind("nope"); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { run_subcommand("nope", Config{}, "x", false); }) == ErrorCode::InvalidArgument);
}
