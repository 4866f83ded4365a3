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

// visor-cli: command-line front end over libvisor's C interface.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "visor/visor.h"

namespace {

struct CliFailure {
  int code;
  std::string status;
  std::string message;
};

[[noreturn]] void raise_status(visor_status status) {
  throw CliFailure{static_cast<int>(status), visor_status_name(status), visor_last_error_message()};
}

void check(visor_status status) {
  if (status != VISOR_OK) raise_status(status);
}

std::string take(visor_buffer* buffer) {
  std::string out(visor_buffer_data(buffer), visor_buffer_size(buffer));
  visor_buffer_free(buffer);
  return out;
}

using ConfigHandle = std::unique_ptr<visor_config, decltype(&visor_config_free)>;

struct RunFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<long long> seed;
  std::string out_dir;
  bool force = false;
  std::optional<int> count;
  bool paper_scale = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& flags, bool datagen) {
  cmd->add_option("--config", flags.config_path, "YAML file merged onto the defaults");
  cmd->add_option("--set", flags.overrides, "Override one key, e.g. --set synergy.epochs=50")->take_all();
  cmd->add_option("--seed", flags.seed, "Global seed");
  cmd->add_option("--out", flags.out_dir, "Output directory (default: $VISOR_OUT_DIR, then output_dir)");
  cmd->add_flag("--force", flags.force, "Overwrite a previous run in the output directory");
  if (datagen) {
    cmd->add_option("--count", flags.count, "Samples per function and grounding task")->check(CLI::NonNegativeNumber);
    cmd->add_flag("--paper-scale", flags.paper_scale, "Emit every function at its full table amount");
  }
}

ConfigHandle load_config(const RunFlags& flags) {
  visor_config* raw = nullptr;
  if (flags.config_path.empty()) {
    check(visor_config_create(nullptr, &raw));
  } else {
    check(visor_config_from_file(flags.config_path.c_str(), &raw));
  }
  ConfigHandle config(raw, &visor_config_free);
  for (const auto& item : flags.overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw CliFailure{VISOR_INVALID_ARGUMENT, visor_status_name(VISOR_INVALID_ARGUMENT),
                       "--set expects key=value, got '" + item + "'"};
    }
    check(visor_config_set(config.get(), item.substr(0, eq).c_str(), item.substr(eq + 1).c_str()));
  }
  if (flags.seed) check(visor_config_set(config.get(), "seed", std::to_string(*flags.seed).c_str()));
  if (flags.paper_scale) check(visor_config_set(config.get(), "datagen.scale", "paper"));
  if (flags.count) {
    check(visor_config_set(config.get(), "datagen.scale", "desk"));
    check(visor_config_set(config.get(), "datagen.per_function", std::to_string(*flags.count).c_str()));
  }
  return config;
}

std::string resolve_out_dir(const RunFlags& flags, const visor_config* config) {
  if (!flags.out_dir.empty()) return flags.out_dir;
  if (const char* env = std::getenv("VISOR_OUT_DIR"); env && *env) return env;
  visor_buffer* buf = nullptr;
  check(visor_config_output_dir(config, &buf));
  return take(buf);
}

int run(const std::string& name, const RunFlags& flags) {
  ConfigHandle config = load_config(flags);
  const std::string out_dir = resolve_out_dir(flags, config.get());
  visor_buffer* manifest = nullptr;
  visor_buffer* summary = nullptr;
  check(visor_run(name.c_str(), config.get(), out_dir.c_str(), flags.force ? 1 : 0, &manifest, &summary));
  take(manifest);
  std::cout << take(summary) << "\n";
  return 0;
}

int parse(const std::string& kind, bool strict, const std::string& path) {
  std::string text;
  if (path.empty() || path == "-") {
    text.assign(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
  } else {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CliFailure{VISOR_IO_ERROR, visor_status_name(VISOR_IO_ERROR), "cannot read " + path};
    text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  visor_buffer* out = nullptr;
  check(visor_parse_text(kind.c_str(), text.data(), text.size(), strict ? 1 : 0, &out));
  std::cout << take(out) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"visor-cli: invocation protocol, grounding metrics, data generation and training harnesses"};
  app.require_subcommand(0, 1);
  bool print_defaults = false;
  app.add_flag("--print-defaults", print_defaults, "Print the default configuration and exit");
  app.set_version_flag("--version", std::string(visor_version()));

  std::string kind = "envelope";
  bool strict = false;
  std::string input;
  auto* parse_cmd = app.add_subcommand("parse", "Parse a decision-model output and print it as JSON");
  parse_cmd->add_option("--kind", kind, "envelope, image-caption, video-caption, box, track, image-answer, video-answer");
  parse_cmd->add_flag("--strict", strict, "Reject non-canonical regions");
  parse_cmd->add_option("input", input, "File to parse (default: stdin)");

  struct Runner {
    std::string name;
    std::string help;
    RunFlags flags;
    CLI::App* cmd = nullptr;
  };
  std::vector<Runner> runners = {
      {"gen-data", "Generate instruction-tuning samples as JSONL", {}},
      {"eval-metrics", "Score seeded synthetic predictions with every region metric", {}},
      {"train-align", "Train the decoder-alignment stub", {}},
      {"train-synergy", "Adversarial shared/private training on the synthetic benchmark", {}},
      {"ablate-msgpass", "Message-passing ablation over the scripted corpus", {}},
      {"synergy-matrix", "Pairwise co-training improvements over several seeds", {}},
      {"pipeline", "Run the configured training stages in order", {}},
  };
  for (auto& r : runners) {
    r.cmd = app.add_subcommand(r.name, r.help);
    add_run_flags(r.cmd, r.flags, r.name == "gen-data");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (print_defaults) {
      std::cout << visor_default_config();
      return 0;
    }
    if (parse_cmd->parsed()) return parse(kind, strict, input);
    for (const auto& r : runners) {
      if (r.cmd->parsed()) return run(r.name, r.flags);
    }
    std::cout << app.help();
    return 0;
  } catch (const CliFailure& f) {
    nlohmann::ordered_json err;
    err["error"] = {{"code", f.code}, {"status", f.status}, {"message", f.message}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
}
