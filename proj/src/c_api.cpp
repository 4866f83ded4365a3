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

#include "visor/visor.h"

#include <new>
#include <sstream>
#include <string>

#include <json.hpp>

#include "visor/config.hpp"
#include "visor/dispatch.hpp"
#include "visor/error.hpp"
#include "visor/geometry.hpp"
#include "visor/pipeline.hpp"
#include "visor/protocol.hpp"

struct visor_buffer {
  std::string bytes;
};

struct visor_mask {
  visor::BinaryMask mask;
};

struct visor_config {
  visor::Config config;
};

struct visor_registry {
  visor::Registry registry;
};

namespace {

thread_local std::string g_last_error;

template <class F>
visor_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return VISOR_OK;
  } catch (const visor::Error& e) {
    g_last_error = e.what();
    return static_cast<visor_status>(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown failure";
  }
  return VISOR_INTERNAL;
}

void need(const void* p, const char* what) {
  if (p == nullptr) visor::fail(visor::ErrorCode::InvalidArgument, std::string(what) + " is NULL");
}

visor_buffer* make_buffer(std::string bytes) { return new visor_buffer{std::move(bytes)}; }

visor::BoundingBox as_box(const double v[4]) { return {v[0], v[1], v[2], v[3]}; }

}  // namespace

extern "C" {

const char* visor_version(void) {
  static const std::string version(visor::library_version());
  return version.c_str();
}

const char* visor_status_name(visor_status status) {
  return visor::error_code_name(static_cast<visor::ErrorCode>(status)).data();
}

const char* visor_last_error_message(void) { return g_last_error.c_str(); }

const char* visor_buffer_data(const visor_buffer* buffer) { return buffer ? buffer->bytes.c_str() : ""; }

size_t visor_buffer_size(const visor_buffer* buffer) { return buffer ? buffer->bytes.size() : 0; }

void visor_buffer_free(visor_buffer* buffer) { delete buffer; }

visor_status visor_parse_text(const char* kind, const char* raw, size_t raw_size, int strict,
                              visor_buffer** json_out) {
  return guarded([&] {
    need(kind, "kind");
    need(raw, "raw");
    need(json_out, "json_out");
    const auto mode = strict ? visor::ParseMode::Strict : visor::ParseMode::Lenient;
    *json_out = make_buffer(visor::parse_to_json(visor::parse_kind(kind), std::string_view(raw, raw_size), mode));
  });
}

visor_status visor_box_iou(const double a[4], const double b[4], double* out) {
  return guarded([&] {
    need(a, "a");
    need(b, "b");
    need(out, "out");
    *out = visor::box_iou(as_box(a), as_box(b));
  });
}

visor_status visor_temporal_iou(int64_t a_start, int64_t a_end, int64_t b_start, int64_t b_end, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = visor::temporal_iou({a_start, a_end}, {b_start, b_end});
  });
}

visor_status visor_mask_create(int width, int height, const uint8_t* bits, visor_mask** out) {
  return guarded([&] {
    need(out, "out");
    if (width <= 0 || height <= 0) visor::fail(visor::ErrorCode::InvalidArgument, "mask size must be positive");
    visor::BinaryMask mask(width, height);
    if (bits != nullptr) {
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) mask.set(x, y, bits[static_cast<size_t>(y) * width + x] != 0);
      }
    }
    *out = new visor_mask{std::move(mask)};
  });
}

visor_status visor_mask_from_rle(int width, int height, const char* rle, visor_mask** out) {
  return guarded([&] {
    need(rle, "rle");
    need(out, "out");
    *out = new visor_mask{visor::BinaryMask::from_rle(width, height, rle)};
  });
}

visor_status visor_mask_to_rle(const visor_mask* mask, visor_buffer** out) {
  return guarded([&] {
    need(mask, "mask");
    need(out, "out");
    *out = make_buffer(mask->mask.to_rle());
  });
}

size_t visor_mask_count(const visor_mask* mask) { return mask ? mask->mask.count() : 0; }

void visor_mask_free(visor_mask* mask) { delete mask; }

visor_status visor_mask_iou(const visor_mask* prediction, const visor_mask* reference, double* out) {
  return guarded([&] {
    need(prediction, "prediction");
    need(reference, "reference");
    need(out, "out");
    *out = visor::mask_iou(prediction->mask, reference->mask);
  });
}

visor_status visor_boundary_f(const visor_mask* prediction, const visor_mask* reference, int tolerance,
                              double* out) {
  return guarded([&] {
    need(prediction, "prediction");
    need(reference, "reference");
    need(out, "out");
    const auto& ref = reference->mask;
    const int tol = tolerance < 0 ? visor::default_boundary_tolerance(ref.width(), ref.height()) : tolerance;
    *out = visor::boundary_f(prediction->mask, ref, tol);
  });
}

visor_status visor_config_create(const char* yaml, visor_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new visor_config{yaml ? visor::Config::from_yaml(yaml) : visor::Config::defaults()};
  });
}

visor_status visor_config_from_file(const char* path, visor_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new visor_config{visor::Config::from_file(path)};
  });
}

visor_status visor_config_set(visor_config* config, const char* dotted_key, const char* value) {
  return guarded([&] {
    need(config, "config");
    need(dotted_key, "dotted_key");
    need(value, "value");
    visor::Config next = config->config;
    next.set(dotted_key, value);
    config->config = next;
  });
}

visor_status visor_config_dump(const visor_config* config, visor_buffer** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    *out = make_buffer(config->config.dump());
  });
}

visor_status visor_config_hash(const visor_config* config, visor_buffer** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    *out = make_buffer(config->config.hash());
  });
}

visor_status visor_config_output_dir(const visor_config* config, visor_buffer** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    *out = make_buffer(config->config.output_dir());
  });
}

void visor_config_free(visor_config* config) { delete config; }

const char* visor_default_config(void) {
  static const std::string text(visor::default_config_yaml());
  return text.c_str();
}

visor_status visor_registry_create(visor_registry** out) {
  return guarded([&] {
    need(out, "out");
    *out = new visor_registry{visor::build_registry()};
  });
}

size_t visor_registry_size(const visor_registry* registry) { return registry ? registry->registry.size() : 0; }

visor_status visor_registry_describe(const visor_registry* registry, visor_buffer** out) {
  return guarded([&] {
    need(registry, "registry");
    need(out, "out");
    auto names = [](const std::set<visor::Modality>& s) {
      nlohmann::ordered_json a = nlohmann::ordered_json::array();
      for (auto m : s) a.push_back(visor::modality_name(m));
      return a;
    };
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (const auto& spec : registry->registry.specs()) {
      list.push_back({{"key", spec.key()},
                      {"name", spec.name},
                      {"variant", spec.variant},
                      {"required_inputs", names(spec.required_inputs)},
                      {"optional_inputs", names(spec.optional_inputs)},
                      {"outputs", names(spec.outputs)},
                      {"requires_region", spec.requires_region},
                      {"accepts_embedding", spec.accepts_embedding}});
    }
    *out = make_buffer(list.dump());
  });
}

visor_status visor_registry_route(const visor_registry* registry, const char* envelope,
                                  const char* workspace_kinds, visor_buffer** result_json) {
  return guarded([&] {
    need(registry, "registry");
    need(envelope, "envelope");
    need(result_json, "result_json");
    visor::Workspace ws;
    if (workspace_kinds != nullptr) {
      std::stringstream kinds(workspace_kinds);
      std::string kind;
      while (std::getline(kinds, kind, ',')) {
        if (kind == "image") {
          ws.attach_image(64, 64, "c-api");
        } else if (kind == "video") {
          ws.attach_video(64, 64, 16, "c-api");
        } else if (kind == "mask") {
          visor::BinaryMask m(64, 64);
          for (int y = 16; y < 48; ++y) {
            for (int x = 16; x < 48; ++x) m.set(x, y);
          }
          ws.attach_mask(m);
        } else if (!kind.empty()) {
          visor::fail(visor::ErrorCode::InvalidArgument, "unknown workspace asset kind '" + kind + "'");
        }
      }
    }
    const auto env = visor::parse_envelope(envelope, visor::ParseMode::Lenient);
    *result_json = make_buffer(visor::route(env, ws, registry->registry).to_json());
  });
}

void visor_registry_free(visor_registry* registry) { delete registry; }

visor_status visor_run(const char* name, const visor_config* config, const char* out_dir, int force,
                       visor_buffer** manifest_out, visor_buffer** summary_out) {
  return guarded([&] {
    need(name, "name");
    need(config, "config");
    need(out_dir, "out_dir");
    const auto outcome = visor::run_subcommand(name, config->config, out_dir, force != 0);
    if (manifest_out) *manifest_out = make_buffer(outcome.manifest_json);
    if (summary_out) *summary_out = make_buffer(outcome.summary_json);
  });
}

}  // extern "C"
