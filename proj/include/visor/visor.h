/* Copyright 2026 The Visor Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef VISOR_VISOR_H_
#define VISOR_VISOR_H_

/* Stable C interface of libvisor.
 *
 * Every function returns a visor_status. On failure the thread-local message
 * from visor_last_error_message() describes the problem. Output strings are
 * returned as visor_buffer handles owned by the caller. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define VISOR_API __declspec(dllexport)
#else
#define VISOR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum visor_status {
  VISOR_OK = 0,
  VISOR_UNBALANCED_TAGS = 1,
  VISOR_UNKNOWN_MODULE = 2,
  VISOR_MALFORMED_REGION = 3,
  VISOR_NON_CANONICAL_BOX = 4,
  VISOR_MALFORMED_PHRASE_LINE = 5,
  VISOR_MISSING_SPAN = 6,
  VISOR_SPAN_ON_IMAGE = 7,
  VISOR_INVALID_SPAN = 8,
  VISOR_DUPLICATE_BLOCK = 9,
  VISOR_INCOMPLETE_TASK = 10,
  VISOR_MALFORMED_ANSWER = 11,
  VISOR_DEGENERATE_BOXES = 20,
  VISOR_DIMENSION_MISMATCH = 21,
  VISOR_BOTH_EMPTY = 22,
  VISOR_EMPTY_DATASET = 23,
  VISOR_EMPTY_REFERENCE = 24,
  VISOR_EMPTY_MASK = 30,
  VISOR_SHAPE_MISMATCH = 40,
  VISOR_INDEX_OUT_OF_VOCAB = 41,
  VISOR_NON_FINITE_LOSS = 42,
  VISOR_EMPTY_SEQUENCE = 50,
  VISOR_DIVERGENCE_DETECTED = 51,
  VISOR_SPECIALIST_FAILURE = 60,
  VISOR_UNSUPPORTED_TASK = 70,
  VISOR_INVALID_ARGUMENT = 90,
  VISOR_CONFIG_ERROR = 91,
  VISOR_IO_ERROR = 92,
  VISOR_INTERNAL = 99
} visor_status;

typedef struct visor_buffer visor_buffer;
typedef struct visor_mask visor_mask;
typedef struct visor_config visor_config;
typedef struct visor_registry visor_registry;

VISOR_API const char* visor_version(void);
/* Name of the status such as "NonCanonicalBox"; never NULL. */
VISOR_API const char* visor_status_name(visor_status status);
/* Message of the last failure on this thread, "" after a success. */
VISOR_API const char* visor_last_error_message(void);

/* ---- buffers */
VISOR_API const char* visor_buffer_data(const visor_buffer* buffer);
VISOR_API size_t visor_buffer_size(const visor_buffer* buffer);
VISOR_API void visor_buffer_free(visor_buffer* buffer);

/* ---- parsing
 * kind: "envelope", "image-caption", "video-caption", "box", "track",
 * "image-answer" or "video-answer". strict != 0 rejects non-canonical boxes. */
VISOR_API visor_status visor_parse_text(const char* kind, const char* raw, size_t raw_size, int strict,
                                        visor_buffer** json_out);

/* ---- metrics; boxes are {xl, yt, xr, yb} */
VISOR_API visor_status visor_box_iou(const double a[4], const double b[4], double* out);
VISOR_API visor_status visor_temporal_iou(int64_t a_start, int64_t a_end, int64_t b_start, int64_t b_end,
                                          double* out);

/* Row-major bits, one byte per pixel, nonzero is foreground. */
VISOR_API visor_status visor_mask_create(int width, int height, const uint8_t* bits, visor_mask** out);
VISOR_API visor_status visor_mask_from_rle(int width, int height, const char* rle, visor_mask** out);
VISOR_API visor_status visor_mask_to_rle(const visor_mask* mask, visor_buffer** out);
VISOR_API size_t visor_mask_count(const visor_mask* mask);
VISOR_API void visor_mask_free(visor_mask* mask);
VISOR_API visor_status visor_mask_iou(const visor_mask* prediction, const visor_mask* reference, double* out);
/* tolerance < 0 selects the default for the mask size. */
VISOR_API visor_status visor_boundary_f(const visor_mask* prediction, const visor_mask* reference,
                                        int tolerance, double* out);

/* ---- configuration; yaml may be NULL for the defaults */
VISOR_API visor_status visor_config_create(const char* yaml, visor_config** out);
VISOR_API visor_status visor_config_from_file(const char* path, visor_config** out);
VISOR_API visor_status visor_config_set(visor_config* config, const char* dotted_key, const char* value);
VISOR_API visor_status visor_config_dump(const visor_config* config, visor_buffer** out);
VISOR_API visor_status visor_config_hash(const visor_config* config, visor_buffer** out);
VISOR_API visor_status visor_config_output_dir(const visor_config* config, visor_buffer** out);
VISOR_API void visor_config_free(visor_config* config);
VISOR_API const char* visor_default_config(void);

/* ---- module registry and routing */
VISOR_API visor_status visor_registry_create(visor_registry** out);
VISOR_API size_t visor_registry_size(const visor_registry* registry);
/* JSON array describing every registered module. */
VISOR_API visor_status visor_registry_describe(const visor_registry* registry, visor_buffer** out);
/* Parses `envelope` leniently and routes it against an empty workspace plus
 * the assets named in `workspace_kinds` (comma separated: "image,video,mask").
 * Writes the execution result JSON. */
VISOR_API visor_status visor_registry_route(const visor_registry* registry, const char* envelope,
                                            const char* workspace_kinds, visor_buffer** result_json);
VISOR_API void visor_registry_free(visor_registry* registry);

/* ---- subcommands
 * name: "gen-data", "eval-metrics", "train-align", "train-synergy",
 * "ablate-msgpass", "synergy-matrix" or "pipeline". Writes the manifest JSON
 * and, when summary_out is non-NULL, a JSON summary of the headline numbers. */
VISOR_API visor_status visor_run(const char* name, const visor_config* config, const char* out_dir, int force,
                                 visor_buffer** manifest_out, visor_buffer** summary_out);

#ifdef __cplusplus
}
#endif

#endif /* VISOR_VISOR_H_ */
