// Copyright 2026 The airlens Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/* C interface to airlens. Every call returns a status; on failure the
   message is available from airlens_last_error() on the calling thread
   until the next failing call there. Strings returned through char** are
   owned by the caller and released with airlens_string_free. */
#ifndef AIRLENS_AIRLENS_H_
#define AIRLENS_AIRLENS_H_

#include <stdint.h>

#if defined(_WIN32)
#define AIRLENS_API __declspec(dllexport)
#else
#define AIRLENS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum airlens_status {
  AIRLENS_OK = 0,
  AIRLENS_ERR_INVALID_ARGUMENT = 1,
  AIRLENS_ERR_PRECONDITION = 2,
  AIRLENS_ERR_UNDEFINED = 3,
  AIRLENS_ERR_NUMERIC = 4,
  AIRLENS_ERR_CONFIG = 5,
  AIRLENS_ERR_IO = 6,
  AIRLENS_ERR_INTERNAL = 7
} airlens_status;

typedef enum airlens_format {
  AIRLENS_FORMAT_CSV = 0,
  AIRLENS_FORMAT_JSON = 1
} airlens_format;

typedef struct airlens_config airlens_config;

AIRLENS_API const char* airlens_version(void);
AIRLENS_API const char* airlens_status_name(airlens_status status);
/* Empty string when the thread has seen no failure. */
AIRLENS_API const char* airlens_last_error(void);
AIRLENS_API void airlens_string_free(char* s);

AIRLENS_API airlens_status airlens_config_default(airlens_config** out);
AIRLENS_API airlens_status airlens_config_parse(const char* text, airlens_config** out);
AIRLENS_API airlens_status airlens_config_load(const char* path, airlens_config** out);
/* Overrides one key with the same syntax as the config file. */
AIRLENS_API airlens_status airlens_config_set(airlens_config* cfg, const char* key, const char* value);
AIRLENS_API airlens_status airlens_config_to_text(const airlens_config* cfg, char** out);
AIRLENS_API airlens_status airlens_config_output_dir(const airlens_config* cfg, char** out);
AIRLENS_API void airlens_config_free(airlens_config* cfg);

/* Runs write into the configured output directory. When written is not
   NULL it receives the artifact names, one per line. */
AIRLENS_API airlens_status airlens_simulate(const airlens_config* cfg, airlens_format format, char** written);
AIRLENS_API airlens_status airlens_attribute(const airlens_config* cfg, airlens_format format, char** written);
/* heads_path may be NULL; an existing file with no heads means an empty
   sensitive set. */
AIRLENS_API airlens_status airlens_rectify(const airlens_config* cfg, airlens_format format, const char* heads_path,
                                           char** written);
AIRLENS_API airlens_status airlens_theory(const airlens_config* cfg, airlens_format format, char** written);
AIRLENS_API airlens_status airlens_heatmap(const char* matrix_csv, const char* svg_out, const char* title);

#ifdef __cplusplus
}
#endif

#endif /* AIRLENS_AIRLENS_H_ */
