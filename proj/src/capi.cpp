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

#include "airlens/airlens.h"

#include "airlens/config.hpp"
#include "airlens/error.hpp"
#include "airlens/io.hpp"
#include "airlens/pipeline.hpp"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

struct airlens_config {
  airlens::RunConfig cfg;
};

namespace {

thread_local std::string last_error;

airlens_status status_of(airlens::ErrorKind k) {
  using airlens::ErrorKind;
  switch (k) {
    case ErrorKind::invalid_argument: return AIRLENS_ERR_INVALID_ARGUMENT;
    case ErrorKind::precondition: return AIRLENS_ERR_PRECONDITION;
    case ErrorKind::undefined: return AIRLENS_ERR_UNDEFINED;
    case ErrorKind::numeric: return AIRLENS_ERR_NUMERIC;
    case ErrorKind::config: return AIRLENS_ERR_CONFIG;
    case ErrorKind::io: return AIRLENS_ERR_IO;
  }
  return AIRLENS_ERR_INTERNAL;
}

// Runs f, translating every exception into a status and a message.
template <class F>
airlens_status guarded(F&& f) noexcept {
  try {
    f();
    return AIRLENS_OK;
  } catch (const airlens::Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown failure";
  }
  return AIRLENS_ERR_INTERNAL;
}

airlens_status null_argument(const char* what) noexcept {
  last_error = std::string(what) + " is NULL";
  return AIRLENS_ERR_INVALID_ARGUMENT;
}

char* copy_out(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void emit_names(const std::vector<std::string>& names, char** written) {
  if (!written) return;
  std::string s;
  for (const std::string& n : names) s += n + '\n';
  *written = copy_out(s);
}

airlens::RunOptions options(airlens_format format) {
  airlens::RunOptions o;
  if (format == AIRLENS_FORMAT_JSON) {
    o.format = airlens::TableFormat::json;
  } else if (format != AIRLENS_FORMAT_CSV) {
    airlens::detail::raise(airlens::ErrorKind::invalid_argument, "unknown format code ", static_cast<int>(format));
  }
  return o;
}

template <class Run>
airlens_status run_with(const airlens_config* cfg, airlens_format format, char** written, Run run) noexcept {
  if (!cfg) return null_argument("config");
  if (written) *written = nullptr;
  return guarded([&] { emit_names(run(cfg->cfg, options(format)), written); });
}

}  // namespace

extern "C" {

const char* airlens_version(void) { return "0.1.0"; }

const char* airlens_status_name(airlens_status status) {
  switch (status) {
    case AIRLENS_OK: return "ok";
    case AIRLENS_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case AIRLENS_ERR_PRECONDITION: return "precondition";
    case AIRLENS_ERR_UNDEFINED: return "undefined";
    case AIRLENS_ERR_NUMERIC: return "numeric";
    case AIRLENS_ERR_CONFIG: return "config";
    case AIRLENS_ERR_IO: return "io";
    case AIRLENS_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* airlens_last_error(void) { return last_error.c_str(); }

void airlens_string_free(char* s) { std::free(s); }

airlens_status airlens_config_default(airlens_config** out) {
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] { *out = new airlens_config{}; });
}

airlens_status airlens_config_parse(const char* text, airlens_config** out) {
  if (!text) return null_argument("text");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] { *out = new airlens_config{airlens::parse_config(text)}; });
}

airlens_status airlens_config_load(const char* path, airlens_config** out) {
  if (!path) return null_argument("path");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] { *out = new airlens_config{airlens::load_config(path)}; });
}

airlens_status airlens_config_set(airlens_config* cfg, const char* key, const char* value) {
  if (!cfg) return null_argument("config");
  if (!key) return null_argument("key");
  if (!value) return null_argument("value");
  // Apply to a copy so a rejected value leaves the handle untouched.
  return guarded([&] {
    airlens::RunConfig next = cfg->cfg;
    airlens::set_config_value(next, key, value);
    next.validate();
    cfg->cfg = std::move(next);
  });
}

airlens_status airlens_config_to_text(const airlens_config* cfg, char** out) {
  if (!cfg) return null_argument("config");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] { *out = copy_out(airlens::config_to_text(cfg->cfg)); });
}

airlens_status airlens_config_output_dir(const airlens_config* cfg, char** out) {
  if (!cfg) return null_argument("config");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] { *out = copy_out(cfg->cfg.output_dir.string()); });
}

void airlens_config_free(airlens_config* cfg) { delete cfg; }

airlens_status airlens_simulate(const airlens_config* cfg, airlens_format format, char** written) {
  return run_with(cfg, format, written, airlens::run_simulate);
}

airlens_status airlens_attribute(const airlens_config* cfg, airlens_format format, char** written) {
  return run_with(cfg, format, written, airlens::run_attribute);
}

airlens_status airlens_rectify(const airlens_config* cfg, airlens_format format, const char* heads_path,
                               char** written) {
  return run_with(cfg, format, written, [&](const airlens::RunConfig& c, airlens::RunOptions o) {
    if (heads_path) o.heads = airlens::parse_heads_file(airlens::read_file(heads_path));
    return airlens::run_rectify(c, o);
  });
}

airlens_status airlens_theory(const airlens_config* cfg, airlens_format format, char** written) {
  return run_with(cfg, format, written, airlens::run_theory);
}

airlens_status airlens_heatmap(const char* matrix_csv, const char* svg_out, const char* title) {
  if (!matrix_csv) return null_argument("matrix_csv");
  if (!svg_out) return null_argument("svg_out");
  return guarded([&] { airlens::run_heatmap(matrix_csv, svg_out, title ? title : ""); });
}

}  // extern "C"
