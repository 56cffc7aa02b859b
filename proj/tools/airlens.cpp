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

// airlens command-line front end. Talks to the library only through the C
// interface in airlens/airlens.h.
#include "airlens/airlens.h"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitPrecondition = 3;
constexpr int kExitIo = 4;

constexpr const char* kOutDirEnv = "AIRLENS_OUT_DIR";

int exit_code(airlens_status s) {
  switch (s) {
    case AIRLENS_OK: return kExitOk;
    case AIRLENS_ERR_CONFIG: return kExitConfig;
    case AIRLENS_ERR_IO: return kExitIo;
    default: return kExitPrecondition;  // every other rejection happens before or instead of output
  }
}

struct ConfigDeleter {
  void operator()(airlens_config* c) const { airlens_config_free(c); }
};
using ConfigHandle = std::unique_ptr<airlens_config, ConfigDeleter>;

struct StringDeleter {
  void operator()(char* s) const { airlens_string_free(s); }
};
using OwnedString = std::unique_ptr<char, StringDeleter>;

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::string> seed;
  std::string scenario;
  std::string heads;
  std::string format = "csv";
  std::string input;  // heatmap
  std::string title;  // heatmap
};

int fail(const char* command, airlens_status s) {
  std::fprintf(stderr, "airlens %s: %s error: %s\n", command, airlens_status_name(s), airlens_last_error());
  return exit_code(s);
}

// --out beats the environment, which beats output.dir from the config file.
std::string resolved_out(const Flags& f) {
  if (!f.out.empty()) return f.out;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return {};
}

airlens_status load(const Flags& f, ConfigHandle& out) {
  airlens_config* raw = nullptr;
  airlens_status s = f.config.empty() ? airlens_config_default(&raw) : airlens_config_load(f.config.c_str(), &raw);
  out.reset(raw);
  if (s != AIRLENS_OK) return s;
  if (f.seed && (s = airlens_config_set(raw, "seed", f.seed->c_str())) != AIRLENS_OK) return s;
  if (!f.scenario.empty() && (s = airlens_config_set(raw, "scenario.kind", f.scenario.c_str())) != AIRLENS_OK)
    return s;
  if (const std::string dir = resolved_out(f); !dir.empty())
    s = airlens_config_set(raw, "output.dir", dir.c_str());
  return s;
}

int run(const std::string& command, const Flags& f) {
  if (command == "heatmap") {
    std::string dir = resolved_out(f);
    if (dir.empty() && !f.config.empty()) {
      ConfigHandle cfg;
      if (const airlens_status s = load(f, cfg); s != AIRLENS_OK) return fail("heatmap", s);
      char* raw = nullptr;
      if (const airlens_status s = airlens_config_output_dir(cfg.get(), &raw); s != AIRLENS_OK)
        return fail("heatmap", s);
      dir = OwnedString(raw).get();
    }
    namespace fs = std::filesystem;
    const fs::path in(f.input);
    const fs::path svg = (dir.empty() ? in.parent_path() : fs::path(dir)) / (in.stem().string() + ".svg");
    if (const airlens_status s = airlens_heatmap(f.input.c_str(), svg.string().c_str(), f.title.c_str());
        s != AIRLENS_OK)
      return fail("heatmap", s);
    std::printf("%s\n", svg.string().c_str());
    return kExitOk;
  }

  ConfigHandle cfg;
  if (const airlens_status s = load(f, cfg); s != AIRLENS_OK) return fail(command.c_str(), s);
  const airlens_format format = f.format == "json" ? AIRLENS_FORMAT_JSON : AIRLENS_FORMAT_CSV;
  char* written = nullptr;
  airlens_status s = AIRLENS_OK;
  if (command == "simulate") {
    s = airlens_simulate(cfg.get(), format, &written);
  } else if (command == "attribute") {
    s = airlens_attribute(cfg.get(), format, &written);
  } else if (command == "rectify") {
    s = airlens_rectify(cfg.get(), format, f.heads.empty() ? nullptr : f.heads.c_str(), &written);
  } else {
    s = airlens_theory(cfg.get(), format, &written);
  }
  OwnedString names(written);
  if (s != AIRLENS_OK) return fail(command.c_str(), s);

  char* dir = nullptr;
  airlens_config_output_dir(cfg.get(), &dir);
  OwnedString owned_dir(dir);
  std::printf("wrote to %s:\n%s", dir ? dir : "?", names ? names.get() : "");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"airlens: attention-imbalance analysis and rectification on a toy transformer"};
  app.set_version_flag("--version", std::string(airlens_version()));
  app.require_subcommand(1, 1);
  Flags f;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--out", f.out, std::string("output directory (overrides ") + kOutDirEnv + " and output.dir)");
    sub->add_option("--seed", f.seed, "master seed (overrides the config)");
    sub->add_option("--scenario", f.scenario, "random, planted-text-bias or planted-hallucination-head");
    sub->add_option("--format", f.format, "table format")->check(CLI::IsMember({"csv", "json"}));
  };
  common(app.add_subcommand("simulate", "baseline decode, TAI, flagged tokens, heatmaps"));
  common(app.add_subcommand("attribute", "erasure attribution of every head"));
  CLI::App* rectify = app.add_subcommand("rectify", "paired baseline and AIR decodes");
  common(rectify);
  rectify->add_option("--heads", f.heads, "sensitive heads, one layer:head per line")->check(CLI::ExistingFile);
  common(app.add_subcommand("theory", "moment and propagation checks, rho sweep"));
  CLI::App* heatmap = app.add_subcommand("heatmap", "render a matrix CSV as an SVG heatmap");
  heatmap->add_option("matrix", f.input, "matrix CSV")->required();
  heatmap->add_option("--config", f.config, "config file (for output.dir)")->check(CLI::ExistingFile);
  heatmap->add_option("--out", f.out, "output directory (default: beside the input)");
  heatmap->add_option("--title", f.title, "title line");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  return run(app.get_subcommands().front()->get_name(), f);
}
