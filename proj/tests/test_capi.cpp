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

// Exercises the shared library through its C header only.
#include "airlens/airlens.h"

#include <doctest.h>
#include <json.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

namespace fs = std::filesystem;

namespace {

struct Config {
  airlens_config* h = nullptr;
  ~Config() { airlens_config_free(h); }
};

std::string take(char* s) {
  std::string out = s ? s : "";
  airlens_string_free(s);
  return out;
}

fs::path scratch(const char* name) {
  fs::path p = fs::temp_directory_path() / ("airlens_capi_" + std::string(name));
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kSmall =
    "prompt.examples = 2\nprompt.max_new_tokens = 6\nattribution.traces = 3\nattribution.permutations = 10\n"
    "rectify.prompts = 2\n";

}  // namespace

TEST_CASE("status names and version") {
  CHECK(std::strcmp(airlens_status_name(AIRLENS_OK), "ok") == 0);
  CHECK(std::strcmp(airlens_status_name(AIRLENS_ERR_IO), "io") == 0);
  CHECK(std::strlen(airlens_version()) > 0);
}

TEST_CASE("defaults round-trip through text") {
  Config c;
  REQUIRE(airlens_config_default(&c.h) == AIRLENS_OK);
  char* text = nullptr;
  REQUIRE(airlens_config_to_text(c.h, &text) == AIRLENS_OK);
  const std::string t = take(text);
  CHECK(t.find("seed = 1") != std::string::npos);
  Config again;
  REQUIRE(airlens_config_parse(t.c_str(), &again.h) == AIRLENS_OK);
  REQUIRE(airlens_config_to_text(again.h, &text) == AIRLENS_OK);
  CHECK(take(text) == t);
}

TEST_CASE("a rejected override leaves the handle unchanged") {
  Config c;
  REQUIRE(airlens_config_default(&c.h) == AIRLENS_OK);
  char* before = nullptr;
  airlens_config_to_text(c.h, &before);
  CHECK(airlens_config_set(c.h, "no.such.key", "1") == AIRLENS_ERR_CONFIG);
  CHECK(std::string(airlens_last_error()).find("no.such.key") != std::string::npos);
  CHECK(airlens_config_set(c.h, "seed", "banana") == AIRLENS_ERR_CONFIG);
  CHECK(airlens_config_set(c.h, "air.beta", "2") == AIRLENS_ERR_CONFIG);
  char* after = nullptr;
  airlens_config_to_text(c.h, &after);
  CHECK(take(before) == take(after));
  CHECK(airlens_config_set(c.h, "seed", "7") == AIRLENS_OK);
}

TEST_CASE("parse and load failures") {
  airlens_config* h = reinterpret_cast<airlens_config*>(1);
  CHECK(airlens_config_parse("seed = \n", &h) == AIRLENS_ERR_CONFIG);
  CHECK(h == nullptr);
  CHECK(airlens_config_load("/nonexistent/airlens.cfg", &h) == AIRLENS_ERR_CONFIG);
  CHECK(airlens_config_parse(nullptr, &h) == AIRLENS_ERR_INVALID_ARGUMENT);
  CHECK(airlens_simulate(nullptr, AIRLENS_FORMAT_CSV, nullptr) == AIRLENS_ERR_INVALID_ARGUMENT);
}

TEST_CASE("errors are per thread") {
  Config c;
  REQUIRE(airlens_config_default(&c.h) == AIRLENS_OK);
  CHECK(airlens_config_set(c.h, "bogus", "1") == AIRLENS_ERR_CONFIG);
  std::string other = "unset";
  std::thread([&] { other = airlens_last_error(); }).join();
  CHECK(other.empty());
  CHECK(std::string(airlens_last_error()).find("bogus") != std::string::npos);
}

TEST_CASE("simulate writes and lists its artifacts") {
  Config c;
  REQUIRE(airlens_config_parse(kSmall, &c.h) == AIRLENS_OK);
  const fs::path dir = scratch("sim");
  REQUIRE(airlens_config_set(c.h, "output.dir", dir.string().c_str()) == AIRLENS_OK);
  char* written = nullptr;
  REQUIRE(airlens_simulate(c.h, AIRLENS_FORMAT_JSON, &written) == AIRLENS_OK);
  std::istringstream names(take(written));
  std::string n;
  int count = 0;
  while (std::getline(names, n)) {
    CHECK_MESSAGE(fs::exists(dir / n), n);
    ++count;
  }
  CHECK(count >= 7);
  CHECK(fs::exists(dir / "tai.json"));
  fs::remove_all(dir);
}

TEST_CASE("bad format code") {
  Config c;
  REQUIRE(airlens_config_parse(kSmall, &c.h) == AIRLENS_OK);
  CHECK(airlens_theory(c.h, static_cast<airlens_format>(9), nullptr) == AIRLENS_ERR_INVALID_ARGUMENT);
}

TEST_CASE("rectify with an empty heads file and without any") {
  Config c;
  REQUIRE(airlens_config_parse(kSmall, &c.h) == AIRLENS_OK);
  const fs::path dir = scratch("rect");
  REQUIRE(airlens_config_set(c.h, "output.dir", dir.string().c_str()) == AIRLENS_OK);
  CHECK(airlens_rectify(c.h, AIRLENS_FORMAT_CSV, nullptr, nullptr) == AIRLENS_ERR_PRECONDITION);
  CHECK_FALSE(fs::exists(dir / "rectify.json"));
  CHECK(airlens_rectify(c.h, AIRLENS_FORMAT_CSV, "/nonexistent/heads.txt", nullptr) == AIRLENS_ERR_IO);

  const fs::path heads = scratch("heads.txt");
  std::ofstream(heads) << "# intentionally empty\n";
  REQUIRE(airlens_rectify(c.h, AIRLENS_FORMAT_CSV, heads.string().c_str(), nullptr) == AIRLENS_OK);
  const auto report = nlohmann::json::parse(slurp(dir / "rectify.json"));
  CHECK(report["summary"]["identical_traces"] == 2);
  CHECK(report["sensitive_heads"].empty());
  fs::remove_all(dir);
  fs::remove(heads);
}

TEST_CASE("heatmap through the C interface") {
  const fs::path dir = scratch("heat");
  fs::create_directories(dir);
  std::ofstream(dir / "m.csv") << "0.25\n";
  REQUIRE(airlens_heatmap((dir / "m.csv").string().c_str(), (dir / "m.svg").string().c_str(), nullptr) == AIRLENS_OK);
  CHECK(slurp(dir / "m.svg").find("</svg>") != std::string::npos);
  std::ofstream(dir / "bad.csv") << "1,2\n3\n";
  CHECK(airlens_heatmap((dir / "bad.csv").string().c_str(), (dir / "b.svg").string().c_str(), "") ==
        AIRLENS_ERR_INVALID_ARGUMENT);
  CHECK_FALSE(fs::exists(dir / "b.svg"));
  fs::remove_all(dir);
}
