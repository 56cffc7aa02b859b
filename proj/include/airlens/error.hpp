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

#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace airlens {

/// Broad failure categories. The C API maps each kind onto a status code and
/// the CLI maps those onto process exit codes.
enum class ErrorKind {
  invalid_argument,  // shape/dimension mismatch, bad index
  precondition,      // violated operation precondition
  undefined,         // mathematically undefined result (zero denominator etc.)
  numeric,           // non-finite input or activation
  config,            // malformed or unknown configuration
  io,                // filesystem failure
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

namespace detail {

template <class... Args>
[[noreturn]] void raise(ErrorKind kind, const Args&... args) {
  std::ostringstream os;
  (os << ... << args);
  throw Error(kind, os.str());
}

}  // namespace detail

#define AIRLENS_REQUIRE(cond, kind, ...)                         \
  do {                                                           \
    if (!(cond)) ::airlens::detail::raise((kind), __VA_ARGS__);  \
  } while (0)

}  // namespace airlens
