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

#include "airlens/error.hpp"
#include "airlens/random.hpp"
#include "airlens/types.hpp"

#include <charconv>

namespace airlens {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid argument";
    case ErrorKind::precondition: return "precondition failed";
    case ErrorKind::undefined: return "undefined result";
    case ErrorKind::numeric: return "numeric error";
    case ErrorKind::config: return "config error";
    case ErrorKind::io: return "I/O error";
  }
  return "error";
}

std::string_view to_string(Modality m) noexcept {
  return m == Modality::text ? "text" : "visual";
}

Modality modality_from_string(std::string_view s) {
  if (s == "text") return Modality::text;
  if (s == "visual") return Modality::visual;
  detail::raise(ErrorKind::invalid_argument, "unknown modality '", s, "'");
}

std::string to_string(const HeadId& id) {
  return std::to_string(id.layer) + ":" + std::to_string(id.head);
}

HeadId parse_head_id(std::string_view s) {
  const auto colon = s.find(':');
  AIRLENS_REQUIRE(colon != std::string_view::npos, ErrorKind::invalid_argument,
                  "head id '", s, "' is not of the form layer:head");
  HeadId id;
  const auto parse = [&](std::string_view part, std::size_t& out) {
    const auto* end = part.data() + part.size();
    auto [ptr, ec] = std::from_chars(part.data(), end, out);
    AIRLENS_REQUIRE(ec == std::errc{} && ptr == end && !part.empty(), ErrorKind::invalid_argument,
                    "head id '", s, "' is not of the form layer:head");
  };
  parse(s.substr(0, colon), id.layer);
  parse(s.substr(colon + 1), id.head);
  return id;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
  // splitmix64 finaliser over the pair
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace airlens
