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

#include "airlens/model.hpp"
#include "airlens/types.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace airlens {

/// Artifacts carry this in a schema_version field.
inline constexpr int kSchemaVersion = 1;

/// Numbers in reports keep 12 significant digits; that is the precision at
/// which runs are promised to be reproducible.
inline constexpr int kReportDigits = 12;

double round_significant(double v, int digits = kReportDigits);

/// "%.12g"; non-finite values come out as nan, inf and -inf.
std::string format_number(double v);

/// Creates the directory if needed and proves it accepts a file. Throws
/// ErrorKind::io otherwise.
void ensure_writable_dir(const std::filesystem::path& dir);

/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// One row per line, comma separated. When `labels` is given a leading
/// "# modality" comment records the column modalities.
std::string matrix_to_csv(const Matrix& m, std::span<const Modality> labels = {});

/// Reads what matrix_to_csv writes. Rejects ragged rows and non-numeric cells
/// (ErrorKind::invalid_argument); `labels` receives the modality comment if
/// present.
Matrix matrix_from_csv(std::string_view text, std::vector<Modality>* labels = nullptr);

/// Full-precision model dump, reloadable bit for bit.
std::string model_to_json(const TinyModel& model);
TinyModel model_from_json(std::string_view text);

}  // namespace airlens
