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

#include "airlens/io.hpp"
#include "airlens/error.hpp"
#include "json_util.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace airlens {

namespace fs = std::filesystem;

double round_significant(double v, int digits) {
  if (!std::isfinite(v) || v == 0.0) return v;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*e", digits - 1, v);
  return std::strtod(buf, nullptr);
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", kReportDigits, v);
  return buf;
}

void ensure_writable_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  AIRLENS_REQUIRE(!ec && fs::is_directory(dir), ErrorKind::io, "cannot create output directory ",
                  dir.string(), ec ? ": " + ec.message() : std::string{});
  const fs::path probe = dir / ".airlens-write-probe";
  {
    std::ofstream f(probe, std::ios::binary);
    AIRLENS_REQUIRE(f && (f << "ok") && f.flush(), ErrorKind::io, "output directory ",
                    dir.string(), " is not writable");
  }
  fs::remove(probe, ec);
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    AIRLENS_REQUIRE(f, ErrorKind::io, "cannot open ", tmp.string(), ": ", std::strerror(errno));
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    f.flush();
    AIRLENS_REQUIRE(f, ErrorKind::io, "write to ", tmp.string(), " failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    detail::raise(ErrorKind::io, "cannot move ", tmp.string(), " to ", path.string(), ": ", ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  AIRLENS_REQUIRE(f, ErrorKind::io, "cannot read ", path.string());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

std::string matrix_to_csv(const Matrix& m, std::span<const Modality> labels) {
  std::string out;
  if (!labels.empty()) {
    AIRLENS_REQUIRE(labels.size() == static_cast<std::size_t>(m.cols()), ErrorKind::invalid_argument,
                    "modality labels do not match the matrix width");
    out += "# modality";
    for (Modality l : labels) {
      out += ' ';
      out += to_string(l);
    }
    out += '\n';
  }
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += format_number(m(r, c));
    }
    out += '\n';
  }
  return out;
}

Matrix matrix_from_csv(std::string_view text, std::vector<Modality>* labels) {
  std::vector<std::vector<double>> rows;
  std::vector<Modality> mods;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::istringstream words(line.substr(1));
      std::string w;
      words >> w;
      if (w == "modality")
        while (words >> w) mods.push_back(modality_from_string(w));
      continue;
    }
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      const auto b = cell.find_first_not_of(" \t");
      const auto e = cell.find_last_not_of(" \t");
      cell = b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      AIRLENS_REQUIRE(ec == std::errc{} && ptr == cell.data() + cell.size() && !cell.empty(),
                      ErrorKind::invalid_argument, "line ", line_no, ": '", cell, "' is not a number");
      row.push_back(v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    AIRLENS_REQUIRE(rows.empty() || row.size() == rows.front().size(), ErrorKind::invalid_argument,
                    "line ", line_no, " has ", row.size(), " values, expected ", rows.front().size());
    rows.push_back(std::move(row));
  }
  AIRLENS_REQUIRE(!rows.empty(), ErrorKind::invalid_argument, "matrix file has no rows");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  AIRLENS_REQUIRE(mods.empty() || mods.size() == rows.front().size(), ErrorKind::invalid_argument,
                  "modality comment lists ", mods.size(), " columns, matrix has ", rows.front().size());
  if (labels) *labels = std::move(mods);
  return m;
}

namespace {

Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_of(const Json& j, std::size_t rows, std::size_t cols, const char* what) {
  AIRLENS_REQUIRE(j.is_array() && j.size() == rows, ErrorKind::invalid_argument, what, " needs ",
                  rows, " rows");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    AIRLENS_REQUIRE(j[r].is_array() && j[r].size() == cols, ErrorKind::invalid_argument, what,
                    " row ", r, " needs ", cols, " values");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
  }
  return m;
}

}  // namespace

std::string model_to_json(const TinyModel& model) {
  const ModelParams& p = model.params;
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["params"] = {{"d", p.d},         {"layers", p.layers},         {"heads", p.heads},
                 {"vocab", p.vocab}, {"seed", p.seed},             {"layer_norm", p.layer_norm},
                 {"activation", std::string(to_string(p.activation))}};
  Json layers = Json::array();
  for (const LayerWeights& l : model.layers) {
    Json heads = Json::array();
    for (const HeadWeights& h : l.heads) heads.push_back({{"w_qk", matrix_json(h.w_qk)}, {"w_v", matrix_json(h.w_v)}});
    layers.push_back({{"heads", std::move(heads)},
                      {"w_f1", matrix_json(l.w_f1)},
                      {"w_f2", matrix_json(l.w_f2)},
                      {"activation", std::string(to_string(l.activation))}});
  }
  j["layers"] = std::move(layers);
  j["readout"] = matrix_json(model.readout);
  j["embedding_table"] = matrix_json(model.embedding_table);
  return j.dump() + "\n";
}

TinyModel model_from_json(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    detail::raise(ErrorKind::invalid_argument, "model file is not valid JSON: ", e.what());
  }
  try {
    TinyModel m;
    const Json& p = j.at("params");
    m.params.d = p.at("d").get<std::size_t>();
    m.params.layers = p.at("layers").get<std::size_t>();
    m.params.heads = p.at("heads").get<std::size_t>();
    m.params.vocab = p.at("vocab").get<std::size_t>();
    m.params.seed = p.at("seed").get<std::uint64_t>();
    m.params.layer_norm = p.at("layer_norm").get<bool>();
    m.params.activation = activation_from_string(p.at("activation").get<std::string>());
    const std::size_t d = m.params.d;
    AIRLENS_REQUIRE(j.at("layers").size() == m.params.layers, ErrorKind::invalid_argument,
                    "model file lists ", j.at("layers").size(), " layers, params say ", m.params.layers);
    for (const Json& lj : j.at("layers")) {
      LayerWeights l;
      AIRLENS_REQUIRE(lj.at("heads").size() == m.params.heads, ErrorKind::invalid_argument,
                      "layer lists ", lj.at("heads").size(), " heads, params say ", m.params.heads);
      for (const Json& hj : lj.at("heads"))
        l.heads.push_back({matrix_of(hj.at("w_qk"), d, d, "w_qk"), matrix_of(hj.at("w_v"), d, d, "w_v")});
      l.w_f1 = matrix_of(lj.at("w_f1"), d, d, "w_f1");
      l.w_f2 = matrix_of(lj.at("w_f2"), d, d, "w_f2");
      l.activation = activation_from_string(lj.at("activation").get<std::string>());
      m.layers.push_back(std::move(l));
    }
    m.readout = matrix_of(j.at("readout"), d, m.params.vocab, "readout");
    m.embedding_table = matrix_of(j.at("embedding_table"), m.params.vocab, d, "embedding_table");
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    detail::raise(ErrorKind::invalid_argument, "model file is malformed: ", e.what());
  }
}

}  // namespace airlens
