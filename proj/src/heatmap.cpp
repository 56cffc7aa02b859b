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

#include "airlens/heatmap.hpp"
#include "airlens/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

namespace airlens {

namespace {

// Light to dark blue; both ends differ from the background.
constexpr std::array<double, 3> kLow{247, 251, 255};
constexpr std::array<double, 3> kHigh{8, 48, 107};

std::string color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  char buf[8];
  int c[3];
  for (int i = 0; i < 3; ++i) c[i] = static_cast<int>(std::lround(kLow[i] + t * (kHigh[i] - kLow[i])));
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
  return buf;
}

std::string escape(std::string_view s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

template <class... Args>
void put(std::string& out, const char* fmt, Args... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, args...);
  out += buf;
}

}  // namespace

std::string heatmap_svg(const Matrix& m, std::span<const Modality> labels, std::string_view title) {
  AIRLENS_REQUIRE(m.rows() > 0 && m.cols() > 0, ErrorKind::invalid_argument, "heatmap of an empty matrix");
  AIRLENS_REQUIRE(m.allFinite(), ErrorKind::invalid_argument, "heatmap input has non-finite entries");
  AIRLENS_REQUIRE(labels.empty() || labels.size() == static_cast<std::size_t>(m.cols()),
                  ErrorKind::invalid_argument, "heatmap has ", labels.size(), " labels for ", m.cols(),
                  " columns");
  const long rows = static_cast<long>(m.rows());
  const long cols = static_cast<long>(m.cols());
  const long cell = std::clamp(512 / std::max(rows, cols), 2L, 24L);
  const long left = 48, top = title.empty() ? 24 : 44, legend = 64;
  const long width = left + cols * cell + legend, height = top + rows * cell + 32;
  const double lo = std::min(0.0, m.minCoeff());
  const double hi = m.maxCoeff();
  const double span = hi > lo ? hi - lo : 1.0;

  std::string out;
  out.reserve(static_cast<std::size_t>(rows * cols) * 64 + 2048);
  put(out, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%ld\" height=\"%ld\" viewBox=\"0 0 %ld %ld\">\n",
      width, height, width, height);
  put(out, "<rect x=\"0\" y=\"0\" width=\"%ld\" height=\"%ld\" fill=\"%s\"/>\n", width, height,
      std::string(kHeatmapBackground).c_str());
  if (!title.empty())
    put(out, "<text x=\"%ld\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">%s</text>\n", left,
        escape(title).c_str());

  out += "<g shape-rendering=\"crispEdges\">\n";
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) {
      const double v = m(r, c);
      if (c > r && v == 0.0) continue;
      put(out, "<rect x=\"%ld\" y=\"%ld\" width=\"%ld\" height=\"%ld\" fill=\"%s\"/>\n", left + c * cell,
          top + r * cell, cell, cell, color((v - lo) / span).c_str());
    }
  out += "</g>\n";

  // Token-index ticks, at most about 16 per axis.
  const auto step_for = [](long n) { return std::max(1L, (n + 15) / 16); };
  out += "<g font-family=\"sans-serif\" font-size=\"9\" fill=\"#333333\">\n";
  for (long c = 0; c < cols; c += step_for(cols))
    put(out, "<text x=\"%ld\" y=\"%ld\" text-anchor=\"middle\">%ld</text>\n", left + c * cell + cell / 2,
        top + rows * cell + 12, c);
  for (long r = 0; r < rows; r += step_for(rows))
    put(out, "<text x=\"%ld\" y=\"%ld\" text-anchor=\"end\">%ld</text>\n", left - 4, top + r * cell + cell / 2 + 3, r);
  put(out, "<text x=\"%ld\" y=\"%ld\" text-anchor=\"middle\">key position</text>\n", left + cols * cell / 2,
      top + rows * cell + 26);
  out += "</g>\n";

  if (!labels.empty()) {
    out += "<g stroke=\"#d62728\" stroke-width=\"1\">\n";
    for (long c = 1; c < cols; ++c) {
      if (labels[static_cast<std::size_t>(c)] == labels[static_cast<std::size_t>(c - 1)]) continue;
      put(out, "<line x1=\"%ld\" y1=\"%ld\" x2=\"%ld\" y2=\"%ld\"/>\n", left + c * cell, top, left + c * cell,
          top + rows * cell);
      if (rows == cols)
        put(out, "<line x1=\"%ld\" y1=\"%ld\" x2=\"%ld\" y2=\"%ld\"/>\n", left, top + c * cell,
            left + cols * cell, top + c * cell);
    }
    out += "</g>\n";
  }

  // Legend: ten swatches from the low to the high end of the scale.
  const long lx = left + cols * cell + 16;
  for (int i = 0; i < 10; ++i)
    put(out, "<rect x=\"%ld\" y=\"%ld\" width=\"12\" height=\"10\" fill=\"%s\"/>\n", lx, top + (9 - i) * 10,
        color(i / 9.0).c_str());
  put(out, "<text x=\"%ld\" y=\"%ld\" font-family=\"sans-serif\" font-size=\"9\">%.4g</text>\n", lx + 14, top + 8, hi);
  put(out, "<text x=\"%ld\" y=\"%ld\" font-family=\"sans-serif\" font-size=\"9\">%.4g</text>\n", lx + 14, top + 98, lo);
  out += "</svg>\n";
  return out;
}

}  // namespace airlens
