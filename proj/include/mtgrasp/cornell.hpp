// Copyright 2026 The mtgrasp Authors.
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

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "mtgrasp/error.hpp"
#include "mtgrasp/geometry.hpp"

namespace mtgrasp {

struct CornellRectFile {
  std::vector<OrientedRect> rects;
  int skipped_groups = 0;  // four-line groups dropped because of NaN vertices
};

namespace cornell_detail {

inline bool is_nan_token(std::string_view tok) {
  if (!tok.empty() && (tok.front() == '+' || tok.front() == '-')) tok.remove_prefix(1);
  if (tok.size() != 3) return false;
  return std::tolower(static_cast<unsigned char>(tok[0])) == 'n' &&
         std::tolower(static_cast<unsigned char>(tok[1])) == 'a' &&
         std::tolower(static_cast<unsigned char>(tok[2])) == 'n';
}

inline double parse_token(std::string_view tok, int line) {
  if (is_nan_token(tok)) return std::numeric_limits<double>::quiet_NaN();
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line) + ": bad coordinate '" + std::string(tok) + "'");
  }
  return v;
}

}  // namespace cornell_detail

/// Parses a Cornell grasp-rectangle file: one "x y" vertex per line, four
/// lines per rectangle. Blank lines are ignored. Groups with a NaN vertex
/// are skipped and counted; a trailing partial group is an error.
inline CornellRectFile parse_cornell_rect_file(std::string_view text) {
  struct Vertex {
    Point2 p;
    int line;
  };
  std::vector<Vertex> verts;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    std::vector<std::string_view> toks;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      const std::size_t start = i;
      while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      if (i > start) toks.push_back(line.substr(start, i - start));
    }
    if (toks.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (toks.size() != 2) {
      throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": expected two coordinates, got " +
                                                std::to_string(toks.size()));
    }
    verts.push_back({{cornell_detail::parse_token(toks[0], line_no), cornell_detail::parse_token(toks[1], line_no)},
                     line_no});
    if (end == text.size()) break;
  }
  if (verts.size() % 4 != 0) {
    const auto& first = verts[verts.size() - verts.size() % 4];
    throw Error(ErrorCode::TruncatedFile, std::to_string(verts.size() % 4) + " trailing vertex line(s) from line " +
                                              std::to_string(first.line));
  }
  CornellRectFile out;
  for (std::size_t g = 0; g < verts.size(); g += 4) {
    bool has_nan = false;
    for (std::size_t k = 0; k < 4; ++k) {
      has_nan = has_nan || std::isnan(verts[g + k].p.x) || std::isnan(verts[g + k].p.y);
    }
    if (has_nan) {
      ++out.skipped_groups;
      continue;
    }
    try {
      out.rects.push_back(rect_from_vertices(verts[g].p, verts[g + 1].p, verts[g + 2].p, verts[g + 3].p));
    } catch (const Error& e) {
      throw Error(e.code(), "lines " + std::to_string(verts[g].line) + "-" + std::to_string(verts[g + 3].line) + ": " +
                                e.what());
    }
  }
  return out;
}

struct CornellSample {
  std::string image_id;
  std::vector<OrientedRect> positives;
  std::vector<OrientedRect> negatives;
  std::string group_key;
  int skipped_groups = 0;
};

using GroupKeyFn = std::function<std::string(std::string_view filename)>;

/// Image id of a Cornell label file: the file stem without its trailing
/// "cpos"/"cneg" tag ("pcd0123cpos.txt" -> "pcd0123").
inline std::string cornell_image_id(std::string_view filename) {
  std::string stem = std::filesystem::path(std::string(filename)).stem().string();
  for (std::string_view tag : {"cpos", "cneg"}) {
    if (stem.size() > tag.size() && stem.ends_with(tag)) stem.resize(stem.size() - tag.size());
  }
  return stem;
}

/// Default object-group rule: the first run of digits in the image id with
/// its last `drop_digits` digits removed ("pcd0123" -> "01"). Ids without
/// enough digits form their own group.
inline std::string numeric_prefix_group_key(std::string_view filename, std::size_t drop_digits = 2) {
  const std::string id = cornell_image_id(filename);
  const auto b = id.find_first_of("0123456789");
  if (b == std::string::npos) return id;
  auto e = id.find_first_not_of("0123456789", b);
  if (e == std::string::npos) e = id.size();
  const std::string digits = id.substr(b, e - b);
  if (digits.size() <= drop_digits) return id;
  return digits.substr(0, digits.size() - drop_digits);
}

inline CornellSample load_cornell_sample(std::string_view filename, std::string_view pos_text, std::string_view neg_text,
                                         const GroupKeyFn& group_key = [](std::string_view f) {
                                           return numeric_prefix_group_key(f);
                                         }) {
  CornellSample s;
  s.image_id = cornell_image_id(filename);
  auto pos = parse_cornell_rect_file(pos_text);
  auto neg = parse_cornell_rect_file(neg_text);
  s.positives = std::move(pos.rects);
  s.negatives = std::move(neg.rects);
  s.skipped_groups = pos.skipped_groups + neg.skipped_groups;
  s.group_key = group_key(filename);
  return s;
}

}  // namespace mtgrasp
