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

#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mtgrasp/anchor_codec.hpp"
#include "mtgrasp/document.hpp"
#include "mtgrasp/error.hpp"

namespace mtgrasp {

// Tensor bundle container:
//
//   "MTGD1" <header length, decimal ASCII> '\n' <header> <payload>
//
// The header is a canonical document (classes, input, endian, payload_bytes,
// scales[]{id, gw, gh, od_anchors, gd_anchors, gd_angles}). The payload is
// every tensor value as a little-endian IEEE-754 binary32, in layout order.

inline constexpr std::string_view kBundleMagic = "MTGD1";

inline Json layout_to_json(const HeadLayout& L) {
  Json scales = Json::array();
  for (const auto& s : L.scales()) {
    Json od = Json::array(), gd = Json::array();
    for (const auto& a : s.od_anchors) od.push_back(Json::array({a.w, a.h}));
    for (const auto& a : s.gd_anchors) gd.push_back(Json::array({a.w, a.h}));
    scales.push_back(Json{{"id", s.scale_id},
                          {"gw", s.grid_w},
                          {"gh", s.grid_h},
                          {"od_anchors", od},
                          {"gd_anchors", gd},
                          {"gd_angles", s.gd_angles}});
  }
  Json j{{"classes", L.num_classes()}, {"scales", scales}};
  if (L.input_w() == L.input_h()) {
    j["input"] = L.input_w();
  } else {
    j["input"] = Json::array({L.input_w(), L.input_h()});
  }
  return j;
}

inline HeadLayout layout_from_json(const Json& j) {
  using namespace doc_detail;
  const int classes = integer(j, "classes", "manifest");
  int in_w = 0, in_h = 0;
  const Json& input = field(j, "input", "manifest");
  if (input.is_number_integer()) {
    in_w = in_h = input.get<int>();
  } else if (input.is_array() && input.size() == 2 && input[0].is_number_integer() && input[1].is_number_integer()) {
    in_w = input[0].get<int>();
    in_h = input[1].get<int>();
  } else {
    throw Error(ErrorCode::BadDocument, "manifest: 'input' must be an integer or [w, h]");
  }
  auto anchors = [](const Json& list, const std::string& where) {
    std::vector<AnchorSize> out;
    for (const auto& a : list) {
      if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number()) {
        throw Error(ErrorCode::BadDocument, where + ": anchors must be [w, h] pairs");
      }
      out.push_back({a[0].get<double>(), a[1].get<double>()});
    }
    return out;
  };
  std::vector<ScaleSpec> specs;
  for (const auto& s : array(j, "scales", "manifest")) {
    ScaleSpec sp;
    sp.scale_id = integer(s, "id", "scale");
    const std::string where = "scale x" + std::to_string(sp.scale_id);
    sp.grid_w = integer(s, "gw", where);
    sp.grid_h = integer(s, "gh", where);
    if (sp.grid_w <= 0 || sp.grid_h <= 0 || in_w % sp.grid_w != 0 || in_h % sp.grid_h != 0 ||
        in_w / sp.grid_w != in_h / sp.grid_h) {
      throw Error(ErrorCode::ShapeMismatch, where + ": grid does not tile the input");
    }
    sp.stride = in_w / sp.grid_w;
    sp.od_anchors = anchors(array(s, "od_anchors", where), where);
    sp.gd_anchors = anchors(array(s, "gd_anchors", where), where);
    for (const auto& t : array(s, "gd_angles", where)) {
      if (!t.is_number()) throw Error(ErrorCode::BadDocument, where + ": angles must be numbers");
      sp.gd_angles.push_back(t.get<double>());
    }
    specs.push_back(std::move(sp));
  }
  return HeadLayout(classes, in_w, in_h, std::move(specs));
}

inline std::string save_bundle(const HeadTensor& h) {
  Json manifest = layout_to_json(h.layout());
  manifest["endian"] = "little";
  manifest["payload_bytes"] = h.size() * 4;
  const std::string header = canonical_dump(manifest, -1);
  std::string out;
  out.reserve(kBundleMagic.size() + 16 + header.size() + h.size() * 4);
  out += kBundleMagic;
  out += std::to_string(header.size());
  out += '\n';
  out += header;
  for (double v : h.values()) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int b = 0; b < 4; ++b) out += static_cast<char>((bits >> (8 * b)) & 0xFFu);
  }
  return out;
}

/// Reads a bundle. The manifest is fully validated before any payload byte
/// is touched.
inline HeadTensor load_bundle(std::string_view bytes) {
  if (!bytes.starts_with(kBundleMagic)) throw Error(ErrorCode::BadMagic, "bundle does not start with MTGD1");
  std::size_t pos = kBundleMagic.size();
  const std::size_t nl = bytes.find('\n', pos);
  if (nl == std::string_view::npos || nl == pos || nl - pos > 12) {
    throw Error(ErrorCode::BadDocument, "bundle header length is missing");
  }
  std::size_t header_len = 0;
  for (std::size_t i = pos; i < nl; ++i) {
    if (bytes[i] < '0' || bytes[i] > '9') throw Error(ErrorCode::BadDocument, "bundle header length is not decimal");
    header_len = header_len * 10 + static_cast<std::size_t>(bytes[i] - '0');
  }
  pos = nl + 1;
  if (bytes.size() - pos < header_len) throw Error(ErrorCode::TruncatedPayload, "bundle ends inside its header");
  const Json manifest = parse_document(bytes.substr(pos, header_len));
  pos += header_len;

  const HeadLayout layout = [&] {
    try {
      return layout_from_json(manifest);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::BadDocument) throw;
      throw Error(ErrorCode::ShapeMismatch, std::string("manifest: ") + e.what());
    }
  }();
  if (manifest.contains("endian") && manifest.at("endian") != "little") {
    throw Error(ErrorCode::BadDocument, "only little-endian payloads are supported");
  }
  const std::size_t expected = layout.total_values() * 4;
  const Json& declared = doc_detail::field(manifest, "payload_bytes", "manifest");
  if (!declared.is_number_unsigned() && !declared.is_number_integer()) {
    throw Error(ErrorCode::BadDocument, "manifest: payload_bytes must be an integer");
  }
  if (declared.get<std::int64_t>() != static_cast<std::int64_t>(expected)) {
    throw Error(ErrorCode::ShapeMismatch, "manifest payload_bytes disagrees with the declared shapes");
  }
  const std::size_t have = bytes.size() - pos;
  if (have < expected) {
    throw Error(ErrorCode::TruncatedPayload,
                "payload holds " + std::to_string(have) + " bytes, manifest needs " + std::to_string(expected));
  }
  if (have > expected) throw Error(ErrorCode::ShapeMismatch, "payload has trailing bytes");

  HeadTensor h(layout);
  auto vals = h.values();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + 4 * i + static_cast<std::size_t>(b)]))
              << (8 * b);
    }
    const float v = std::bit_cast<float>(bits);
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "payload value " + std::to_string(i) + " is not finite");
    vals[i] = v;
  }
  return h;
}

}  // namespace mtgrasp
