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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "mtgrasp/error.hpp"
#include "mtgrasp/geometry.hpp"
#include "mtgrasp/scene.hpp"

namespace mtgrasp {

struct AnchorSize {
  double w = 0.0;
  double h = 0.0;
  friend bool operator==(const AnchorSize&, const AnchorSize&) = default;
};

/// One prediction scale: grid geometry plus its anchor priors.
struct ScaleSpec {
  int scale_id = 1;  // up-sampling factor: 1, 2 or 4
  int stride = 32;
  int grid_w = 0;
  int grid_h = 0;
  std::vector<AnchorSize> od_anchors;
  std::vector<AnchorSize> gd_anchors;
  std::vector<double> gd_angles;

  int cells() const { return grid_w * grid_h; }
  int gd_slots_per_cell() const {
    return static_cast<int>(gd_anchors.size() * gd_angles.size());
  }
  friend bool operator==(const ScaleSpec&, const ScaleSpec&) = default;
};

struct OdSlot {
  int scale = 0;
  int gx = 0;
  int gy = 0;
  int anchor = 0;
  friend auto operator<=>(const OdSlot&, const OdSlot&) = default;
};

struct GdSlot {
  int scale = 0;
  int gx = 0;
  int gy = 0;
  int anchor = 0;
  int angle = 0;
  friend auto operator<=>(const GdSlot&, const GdSlot&) = default;
};

// Channel offsets inside one OD anchor block:
//   tx ty tw th tpr cls[C] fc[C+1] cc[C+1]
// and one GD anchor-angle block:
//   tx ty tw th ttheta tpr cls[C]
namespace od_ch {
inline constexpr int x = 0, y = 1, w = 2, h = 3, pr = 4, cls = 5;
}
namespace gd_ch {
inline constexpr int x = 0, y = 1, w = 2, h = 3, theta = 4, pr = 5, cls = 6;
}

/// Full head geometry: class count, input size and the per-scale specs.
/// Memory order is scale-major, then row-major cells, then OD anchor blocks
/// followed by GD anchor-angle blocks (anchor-major, angle-minor).
class HeadLayout {
 public:
  HeadLayout() = default;

  HeadLayout(int num_classes, int input_w, int input_h, std::vector<ScaleSpec> scales)
      : num_classes_(num_classes), input_w_(input_w), input_h_(input_h), scales_(std::move(scales)) {
    if (num_classes_ < 1) throw Error(ErrorCode::ShapeMismatch, "need at least one class");
    if (input_w_ <= 0 || input_h_ <= 0) throw Error(ErrorCode::ShapeMismatch, "input size must be positive");
    for (const auto& s : scales_) {
      if (s.stride <= 0 || s.grid_w <= 0 || s.grid_h <= 0 || s.stride * s.grid_w != input_w_ ||
          s.stride * s.grid_h != input_h_) {
        throw Error(ErrorCode::ShapeMismatch,
                    "scale x" + std::to_string(s.scale_id) + " grid does not tile the input");
      }
      for (const auto& a : s.od_anchors) {
        if (!(a.w > 0 && a.h > 0)) throw Error(ErrorCode::ShapeMismatch, "anchor sizes must be positive");
      }
      for (const auto& a : s.gd_anchors) {
        if (!(a.w > 0 && a.h > 0)) throw Error(ErrorCode::ShapeMismatch, "anchor sizes must be positive");
      }
      for (double t : s.gd_angles) {
        if (!(t >= 0.0 && t < std::numbers::pi)) {
          throw Error(ErrorCode::ShapeMismatch, "angle anchors must lie in [0, pi)");
        }
      }
      if (!s.gd_anchors.empty() && s.gd_angles.empty()) {
        throw Error(ErrorCode::ShapeMismatch, "grasp anchors need at least one angle anchor");
      }
    }
    offsets_.resize(scales_.size() + 1, 0);
    for (std::size_t i = 0; i < scales_.size(); ++i) {
      offsets_[i + 1] = offsets_[i] + scale_values(static_cast<int>(i));
    }
  }

  int num_classes() const { return num_classes_; }
  int input_w() const { return input_w_; }
  int input_h() const { return input_h_; }
  const std::vector<ScaleSpec>& scales() const { return scales_; }
  const ScaleSpec& scale(int i) const { return scales_.at(static_cast<std::size_t>(i)); }
  int num_scales() const { return static_cast<int>(scales_.size()); }

  int od_width() const { return 4 + 1 + num_classes_ + 2 * (num_classes_ + 1); }
  int gd_width() const { return 4 + 1 + 1 + num_classes_; }
  int fc_offset() const { return od_ch::cls + num_classes_; }
  int cc_offset() const { return od_ch::cls + 2 * num_classes_ + 1; }

  std::size_t cell_width(int s) const {
    const auto& sp = scale(s);
    return sp.od_anchors.size() * static_cast<std::size_t>(od_width()) +
           static_cast<std::size_t>(sp.gd_slots_per_cell()) * static_cast<std::size_t>(gd_width());
  }
  std::size_t scale_values(int s) const {
    return static_cast<std::size_t>(scale(s).cells()) * cell_width(s);
  }
  std::size_t total_values() const { return offsets_.empty() ? 0 : offsets_.back(); }
  std::size_t scale_offset(int s) const { return offsets_.at(static_cast<std::size_t>(s)); }

  std::size_t od_slot_count() const {
    std::size_t n = 0;
    for (const auto& s : scales_) n += static_cast<std::size_t>(s.cells()) * s.od_anchors.size();
    return n;
  }
  std::size_t gd_slot_count() const {
    std::size_t n = 0;
    for (const auto& s : scales_) n += static_cast<std::size_t>(s.cells() * s.gd_slots_per_cell());
    return n;
  }

  /// Offset of an OD anchor block from the start of the whole tensor.
  std::size_t offset(const OdSlot& k) const {
    const auto& sp = scale(k.scale);
    return scale_offset(k.scale) +
           static_cast<std::size_t>(k.gy * sp.grid_w + k.gx) * cell_width(k.scale) +
           static_cast<std::size_t>(k.anchor) * static_cast<std::size_t>(od_width());
  }
  std::size_t offset(const GdSlot& k) const {
    const auto& sp = scale(k.scale);
    return scale_offset(k.scale) +
           static_cast<std::size_t>(k.gy * sp.grid_w + k.gx) * cell_width(k.scale) +
           sp.od_anchors.size() * static_cast<std::size_t>(od_width()) +
           static_cast<std::size_t>(k.anchor * static_cast<int>(sp.gd_angles.size()) + k.angle) *
               static_cast<std::size_t>(gd_width());
  }

  /// Dense index of a slot among all OD (resp. GD) slots of its scale.
  std::size_t slot_index(const OdSlot& k) const {
    const auto& sp = scale(k.scale);
    return static_cast<std::size_t>(k.gy * sp.grid_w + k.gx) * sp.od_anchors.size() +
           static_cast<std::size_t>(k.anchor);
  }
  std::size_t slot_index(const GdSlot& k) const {
    const auto& sp = scale(k.scale);
    return static_cast<std::size_t>((k.gy * sp.grid_w + k.gx) * sp.gd_slots_per_cell() +
                                    k.anchor * static_cast<int>(sp.gd_angles.size()) + k.angle);
  }

  template <class F>
  void for_each_od_slot(F&& f) const {
    for (int s = 0; s < num_scales(); ++s) {
      const auto& sp = scales_[static_cast<std::size_t>(s)];
      for (int gy = 0; gy < sp.grid_h; ++gy)
        for (int gx = 0; gx < sp.grid_w; ++gx)
          for (int a = 0; a < static_cast<int>(sp.od_anchors.size()); ++a) f(OdSlot{s, gx, gy, a});
    }
  }
  template <class F>
  void for_each_gd_slot(F&& f) const {
    for (int s = 0; s < num_scales(); ++s) {
      const auto& sp = scales_[static_cast<std::size_t>(s)];
      for (int gy = 0; gy < sp.grid_h; ++gy)
        for (int gx = 0; gx < sp.grid_w; ++gx)
          for (int a = 0; a < static_cast<int>(sp.gd_anchors.size()); ++a)
            for (int k = 0; k < static_cast<int>(sp.gd_angles.size()); ++k)
              f(GdSlot{s, gx, gy, a, k});
    }
  }

  friend bool operator==(const HeadLayout& a, const HeadLayout& b) {
    return a.num_classes_ == b.num_classes_ && a.input_w_ == b.input_w_ &&
           a.input_h_ == b.input_h_ && a.scales_ == b.scales_;
  }

 private:
  int num_classes_ = 0;
  int input_w_ = 0;
  int input_h_ = 0;
  std::vector<ScaleSpec> scales_;
  std::vector<std::size_t> offsets_;
};

/// Strides 32/16/8 for scales x1/x2/x4 with the fixed anchor priors. GD
/// anchors exist only at x1 and x2.
inline std::vector<ScaleSpec> default_scale_specs(int input_size = 608) {
  if (input_size <= 0 || input_size % 32 != 0) {
    throw Error(ErrorCode::BadInputSize,
                "input size " + std::to_string(input_size) + " is not a positive multiple of 32");
  }
  constexpr double pi = std::numbers::pi;
  const std::vector<double> angles{0.0, pi / 4, pi / 2, 3 * pi / 4};
  std::vector<ScaleSpec> specs(3);
  specs[0] = {1, 32, input_size / 32, input_size / 32, {{540, 540}, {480, 480}, {420, 420}}, {{300, 300}}, angles};
  specs[1] = {2, 16, input_size / 16, input_size / 16, {{360, 360}, {300, 300}, {240, 240}}, {{100, 100}}, angles};
  specs[2] = {4, 8, input_size / 8, input_size / 8, {{180, 180}, {120, 120}, {60, 60}}, {}, {}};
  return specs;
}

inline HeadLayout default_layout(int input_size = 608, int num_classes = 31) {
  return HeadLayout(num_classes, input_size, input_size, default_scale_specs(input_size));
}

/// Raw head outputs (t-values) for every slot of a layout.
template <class Real>
class BasicHeadTensor {
 public:
  BasicHeadTensor() = default;
  explicit BasicHeadTensor(HeadLayout layout)
      : layout_(std::move(layout)), values_(layout_.total_values(), Real(0)) {}

  const HeadLayout& layout() const { return layout_; }
  std::span<Real> values() { return values_; }
  std::span<const Real> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  std::span<Real> scale_values(int s) {
    return std::span<Real>(values_).subspan(layout_.scale_offset(s), layout_.scale_values(s));
  }
  std::span<const Real> scale_values(int s) const {
    return std::span<const Real>(values_).subspan(layout_.scale_offset(s), layout_.scale_values(s));
  }

  std::span<Real> od(const OdSlot& k) {
    return std::span<Real>(values_).subspan(layout_.offset(k), static_cast<std::size_t>(layout_.od_width()));
  }
  std::span<const Real> od(const OdSlot& k) const {
    return std::span<const Real>(values_).subspan(layout_.offset(k),
                                                  static_cast<std::size_t>(layout_.od_width()));
  }
  std::span<Real> gd(const GdSlot& k) {
    return std::span<Real>(values_).subspan(layout_.offset(k), static_cast<std::size_t>(layout_.gd_width()));
  }
  std::span<const Real> gd(const GdSlot& k) const {
    return std::span<const Real>(values_).subspan(layout_.offset(k),
                                                  static_cast<std::size_t>(layout_.gd_width()));
  }

  template <class Other>
  BasicHeadTensor<Other> cast() const {
    BasicHeadTensor<Other> out(layout_);
    std::transform(values_.begin(), values_.end(), out.values().begin(),
                   [](Real v) { return static_cast<Other>(v); });
    return out;
  }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](Real v) { return std::isfinite(v); });
  }

  friend bool operator==(const BasicHeadTensor& a, const BasicHeadTensor& b) {
    return a.layout_ == b.layout_ && a.values_ == b.values_;
  }

 private:
  HeadLayout layout_;
  std::vector<Real> values_;
};

using HeadTensor = BasicHeadTensor<double>;

template <class Real>
Real sigmoid(Real t) {
  if (t >= 0) return Real(1) / (Real(1) + std::exp(-t));
  const Real e = std::exp(t);
  return e / (Real(1) + e);
}

/// log(1 + e^t) without overflow.
template <class Real>
Real softplus(Real t) {
  return std::max(t, Real(0)) + std::log1p(std::exp(-std::abs(t)));
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

template <class Real>
std::vector<double> softmax(std::span<const Real> z) {
  std::vector<double> out(z.size());
  if (z.empty()) return out;
  const double m = static_cast<double>(*std::max_element(z.begin(), z.end()));
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(static_cast<double>(z[i]) - m);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

struct Detection {
  int class_id = 0;
  std::vector<double> class_scores;
  double pr = 0.0;
  AxisRect box;      // clamped to the image
  AxisRect raw_box;  // as decoded, before clamping
  std::vector<double> fc_scores;
  std::vector<double> cc_scores;
  OdSlot source;
};

struct GraspCandidate {
  OrientedRect rect;
  double pr = 0.0;
  int class_id = 0;
  std::vector<double> class_scores;
  GdSlot source;
};

namespace detail {

// Exponent cap for the size law; keeps decoded sizes finite for absurd inputs.
inline constexpr double kMaxLogScale = 60.0;
// Decoded extents below this are floored so boxes stay non-degenerate.
inline constexpr double kMinExtent = 1e-6;

inline double decode_extent(double prior, double t) {
  return std::max(kMinExtent, prior * std::exp(std::clamp(t, -kMaxLogScale, kMaxLogScale)));
}

inline int argmax(const std::vector<double>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

inline void require_layout(const HeadTensor& h, const HeadLayout& layout) {
  if (!(h.layout() == layout)) {
    throw Error(ErrorCode::ShapeMismatch, "head tensor layout disagrees with the scale specs");
  }
}

}  // namespace detail

/// Decodes every OD anchor slot whose objectness reaches `conf_threshold`.
/// Centers are sigma(t) + cell corner in grid units, times the stride; sizes
/// follow prior * exp(t). Boxes are clamped to the image.
inline std::vector<Detection> decode_od(const HeadTensor& h, double conf_threshold) {
  const HeadLayout& L = h.layout();
  const int C = L.num_classes();
  std::vector<Detection> out;
  L.for_each_od_slot([&](const OdSlot& k) {
    const auto t = h.od(k);
    const double pr = sigmoid(t[od_ch::pr]);
    if (pr < conf_threshold) return;
    const auto& sp = L.scale(k.scale);
    const AnchorSize prior = sp.od_anchors[static_cast<std::size_t>(k.anchor)];
    const double cx = (sigmoid(t[od_ch::x]) + k.gx) * sp.stride;
    const double cy = (sigmoid(t[od_ch::y]) + k.gy) * sp.stride;
    const double w = detail::decode_extent(prior.w, t[od_ch::w]);
    const double bh = detail::decode_extent(prior.h, t[od_ch::h]);
    const double x1 = std::max(0.0, cx - w / 2);
    const double y1 = std::max(0.0, cy - bh / 2);
    const double x2 = std::min(static_cast<double>(L.input_w()), cx + w / 2);
    const double y2 = std::min(static_cast<double>(L.input_h()), cy + bh / 2);
    Detection d;
    d.class_scores = softmax(t.subspan(od_ch::cls, static_cast<std::size_t>(C)));
    d.class_id = detail::argmax(d.class_scores);
    d.pr = pr;
    d.box = AxisRect(x1, y1, x2, y2);
    d.raw_box = AxisRect::from_center(cx, cy, w, bh);
    d.fc_scores.resize(static_cast<std::size_t>(C + 1));
    d.cc_scores.resize(static_cast<std::size_t>(C + 1));
    for (int c = 0; c <= C; ++c) {
      d.fc_scores[static_cast<std::size_t>(c)] = sigmoid(t[static_cast<std::size_t>(L.fc_offset() + c)]);
      d.cc_scores[static_cast<std::size_t>(c)] = sigmoid(t[static_cast<std::size_t>(L.cc_offset() + c)]);
    }
    d.source = k;
    out.push_back(std::move(d));
  });
  return out;
}

inline std::vector<Detection> decode_od(const HeadTensor& h, const HeadLayout& layout,
                                        double conf_threshold) {
  detail::require_layout(h, layout);
  return decode_od(h, conf_threshold);
}

/// Decodes every GD anchor-angle slot above threshold. theta is the angle
/// prior plus its residual, normalized into [0, pi).
inline std::vector<GraspCandidate> decode_gd(const HeadTensor& h, double conf_threshold) {
  const HeadLayout& L = h.layout();
  const int C = L.num_classes();
  std::vector<GraspCandidate> out;
  L.for_each_gd_slot([&](const GdSlot& k) {
    const auto t = h.gd(k);
    const double pr = sigmoid(t[gd_ch::pr]);
    if (pr < conf_threshold) return;
    const auto& sp = L.scale(k.scale);
    const AnchorSize prior = sp.gd_anchors[static_cast<std::size_t>(k.anchor)];
    const double cx = (sigmoid(t[gd_ch::x]) + k.gx) * sp.stride;
    const double cy = (sigmoid(t[gd_ch::y]) + k.gy) * sp.stride;
    const double w = detail::decode_extent(prior.w, t[gd_ch::w]);
    const double gh = detail::decode_extent(prior.h, t[gd_ch::h]);
    const double theta = sp.gd_angles[static_cast<std::size_t>(k.angle)] + t[gd_ch::theta];
    GraspCandidate g;
    g.rect = OrientedRect(cx, cy, w, gh, theta);
    g.pr = pr;
    g.class_scores = softmax(t.subspan(gd_ch::cls, static_cast<std::size_t>(C)));
    g.class_id = detail::argmax(g.class_scores);
    g.source = k;
    out.push_back(std::move(g));
  });
  return out;
}

inline std::vector<GraspCandidate> decode_gd(const HeadTensor& h, const HeadLayout& layout,
                                             double conf_threshold) {
  detail::require_layout(h, layout);
  return decode_gd(h, conf_threshold);
}

// ---------------------------------------------------------------------------
// Target encoding

/// Encoded regression/classification targets for one positive OD slot.
struct OdTarget {
  OdSlot slot;
  double tx = 0, ty = 0, tw = 0, th = 0;
  // Center fractions inside the cell (clamped) and box size, in pixels.
  double fx = 0, fy = 0;
  double w = 0, h = 0;
  int class_id = 0;
  std::vector<std::uint8_t> fc;  // C + 1, last slot = no class
  std::vector<std::uint8_t> cc;
  int object_id = 0;
};

struct GdTarget {
  GdSlot slot;
  double tx = 0, ty = 0, tw = 0, th = 0, ttheta = 0;
  double fx = 0, fy = 0;
  double w = 0, h = 0;
  double theta = 0;  // ground-truth orientation in [0, pi)
  int class_id = 0;
  int object_id = 0;
  int grasp_index = 0;
};

/// Positive set with targets; every other slot is a negative.
class TargetAssignment {
 public:
  TargetAssignment() = default;
  explicit TargetAssignment(HeadLayout layout) : layout_(std::move(layout)) {
    for (int s = 0; s < layout_.num_scales(); ++s) {
      const auto& sp = layout_.scale(s);
      od_mask_.emplace_back(static_cast<std::size_t>(sp.cells()) * sp.od_anchors.size(), 0);
      gd_mask_.emplace_back(static_cast<std::size_t>(sp.cells() * sp.gd_slots_per_cell()), 0);
    }
  }

  const HeadLayout& layout() const { return layout_; }
  const std::vector<OdTarget>& od() const { return od_; }
  const std::vector<GdTarget>& gd() const { return gd_; }
  int dropped() const { return dropped_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  bool is_positive(const OdSlot& k) const {
    return od_mask_[static_cast<std::size_t>(k.scale)][layout_.slot_index(k)] != 0;
  }
  bool is_positive(const GdSlot& k) const {
    return gd_mask_[static_cast<std::size_t>(k.scale)][layout_.slot_index(k)] != 0;
  }

  std::size_t positive_count() const { return od_.size() + gd_.size(); }
  std::size_t negative_count() const {
    return layout_.od_slot_count() + layout_.gd_slot_count() - positive_count();
  }

  template <class F>
  void for_each_negative_od(F&& f) const {
    layout_.for_each_od_slot([&](const OdSlot& k) {
      if (!is_positive(k)) f(k);
    });
  }
  template <class F>
  void for_each_negative_gd(F&& f) const {
    layout_.for_each_gd_slot([&](const GdSlot& k) {
      if (!is_positive(k)) f(k);
    });
  }

  void add(OdTarget t) {
    od_mask_[static_cast<std::size_t>(t.slot.scale)][layout_.slot_index(t.slot)] = 1;
    od_.push_back(std::move(t));
  }
  void add(GdTarget t) {
    gd_mask_[static_cast<std::size_t>(t.slot.scale)][layout_.slot_index(t.slot)] = 1;
    gd_.push_back(std::move(t));
  }
  void drop(std::string warning) {
    ++dropped_;
    warnings_.push_back(std::move(warning));
  }

 private:
  HeadLayout layout_;
  std::vector<OdTarget> od_;
  std::vector<GdTarget> gd_;
  std::vector<std::vector<std::uint8_t>> od_mask_;
  std::vector<std::vector<std::uint8_t>> gd_mask_;
  int dropped_ = 0;
  std::vector<std::string> warnings_;
};

namespace detail {

inline constexpr double kFracClamp = 1e-9;

struct CellFrac {
  int gx, gy;
  double fx, fy;
};

inline CellFrac locate(double cx, double cy, const ScaleSpec& sp) {
  const double ux = cx / sp.stride;
  const double uy = cy / sp.stride;
  const int gx = std::clamp(static_cast<int>(std::floor(ux)), 0, sp.grid_w - 1);
  const int gy = std::clamp(static_cast<int>(std::floor(uy)), 0, sp.grid_h - 1);
  return {gx, gy, std::clamp(ux - gx, kFracClamp, 1 - kFracClamp),
          std::clamp(uy - gy, kFracClamp, 1 - kFracClamp)};
}

inline double centered_iou(double w, double h, const AnchorSize& a) {
  return axis_iou(AxisRect::from_center(0, 0, w, h), AxisRect::from_center(0, 0, a.w, a.h));
}

}  // namespace detail

/// Builds the positive set for a scene.
///
/// Objects: the (scale, anchor) pair with the best centered IOU against the
/// box, at the cell holding the box center. If that slot is already taken
/// the next-best anchor is used; an object with no free slot is dropped and
/// counted. Grasps: the GD anchor (over all scales) with the best centered
/// IOU and the nearest angle prior under mod-pi distance, with the same
/// fallback. FC/CC targets are the classes the object rests on / that rest
/// on it, or the no-class slot when empty.
inline TargetAssignment encode_targets(const SceneAnnotation& scene, const HeadLayout& L) {
  const int C = L.num_classes();
  const double W = L.input_w();
  const double H = L.input_h();
  if (scene.image_w != L.input_w() || scene.image_h != L.input_h()) {
    throw Error(ErrorCode::ShapeMismatch, "scene image size differs from the head input size");
  }
  constexpr double tol = 1e-6;
  for (const auto& o : scene.objects) {
    if (o.class_id < 0 || o.class_id >= C) {
      throw Error(ErrorCode::ShapeMismatch, "object " + std::to_string(o.id) + " has class out of range");
    }
    if (o.box.x1() < -tol || o.box.y1() < -tol || o.box.x2() > W + tol || o.box.y2() > H + tol) {
      throw Error(ErrorCode::OutOfBounds, "object " + std::to_string(o.id) + " leaves the image");
    }
    for (const auto& g : o.grasps) {
      for (const Point2& p : vertices(g)) {
        if (p.x < -tol || p.y < -tol || p.x > W + tol || p.y > H + tol) {
          throw Error(ErrorCode::OutOfBounds, "a grasp of object " + std::to_string(o.id) + " leaves the image");
        }
      }
    }
    for (int s : o.on_top_of) {
      if (!scene.find(s)) {
        throw Error(ErrorCode::DanglingSupport,
                    "object " + std::to_string(o.id) + " references missing object " + std::to_string(s));
      }
    }
  }

  TargetAssignment out(L);

  for (const auto& o : scene.objects) {
    const Point2 c = o.box.center();
    const double bw = o.box.width();
    const double bh = o.box.height();

    std::vector<std::tuple<double, int, int>> ranked;  // (-iou, scale, anchor)
    for (int s = 0; s < L.num_scales(); ++s) {
      const auto& sp = L.scale(s);
      for (int a = 0; a < static_cast<int>(sp.od_anchors.size()); ++a) {
        ranked.emplace_back(-detail::centered_iou(bw, bh, sp.od_anchors[static_cast<std::size_t>(a)]), s, a);
      }
    }
    std::sort(ranked.begin(), ranked.end());

    OdTarget t;
    bool placed = false;
    for (const auto& [neg_iou, s, a] : ranked) {
      const auto& sp = L.scale(s);
      const auto cell = detail::locate(c.x, c.y, sp);
      const OdSlot slot{s, cell.gx, cell.gy, a};
      if (out.is_positive(slot)) continue;
      const AnchorSize prior = sp.od_anchors[static_cast<std::size_t>(a)];
      t.slot = slot;
      t.fx = cell.fx;
      t.fy = cell.fy;
      t.tx = logit(cell.fx);
      t.ty = logit(cell.fy);
      t.w = bw;
      t.h = bh;
      t.tw = std::log(bw / prior.w);
      t.th = std::log(bh / prior.h);
      placed = true;
      break;
    }
    if (!placed) {
      out.drop("EncodingConflict: object " + std::to_string(o.id) + " has no free anchor slot");
      continue;
    }
    t.class_id = o.class_id;
    t.object_id = o.id;
    t.fc.assign(static_cast<std::size_t>(C + 1), 0);
    t.cc.assign(static_cast<std::size_t>(C + 1), 0);
    for (int s : o.on_top_of) t.fc[static_cast<std::size_t>(scene.find(s)->class_id)] = 1;
    for (const auto& other : scene.objects) {
      if (std::find(other.on_top_of.begin(), other.on_top_of.end(), o.id) != other.on_top_of.end()) {
        t.cc[static_cast<std::size_t>(other.class_id)] = 1;
      }
    }
    if (std::find(t.fc.begin(), t.fc.end(), 1) == t.fc.end()) t.fc[static_cast<std::size_t>(C)] = 1;
    if (std::find(t.cc.begin(), t.cc.end(), 1) == t.cc.end()) t.cc[static_cast<std::size_t>(C)] = 1;
    out.add(std::move(t));
  }

  for (const auto& o : scene.objects) {
    for (std::size_t gi = 0; gi < o.grasps.size(); ++gi) {
      const OrientedRect& g = o.grasps[gi];
      // (-iou, angle distance, negative residual last, scale, anchor, angle)
      std::vector<std::tuple<double, double, int, int, int, int>> ranked;
      for (int s = 0; s < L.num_scales(); ++s) {
        const auto& sp = L.scale(s);
        for (int a = 0; a < static_cast<int>(sp.gd_anchors.size()); ++a) {
          const double iou = detail::centered_iou(g.w(), g.h(), sp.gd_anchors[static_cast<std::size_t>(a)]);
          for (int k = 0; k < static_cast<int>(sp.gd_angles.size()); ++k) {
            const double r = wrapped_angle_diff(g.theta(), sp.gd_angles[static_cast<std::size_t>(k)]);
            ranked.emplace_back(-iou, std::abs(r), r > 0 ? 0 : 1, s, a, k);
          }
        }
      }
      std::sort(ranked.begin(), ranked.end());
      bool placed = false;
      for (const auto& [neg_iou, dist, sign, s, a, k] : ranked) {
        const auto& sp = L.scale(s);
        const auto cell = detail::locate(g.x(), g.y(), sp);
        const GdSlot slot{s, cell.gx, cell.gy, a, k};
        if (out.is_positive(slot)) continue;
        const AnchorSize prior = sp.gd_anchors[static_cast<std::size_t>(a)];
        GdTarget t;
        t.slot = slot;
        t.fx = cell.fx;
        t.fy = cell.fy;
        t.tx = logit(cell.fx);
        t.ty = logit(cell.fy);
        t.w = g.w();
        t.h = g.h();
        t.tw = std::log(g.w() / prior.w);
        t.th = std::log(g.h() / prior.h);
        t.theta = g.theta();
        t.ttheta = wrapped_angle_diff(g.theta(), sp.gd_angles[static_cast<std::size_t>(k)]);
        t.class_id = o.class_id;
        t.object_id = o.id;
        t.grasp_index = static_cast<int>(gi);
        out.add(std::move(t));
        placed = true;
        break;
      }
      if (!placed) {
        out.drop("EncodingConflict: grasp " + std::to_string(gi) + " of object " + std::to_string(o.id) +
                 " has no free anchor slot");
      }
    }
  }
  return out;
}

/// Logit magnitude used for "certain" probabilities when rendering targets.
inline constexpr double kSaturatedLogit = 40.0;

/// Writes the targets of an assignment into an otherwise empty tensor:
/// positives get their regression targets and +saturation objectness and
/// class logits, every other objectness gets -saturation.
inline HeadTensor render_targets(const TargetAssignment& a, double saturation = kSaturatedLogit) {
  const HeadLayout& L = a.layout();
  const int C = L.num_classes();
  HeadTensor h(L);
  L.for_each_od_slot([&](const OdSlot& k) { h.od(k)[od_ch::pr] = -saturation; });
  L.for_each_gd_slot([&](const GdSlot& k) { h.gd(k)[gd_ch::pr] = -saturation; });
  for (const auto& t : a.od()) {
    auto v = h.od(t.slot);
    v[od_ch::x] = t.tx;
    v[od_ch::y] = t.ty;
    v[od_ch::w] = t.tw;
    v[od_ch::h] = t.th;
    v[od_ch::pr] = saturation;
    for (int c = 0; c < C; ++c) v[static_cast<std::size_t>(od_ch::cls + c)] = c == t.class_id ? saturation : -saturation;
    for (int c = 0; c <= C; ++c) {
      v[static_cast<std::size_t>(L.fc_offset() + c)] = t.fc[static_cast<std::size_t>(c)] ? saturation : -saturation;
      v[static_cast<std::size_t>(L.cc_offset() + c)] = t.cc[static_cast<std::size_t>(c)] ? saturation : -saturation;
    }
  }
  for (const auto& t : a.gd()) {
    auto v = h.gd(t.slot);
    v[gd_ch::x] = t.tx;
    v[gd_ch::y] = t.ty;
    v[gd_ch::w] = t.tw;
    v[gd_ch::h] = t.th;
    v[gd_ch::theta] = t.ttheta;
    v[gd_ch::pr] = saturation;
    for (int c = 0; c < C; ++c) v[static_cast<std::size_t>(gd_ch::cls + c)] = c == t.class_id ? saturation : -saturation;
  }
  return h;
}

}  // namespace mtgrasp
