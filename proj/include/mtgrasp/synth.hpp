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
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "mtgrasp/error.hpp"
#include "mtgrasp/geometry.hpp"
#include "mtgrasp/planner.hpp"
#include "mtgrasp/scene.hpp"

namespace mtgrasp {

struct SynthScene {
  SceneAnnotation annotation;
  SceneState state;
};

namespace synth_detail {

inline constexpr double kMinStackIou = 0.15;
inline constexpr double kMinGraspHullIou = 0.08;
inline constexpr double kMaxGraspOverlap = 0.20;

inline bool inside(const OrientedRect& g, const AxisRect& box) {
  for (const Point2& p : vertices(g)) {
    if (!box.contains(p)) return false;
  }
  return true;
}

}  // namespace synth_detail

/// Seeded desk-scale pile. Objects get distinct classes and sizes of
/// 15-32% of the image side; each object rests on at most one earlier object
/// (probability 0.6), overlapping it with axis IOU >= 0.15. Every object
/// carries 1-3 grasps lying inside its box, whose hulls cover at least 8% of
/// the box and which overlap each other by rotated IOU <= 0.2.
inline SynthScene synth_scene(std::uint64_t seed, int n_objects, int num_classes = 31, int image_size = 608) {
  if (n_objects < 1 || n_objects > 10) throw Error(ErrorCode::InvalidConfig, "object count must be in [1, 10]");
  if (num_classes < n_objects) throw Error(ErrorCode::InvalidConfig, "need at least one class per object");
  if (image_size < 64) throw Error(ErrorCode::InvalidConfig, "image size must be at least 64");
  std::mt19937_64 rng(seed);
  auto uni = [&](double a, double b) { return a + (b - a) * std::generate_canonical<double, 53>(rng); };
  auto pick = [&](int n) { return static_cast<int>(std::min<double>(n - 1, uni(0, n))); };
  const double S = image_size;

  std::vector<int> classes(static_cast<std::size_t>(num_classes));
  std::iota(classes.begin(), classes.end(), 0);
  for (int i = 0; i < n_objects; ++i) {
    std::swap(classes[static_cast<std::size_t>(i)], classes[static_cast<std::size_t>(i + pick(num_classes - i))]);
  }

  SceneAnnotation scene;
  scene.image_w = scene.image_h = image_size;
  for (int i = 0; i < n_objects; ++i) {
    SceneObject o;
    o.id = i;
    o.class_id = classes[static_cast<std::size_t>(i)];
    std::optional<int> parent;
    if (i > 0 && uni(0, 1) < 0.6) parent = pick(i);

    const double w = uni(0.15, 0.32) * S;
    const double h = uni(0.15, 0.32) * S;
    auto clamp_center = [&](double c, double extent) { return std::clamp(c, extent / 2 + 1, S - extent / 2 - 1); };
    if (!parent) {
      o.box = AxisRect::from_center(uni(w / 2 + 1, S - w / 2 - 1), uni(h / 2 + 1, S - h / 2 - 1), w, h);
    } else {
      const AxisRect& pb = scene.objects[static_cast<std::size_t>(*parent)].box;
      bool ok = false;
      for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
        const Point2 pc = pb.center();
        const double cx = clamp_center(pc.x + uni(-0.35, 0.35) * pb.width(), w);
        const double cy = clamp_center(pc.y + uni(-0.35, 0.35) * pb.height(), h);
        o.box = AxisRect::from_center(cx, cy, w, h);
        ok = axis_iou(o.box, pb) >= synth_detail::kMinStackIou;
      }
      if (!ok) {
        const Point2 pc = pb.center();
        o.box = AxisRect::from_center(pc.x, pc.y, 0.8 * pb.width(), 0.8 * pb.height());
      }
      o.on_top_of.push_back(*parent);
    }

    const int n_grasps = 1 + pick(3);
    const double m = std::min(o.box.width(), o.box.height());
    for (int attempt = 0; attempt < 400 && static_cast<int>(o.grasps.size()) < n_grasps; ++attempt) {
      const double gw = uni(0.35, 0.6) * m;
      const double gh = uni(0.18, 0.3) * m;
      const OrientedRect g(uni(o.box.x1(), o.box.x2()), uni(o.box.y1(), o.box.y2()), gw, gh,
                           uni(0, std::numbers::pi));
      if (!synth_detail::inside(g, o.box)) continue;
      if (axis_iou(aabb(g), o.box) < synth_detail::kMinGraspHullIou) continue;
      bool clash = false;
      for (const auto& other : o.grasps) clash = clash || rotated_iou(g, other) > synth_detail::kMaxGraspOverlap;
      if (!clash) o.grasps.push_back(g);
    }
    if (o.grasps.empty()) {
      const Point2 c = o.box.center();
      o.grasps.emplace_back(c.x, c.y, 0.6 * m, 0.3 * m, 0.0);
    }
    scene.objects.push_back(std::move(o));
  }
  validate_scene(scene);
  return {scene, scene_state_from(scene)};
}

}  // namespace mtgrasp
