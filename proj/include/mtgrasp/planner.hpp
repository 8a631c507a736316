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
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mtgrasp/error.hpp"
#include "mtgrasp/geometry.hpp"
#include "mtgrasp/postprocess.hpp"
#include "mtgrasp/scene.hpp"

namespace mtgrasp {

/// Topological order in which everything resting on a node is grasped
/// before the node itself. Ties: higher detection pr first, then lower id.
inline std::vector<int> grasp_order(const RelationGraph& g) {
  std::map<int, int> blockers;  // remaining nodes resting on this one
  for (const auto& n : g.nodes) blockers[n.id] = 0;
  for (const auto& e : g.edges) ++blockers[e.parent];
  std::set<int> done;
  std::vector<int> order;
  while (order.size() < g.nodes.size()) {
    const PairedObject* pick = nullptr;
    for (const auto& n : g.nodes) {
      if (done.count(n.id) || blockers[n.id] != 0) continue;
      if (!pick || n.detection.pr > pick->detection.pr ||
          (n.detection.pr == pick->detection.pr && n.id < pick->id)) {
        pick = &n;
      }
    }
    if (!pick) throw Error(ErrorCode::CyclicGraph, "relation graph contains a cycle");
    done.insert(pick->id);
    order.push_back(pick->id);
    for (const auto& e : g.edges) {
      if (e.child == pick->id) --blockers[e.parent];
    }
  }
  return order;
}

enum class PlanStatus { TargetGrasped, TargetNotFound, Exhausted };

constexpr std::string_view to_string(PlanStatus s) {
  switch (s) {
    case PlanStatus::TargetGrasped: return "TargetGrasped";
    case PlanStatus::TargetNotFound: return "TargetNotFound";
    case PlanStatus::Exhausted: return "Exhausted";
  }
  return "Unknown";
}

struct GraspPlan {
  std::vector<int> ids;
  PlanStatus status = PlanStatus::TargetNotFound;
};

/// Everything stacked above the target (in grasp order), then the target.
/// Among several target instances the one with the highest pr is chosen.
inline GraspPlan plan_target(const RelationGraph& g, int target_class) {
  const PairedObject* target = nullptr;
  for (const auto& n : g.nodes) {
    if (n.detection.class_id != target_class) continue;
    if (!target || n.detection.pr > target->detection.pr) target = &n;
  }
  if (!target) return {{}, PlanStatus::TargetNotFound};

  std::set<int> above;
  std::vector<int> frontier{target->id};
  while (!frontier.empty()) {
    const int id = frontier.back();
    frontier.pop_back();
    for (const auto& e : g.edges) {
      if (e.parent == id && above.insert(e.child).second) frontier.push_back(e.child);
    }
  }
  GraspPlan plan;
  plan.status = PlanStatus::TargetGrasped;
  for (int id : grasp_order(g)) {
    if (above.count(id)) plan.ids.push_back(id);
  }
  plan.ids.push_back(target->id);
  return plan;
}

// ---------------------------------------------------------------------------
// Scene simulation

struct SceneEntity {
  int id = 0;
  int class_id = 0;
  AxisRect box;
  std::vector<int> supports;  // ids directly underneath
  bool present = true;
};

/// Desk-scale scene: boxes, support relation and which objects are still
/// on the table. An object is visible iff the share of its box covered by
/// the objects stacked (transitively) above it is below `visibility`.
class SceneState {
 public:
  SceneState() = default;
  SceneState(std::vector<SceneEntity> objects, double visibility = 0.8)
      : objects_(std::move(objects)), visibility_(visibility) {
    validate();
  }

  const std::vector<SceneEntity>& objects() const { return objects_; }
  double visibility_threshold() const { return visibility_; }

  const SceneEntity* find(int id) const {
    for (const auto& o : objects_) {
      if (o.id == id) return &o;
    }
    return nullptr;
  }

  std::vector<const SceneEntity*> present() const {
    std::vector<const SceneEntity*> out;
    for (const auto& o : objects_) {
      if (o.present) out.push_back(&o);
    }
    return out;
  }

  /// Present objects resting (directly or through a chain) on `id`.
  std::set<int> above(int id) const {
    std::set<int> out;
    std::vector<int> frontier{id};
    while (!frontier.empty()) {
      const int cur = frontier.back();
      frontier.pop_back();
      for (const auto& o : objects_) {
        if (!o.present) continue;
        if (std::find(o.supports.begin(), o.supports.end(), cur) != o.supports.end() && out.insert(o.id).second) {
          frontier.push_back(o.id);
        }
      }
    }
    return out;
  }

  bool has_load(int id) const {
    for (const auto& o : objects_) {
      if (o.present && std::find(o.supports.begin(), o.supports.end(), id) != o.supports.end()) return true;
    }
    return false;
  }

  /// Fraction of the box of `id` covered by the union of boxes above it.
  double coverage(int id) const {
    const SceneEntity* self = find(id);
    if (!self) return 0.0;
    std::vector<AxisRect> clipped;
    for (int a : above(id)) {
      const AxisRect& b = find(a)->box;
      const double x1 = std::max(b.x1(), self->box.x1()), x2 = std::min(b.x2(), self->box.x2());
      const double y1 = std::max(b.y1(), self->box.y1()), y2 = std::min(b.y2(), self->box.y2());
      if (x1 < x2 && y1 < y2) clipped.emplace_back(x1, y1, x2, y2);
    }
    return union_area(clipped) / self->box.area();
  }

  bool visible(int id) const {
    const SceneEntity* o = find(id);
    return o && o->present && coverage(id) < visibility_;
  }

  void remove(int id) {
    for (auto& o : objects_) {
      if (o.id == id) o.present = false;
    }
    for (auto& o : objects_) {
      std::erase(o.supports, id);
    }
  }

  static double union_area(const std::vector<AxisRect>& rects) {
    if (rects.empty()) return 0.0;
    std::vector<double> xs, ys;
    for (const auto& r : rects) {
      xs.insert(xs.end(), {r.x1(), r.x2()});
      ys.insert(ys.end(), {r.y1(), r.y2()});
    }
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
      for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
        const Point2 mid{(xs[i] + xs[i + 1]) / 2, (ys[j] + ys[j + 1]) / 2};
        for (const auto& r : rects) {
          if (r.contains(mid)) {
            area += (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
            break;
          }
        }
      }
    }
    return area;
  }

 private:
  void validate() const {
    std::set<int> ids;
    for (const auto& o : objects_) {
      if (!ids.insert(o.id).second) throw Error(ErrorCode::BadScene, "duplicate object id " + std::to_string(o.id));
    }
    for (const auto& o : objects_) {
      for (int s : o.supports) {
        if (!ids.count(s)) {
          throw Error(ErrorCode::BadScene, "object " + std::to_string(o.id) + " rests on missing id " + std::to_string(s));
        }
      }
    }
    for (const auto& o : objects_) {
      if (above(o.id).count(o.id)) {
        throw Error(ErrorCode::BadScene, "support cycle through object " + std::to_string(o.id));
      }
    }
  }

  std::vector<SceneEntity> objects_;
  double visibility_ = 0.8;
};

inline SceneState scene_state_from(const SceneAnnotation& scene, double visibility = 0.8) {
  std::vector<SceneEntity> objs;
  for (const auto& o : scene.objects) objs.push_back({o.id, o.class_id, o.box, o.on_top_of, true});
  return SceneState(std::move(objs), visibility);
}

/// Maps the currently visible part of a scene to a relation graph.
using Detector = std::function<RelationGraph(const SceneState&)>;

/// Perfect detector: reports exactly the visible objects with their true
/// classes and boxes. A visible object is linked to the first visible object
/// below it, looking through hidden ones. Confidences are a seeded function
/// of the object id so repeated detections agree.
inline Detector oracle_detector(std::uint64_t seed) {
  return [seed](const SceneState& s) {
    RelationGraph g;
    std::set<int> vis;
    for (const SceneEntity* o : s.present()) {
      if (s.visible(o->id)) vis.insert(o->id);
    }
    for (const SceneEntity* o : s.present()) {
      if (!vis.count(o->id)) continue;
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(o->id)};
      std::mt19937_64 rng(seq);
      PairedObject p;
      p.id = o->id;
      p.detection.class_id = o->class_id;
      p.detection.class_scores.assign(static_cast<std::size_t>(o->class_id + 1), 0.0);
      p.detection.class_scores.back() = 1.0;
      p.detection.pr = 0.5 + 0.5 * std::generate_canonical<double, 53>(rng);
      p.detection.box = o->box;
      g.nodes.push_back(std::move(p));
    }
    for (int id : vis) {
      std::set<int> seen;
      std::vector<int> frontier(s.find(id)->supports);
      while (!frontier.empty()) {
        const int cur = frontier.back();
        frontier.pop_back();
        if (!seen.insert(cur).second) continue;
        if (vis.count(cur)) {
          g.edges.push_back({id, cur, 1.0});
        } else {
          const auto& next = s.find(cur)->supports;
          frontier.insert(frontier.end(), next.begin(), next.end());
        }
      }
    }
    std::sort(g.edges.begin(), g.edges.end(),
              [](const RelationEdge& a, const RelationEdge& b) {
                return std::pair(a.child, a.parent) < std::pair(b.child, b.parent);
              });
    finalize_graph(g);
    return g;
  };
}

struct EpisodeStep {
  int step = 0;
  bool target_visible = false;
  int node_id = -1;
  int object_id = -1;   // scene object the grasp landed on, -1 if none
  std::string outcome;  // removed | blocked | missed
};

struct EpisodeRecord {
  int target_class = 0;
  bool success = false;
  int steps = 0;
  PlanStatus status = PlanStatus::Exhausted;
  std::vector<int> removed;
  std::vector<EpisodeStep> log;
};

namespace detail {

/// Exploration move when the target is not detected: the grasp-ready node
/// whose box overlaps the other detections the most, then highest pr.
inline int exploration_pick(const RelationGraph& g) {
  std::optional<std::size_t> best;
  double best_overlap = -1.0;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (g.ord[i] != 0) continue;
    double overlap = 0.0;
    for (std::size_t j = 0; j < g.nodes.size(); ++j) {
      if (j != i) overlap += intersection_area(g.nodes[i].detection.box, g.nodes[j].detection.box);
    }
    const auto& n = g.nodes[i];
    if (!best || overlap > best_overlap ||
        (overlap == best_overlap && (n.detection.pr > g.nodes[*best].detection.pr ||
                                     (n.detection.pr == g.nodes[*best].detection.pr && n.id < g.nodes[*best].id)))) {
      best = i;
      best_overlap = overlap;
    }
  }
  return g.nodes.at(best.value()).id;
}

/// Present scene object a detected box refers to (max IOU, must exceed 0.5).
inline std::optional<int> resolve(const SceneState& s, const PairedObject& node) {
  std::optional<int> best;
  double best_iou = 0.5;
  for (const SceneEntity* o : s.present()) {
    const double iou = axis_iou(o->box, node.detection.box);
    if (iou > best_iou || (best && iou == best_iou && o->id == node.id)) {
      best = o->id;
      best_iou = iou;
    }
  }
  return best;
}

}  // namespace detail

/// Runs one grasping episode. Every step re-detects the scene and executes a
/// single grasp: the head of the target plan when the target is detected,
/// otherwise an exploration removal. Grasping an object that still carries
/// another wastes the step. Ends on target removal, on an empty detection,
/// or after max_steps.
inline EpisodeRecord simulate(SceneState scene, int target_class, const Detector& detector, int max_steps) {
  if (max_steps < 1) throw Error(ErrorCode::InvalidConfig, "max_steps must be at least 1");
  EpisodeRecord rec;
  rec.target_class = target_class;
  for (int step = 1; step <= max_steps; ++step) {
    const RelationGraph g = detector(scene);
    if (g.nodes.empty()) {
      rec.status = PlanStatus::TargetNotFound;
      return rec;
    }
    const GraspPlan plan = plan_target(g, target_class);
    EpisodeStep st;
    st.step = step;
    st.target_visible = plan.status == PlanStatus::TargetGrasped;
    st.node_id = st.target_visible ? plan.ids.front() : detail::exploration_pick(g);
    const auto resolved = detail::resolve(scene, g.nodes[g.index_of(st.node_id).value()]);
    rec.steps = step;
    if (!resolved) {
      st.outcome = "missed";
    } else if (scene.has_load(*resolved)) {
      st.object_id = *resolved;
      st.outcome = "blocked";
    } else {
      st.object_id = *resolved;
      st.outcome = "removed";
      const bool was_target = scene.find(*resolved)->class_id == target_class;
      scene.remove(*resolved);
      rec.removed.push_back(*resolved);
      if (was_target) {
        rec.log.push_back(st);
        rec.success = true;
        rec.status = PlanStatus::TargetGrasped;
        return rec;
      }
    }
    rec.log.push_back(st);
  }
  rec.status = PlanStatus::Exhausted;
  return rec;
}

}  // namespace mtgrasp
