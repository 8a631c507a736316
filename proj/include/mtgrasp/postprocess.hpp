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
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mtgrasp/anchor_codec.hpp"
#include "mtgrasp/error.hpp"
#include "mtgrasp/geometry.hpp"

namespace mtgrasp {

struct PostConfig {
  double od_nms_iou = 0.45;
  double gd_nms_iou = 0.30;
  double od_conf = 0.5;
  double gd_conf = 0.5;
  double pair_iou_threshold = 0.05;
  double relation_iou_threshold = 0.10;
  double cc_score_threshold = 0.5;
  bool class_aware_nms = true;

  void validate() const {
    for (double v : {od_nms_iou, gd_nms_iou, od_conf, gd_conf, pair_iou_threshold, relation_iou_threshold,
                     cc_score_threshold}) {
      if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidConfig, "post-processing thresholds must lie in [0, 1]");
    }
  }
};

/// Greedy suppression in descending probability (stable, so ties keep the
/// lower original index first). An item is dropped iff it overlaps an
/// already-kept item (of the same class when class_aware) by more than
/// `iou_threshold`.
template <class Item, class IouFn>
std::vector<Item> nms(const std::vector<Item>& items, double iou_threshold, bool class_aware, IouFn iou) {
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return items[a].pr > items[b].pr; });
  std::vector<Item> kept;
  for (std::size_t i : order) {
    const Item& cand = items[i];
    bool suppressed = false;
    for (const Item& k : kept) {
      if (class_aware && k.class_id != cand.class_id) continue;
      if (iou(k, cand) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

inline std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_threshold, bool class_aware = true) {
  return nms(dets, iou_threshold, class_aware,
             [](const Detection& a, const Detection& b) { return axis_iou(a.box, b.box); });
}

inline std::vector<GraspCandidate> nms(const std::vector<GraspCandidate>& grasps, double iou_threshold,
                                       bool class_aware = true) {
  return nms(grasps, iou_threshold, class_aware,
             [](const GraspCandidate& a, const GraspCandidate& b) { return rotated_iou(a.rect, b.rect); });
}

struct PairedObject {
  Detection detection;
  std::optional<GraspCandidate> best_grasp;
  int id = 0;
};

/// Assigns each detection its best same-class grasp. Detections are served
/// in descending pr; a grasp serves at most one detection. Candidates need
/// axis IOU(aabb(grasp), box) >= pair threshold; the winner has the highest
/// pr, then the higher IOU, then the lower index.
inline std::vector<PairedObject> pair(const std::vector<Detection>& dets, const std::vector<GraspCandidate>& grasps,
                                      const PostConfig& cfg) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].pr > dets[b].pr; });
  std::vector<AxisRect> hulls;
  hulls.reserve(grasps.size());
  for (const auto& g : grasps) hulls.push_back(aabb(g.rect));

  std::vector<bool> used(grasps.size(), false);
  std::vector<PairedObject> out(dets.size());
  for (std::size_t i : order) {
    const Detection& d = dets[i];
    std::optional<std::size_t> best;
    double best_iou = 0.0;
    for (std::size_t j = 0; j < grasps.size(); ++j) {
      if (used[j] || grasps[j].class_id != d.class_id) continue;
      const double iou = axis_iou(hulls[j], d.box);
      if (iou < cfg.pair_iou_threshold) continue;
      if (!best || grasps[j].pr > grasps[*best].pr ||
          (grasps[j].pr == grasps[*best].pr && iou > best_iou)) {
        best = j;
        best_iou = iou;
      }
    }
    out[i].detection = d;
    out[i].id = static_cast<int>(i);
    if (best) {
      used[*best] = true;
      out[i].best_grasp = grasps[*best];
    }
  }
  return out;
}

/// child rests on parent.
struct RelationEdge {
  int child = 0;
  int parent = 0;
  double score = 0.0;
  friend bool operator==(const RelationEdge&, const RelationEdge&) = default;
};

struct RelationGraph {
  std::vector<PairedObject> nodes;
  std::vector<RelationEdge> edges;
  std::vector<int> ord;  // parallel to nodes

  std::optional<std::size_t> index_of(int id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].id == id) return i;
    }
    return std::nullopt;
  }

  int ord_of(int id) const { return ord.at(index_of(id).value()); }

  /// Ids of nodes resting directly on `id`.
  std::vector<int> on_top_of(int id) const {
    std::vector<int> out;
    for (const auto& e : edges) {
      if (e.parent == id) out.push_back(e.child);
    }
    return out;
  }
};

namespace detail {

/// Returns the edge indices along one directed cycle, or empty if acyclic.
inline std::vector<std::size_t> find_cycle(const std::vector<int>& ids, const std::vector<RelationEdge>& edges) {
  std::map<int, std::vector<std::size_t>> out_edges;  // child -> edge indices
  for (std::size_t e = 0; e < edges.size(); ++e) out_edges[edges[e].child].push_back(e);
  std::map<int, int> state;  // 0 new, 1 on the current path, 2 done
  std::vector<std::size_t> path;
  // Iterative DFS; frames hold (node, next out-edge position).
  for (int root : ids) {
    if (state[root] != 0) continue;
    std::vector<std::pair<int, std::size_t>> frames{{root, 0}};
    state[root] = 1;
    while (!frames.empty()) {
      auto& [node, pos] = frames.back();
      const auto it = out_edges.find(node);
      if (it == out_edges.end() || pos == it->second.size()) {
        state[node] = 2;
        frames.pop_back();
        if (!path.empty()) path.pop_back();
        continue;
      }
      const std::size_t e = it->second[pos++];
      const int next = edges[e].parent;
      if (state[next] == 1) {
        std::vector<std::size_t> cycle{e};
        for (auto k = path.rbegin(); k != path.rend() && edges[cycle.back()].child != next; ++k) {
          cycle.push_back(*k);
        }
        std::reverse(cycle.begin(), cycle.end());
        return cycle;
      }
      if (state[next] == 0) {
        state[next] = 1;
        path.push_back(e);
        frames.push_back({next, 0});
      }
    }
  }
  return {};
}

}  // namespace detail

/// Stacking depth from the top: 0 when nothing rests on a node, else one
/// more than the deepest node resting on it. Requires an acyclic graph.
inline std::vector<int> compute_ord(const std::vector<PairedObject>& nodes, const std::vector<RelationEdge>& edges) {
  std::map<int, std::vector<int>> children;
  for (const auto& e : edges) children[e.parent].push_back(e.child);
  std::map<int, int> memo;
  auto depth = [&](auto& self, int id) -> int {
    if (auto it = memo.find(id); it != memo.end()) return it->second;
    int d = 0;
    if (auto it = children.find(id); it != children.end()) {
      for (int c : it->second) d = std::max(d, 1 + self(self, c));
    }
    memo[id] = d;
    return d;
  };
  std::vector<int> out;
  out.reserve(nodes.size());
  for (const auto& n : nodes) out.push_back(depth(depth, n.id));
  return out;
}

namespace detail {

/// Incremental topological order (Pearce-Kelly). Nodes are dense indices;
/// an edge u -> v requires pos[u] < pos[v].
class DynamicTopoOrder {
 public:
  explicit DynamicTopoOrder(std::size_t n) : pos_(n), out_(n), in_(n), mark_(n, 0) {
    std::iota(pos_.begin(), pos_.end(), std::size_t{0});
  }

  /// Adds u -> v unless it would close a cycle; returns whether it was added.
  bool try_add(std::size_t u, std::size_t v) {
    if (u == v) return false;
    if (pos_[u] > pos_[v]) {
      const std::size_t lb = pos_[v], ub = pos_[u];
      std::vector<std::size_t> fwd, bwd;
      if (!collect(v, ub, lb, true, u, fwd)) {
        clear(fwd);
        return false;
      }
      collect(u, ub, lb, false, v, bwd);
      reorder(fwd, bwd);
    }
    out_[u].push_back(v);
    in_[v].push_back(u);
    return true;
  }

 private:
  // Forward: nodes reachable from `start` with pos <= ub; fails on reaching
  // `target`. Backward: nodes reaching `start` with pos >= lb.
  bool collect(std::size_t start, std::size_t ub, std::size_t lb, bool forward, std::size_t target,
               std::vector<std::size_t>& seen) {
    std::vector<std::size_t> stack{start};
    mark_[start] = 1;
    seen.push_back(start);
    while (!stack.empty()) {
      const std::size_t n = stack.back();
      stack.pop_back();
      for (std::size_t w : forward ? out_[n] : in_[n]) {
        if (forward && w == target) return false;
        if (mark_[w] || (forward ? pos_[w] > ub : pos_[w] < lb)) continue;
        mark_[w] = 1;
        seen.push_back(w);
        stack.push_back(w);
      }
    }
    return true;
  }

  void clear(const std::vector<std::size_t>& nodes) {
    for (std::size_t n : nodes) mark_[n] = 0;
  }

  void reorder(std::vector<std::size_t>& fwd, std::vector<std::size_t>& bwd) {
    auto by_pos = [&](std::size_t a, std::size_t b) { return pos_[a] < pos_[b]; };
    std::sort(fwd.begin(), fwd.end(), by_pos);
    std::sort(bwd.begin(), bwd.end(), by_pos);
    std::vector<std::size_t> nodes(bwd);
    nodes.insert(nodes.end(), fwd.begin(), fwd.end());
    std::vector<std::size_t> slots;
    for (std::size_t n : nodes) slots.push_back(pos_[n]);
    std::sort(slots.begin(), slots.end());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      pos_[nodes[i]] = slots[i];
      mark_[nodes[i]] = 0;
    }
  }

  std::vector<std::size_t> pos_;
  std::vector<std::vector<std::size_t>> out_, in_;
  std::vector<std::uint8_t> mark_;
};

}  // namespace detail

/// Makes the edge set acyclic and fills in ord. Edges are admitted from the
/// strongest score down (ties by position); an edge that would close a cycle
/// with already admitted edges is dropped, so every cycle loses its weakest
/// edge. Edges naming unknown nodes are dropped as well.
inline void finalize_graph(RelationGraph& g) {
  std::map<int, std::size_t> index;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) index.emplace(g.nodes[i].id, i);
  std::vector<std::size_t> order(g.edges.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return g.edges[a].score > g.edges[b].score; });
  detail::DynamicTopoOrder topo(g.nodes.size());
  std::vector<bool> keep(g.edges.size(), false);
  for (std::size_t e : order) {
    const auto c = index.find(g.edges[e].child), p = index.find(g.edges[e].parent);
    if (c == index.end() || p == index.end()) continue;
    keep[e] = topo.try_add(c->second, p->second);
  }
  std::vector<RelationEdge> kept;
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    if (keep[e]) kept.push_back(g.edges[e]);
  }
  g.edges = std::move(kept);
  g.ord = compute_ord(g.nodes, g.edges);
}

/// Relation edges from CC predictions only: for an object O and each class c
/// whose CC score clears the threshold, the best-overlapping other object of
/// class c (axis IOU >= relation threshold) is taken to rest on O.
inline RelationGraph build_relation_graph(const std::vector<PairedObject>& objs, const PostConfig& cfg) {
  RelationGraph g;
  g.nodes = objs;
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t j = 0; j < objs.size(); ++j) by_class[objs[j].detection.class_id].push_back(j);
  for (std::size_t i = 0; i < objs.size(); ++i) {
    const Detection& parent = objs[i].detection;
    const int no_class = static_cast<int>(parent.cc_scores.size()) - 1;
    for (int c = 0; c < no_class; ++c) {
      const double score = parent.cc_scores[static_cast<std::size_t>(c)];
      if (score < cfg.cc_score_threshold) continue;
      const auto members = by_class.find(c);
      if (members == by_class.end()) continue;
      std::optional<std::size_t> best;
      double best_iou = -1.0;
      for (std::size_t j : members->second) {
        if (j == i) continue;
        const double iou = axis_iou(objs[j].detection.box, parent.box);
        if (iou >= cfg.relation_iou_threshold && iou > best_iou) {
          best = j;
          best_iou = iou;
        }
      }
      if (best) g.edges.push_back({objs[*best].id, objs[i].id, score});
    }
  }
  finalize_graph(g);
  return g;
}

/// decode -> NMS -> pairing -> relation graph.
inline RelationGraph run_pipeline(const HeadTensor& h, const PostConfig& cfg) {
  cfg.validate();
  const auto dets = nms(decode_od(h, cfg.od_conf), cfg.od_nms_iou, cfg.class_aware_nms);
  const auto grasps = nms(decode_gd(h, cfg.gd_conf), cfg.gd_nms_iou, cfg.class_aware_nms);
  return build_relation_graph(pair(dets, grasps, cfg), cfg);
}

inline RelationGraph run_pipeline(const HeadTensor& h, const HeadLayout& layout, const PostConfig& cfg) {
  detail::require_layout(h, layout);
  return run_pipeline(h, cfg);
}

}  // namespace mtgrasp
