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

#include <gtest/gtest.h>

#include "mtgrasp/planner.hpp"
#include "mtgrasp/testing/oracles.hpp"

using namespace mtgrasp;
namespace oracle = mtgrasp::testing;

namespace {

PairedObject node(int id, int cls, double pr, AxisRect box = AxisRect(0, 0, 10, 10)) {
  PairedObject p;
  p.id = id;
  p.detection.class_id = cls;
  p.detection.pr = pr;
  p.detection.box = box;
  return p;
}

RelationGraph graph(std::vector<PairedObject> nodes, std::vector<RelationEdge> edges) {
  RelationGraph g;
  g.nodes = std::move(nodes);
  g.edges = std::move(edges);
  finalize_graph(g);
  return g;
}

// A on B on C, ids 0, 1, 2 and classes 10, 11, 12.
RelationGraph chain() {
  return graph({node(0, 10, 0.9), node(1, 11, 0.8), node(2, 12, 0.7)}, {{0, 1, 1.0}, {1, 2, 1.0}});
}

SceneState stack_scene(bool hide) {
  // Object 2 at the bottom, 1 on it, 0 on top. With `hide`, each upper box
  // covers the one below completely.
  const double grow = hide ? 20 : -20, shift = hide ? 0 : 20;
  std::vector<SceneEntity> objs{
      {2, 12, AxisRect::from_center(100, 100, 80, 80), {}, true},
      {1, 11, AxisRect::from_center(100 + shift, 100, 80 + grow, 80 + grow), {2}, true},
      {0, 10, AxisRect::from_center(100 + 2 * shift, 100, 80 + 2 * grow, 80 + 2 * grow), {1}, true}};
  return SceneState(objs);
}

}  // namespace

TEST(GraspOrder, Chain) { EXPECT_EQ(grasp_order(chain()), (std::vector<int>{0, 1, 2})); }

TEST(GraspOrder, IndependentByConfidence) {
  EXPECT_EQ(grasp_order(graph({node(4, 1, 0.3), node(7, 2, 0.8)}, {})), (std::vector<int>{7, 4}));
}

TEST(GraspOrder, Empty) { EXPECT_TRUE(grasp_order(RelationGraph{}).empty()); }

TEST(GraspOrder, CycleRejected) {
  RelationGraph g;
  g.nodes = {node(0, 1, 0.5), node(1, 2, 0.5)};
  g.edges = {{0, 1, 1.0}, {1, 0, 1.0}};
  g.ord = {0, 0};
  try {
    grasp_order(g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CyclicGraph);
  }
}

TEST(PlanTarget, BottomOfChain) {
  const GraspPlan p = plan_target(chain(), 12);
  EXPECT_EQ(p.status, PlanStatus::TargetGrasped);
  EXPECT_EQ(p.ids, (std::vector<int>{0, 1, 2}));
}

TEST(PlanTarget, FreeTarget) {
  const GraspPlan p = plan_target(chain(), 10);
  EXPECT_EQ(p.ids, (std::vector<int>{0}));
}

TEST(PlanTarget, AbsentClass) { EXPECT_EQ(plan_target(chain(), 99).status, PlanStatus::TargetNotFound); }

TEST(PlanTarget, NeverGraspsLoadedObject) {
  for (int n = 1; n <= 4; ++n) {
    for (const auto& forest : oracle::stack_forests(n)) {
      std::vector<PairedObject> nodes;
      std::vector<RelationEdge> edges;
      for (int i = 0; i < n; ++i) {
        nodes.push_back(node(i, i, 0.5 + 0.1 * i));
        if (forest[static_cast<std::size_t>(i)] >= 0) edges.push_back({i, forest[static_cast<std::size_t>(i)], 1.0});
      }
      const RelationGraph g = graph(nodes, edges);
      for (int t = 0; t < n; ++t) {
        std::set<int> removed;
        for (int id : plan_target(g, t).ids) {
          for (int child : g.on_top_of(id)) EXPECT_TRUE(removed.count(child));
          removed.insert(id);
        }
      }
    }
  }
}

TEST(SceneState, VisibilityAndCoverage) {
  const SceneState open = stack_scene(false), hidden = stack_scene(true);
  EXPECT_TRUE(open.visible(2));
  EXPECT_FALSE(hidden.visible(2));
  EXPECT_FALSE(hidden.visible(1));
  EXPECT_TRUE(hidden.visible(0));
  EXPECT_DOUBLE_EQ(hidden.coverage(2), 1.0);
  EXPECT_EQ(hidden.above(2), (std::set<int>{0, 1}));
}

TEST(SceneState, UnionArea) {
  EXPECT_DOUBLE_EQ(SceneState::union_area({AxisRect(0, 0, 2, 2), AxisRect(1, 1, 3, 3)}), 7.0);
  EXPECT_DOUBLE_EQ(SceneState::union_area({}), 0.0);
}

TEST(SceneState, RejectsBadScenes) {
  EXPECT_THROW(SceneState({{0, 0, AxisRect(0, 0, 1, 1), {5}, true}}), Error);
  EXPECT_THROW(SceneState({{0, 0, AxisRect(0, 0, 1, 1), {1}, true}, {1, 1, AxisRect(0, 0, 1, 1), {0}, true}}), Error);
}

TEST(Simulate, ClutterWithoutStacking) {
  SceneState s({{0, 3, AxisRect(0, 0, 50, 50), {}, true}, {1, 4, AxisRect(100, 0, 150, 50), {}, true}});
  const EpisodeRecord r = simulate(s, 4, oracle_detector(1), 2);
  EXPECT_TRUE(r.success);
  EXPECT_EQ(r.steps, 1);
}

TEST(Simulate, VisibleBottomTarget) {
  const EpisodeRecord r = simulate(stack_scene(false), 12, oracle_detector(2), 3);
  EXPECT_TRUE(r.success);
  EXPECT_EQ(r.steps, 3);
  EXPECT_EQ(r.removed, (std::vector<int>{0, 1, 2}));
}

TEST(Simulate, HiddenTargetFoundAfterRemovals) {
  const EpisodeRecord r = simulate(stack_scene(true), 12, oracle_detector(3), 3);
  ASSERT_TRUE(r.success);
  EXPECT_EQ(r.steps, 3);
  EXPECT_FALSE(r.log[0].target_visible);
  EXPECT_FALSE(r.log[1].target_visible);
  EXPECT_TRUE(r.log[2].target_visible);
  EXPECT_EQ(r.removed, (std::vector<int>{0, 1, 2}));
}

TEST(Simulate, BudgetExhausted) {
  const EpisodeRecord r = simulate(stack_scene(true), 12, oracle_detector(3), 2);
  EXPECT_FALSE(r.success);
  EXPECT_EQ(r.status, PlanStatus::Exhausted);
}

TEST(Simulate, Deterministic) {
  const auto a = simulate(stack_scene(true), 12, oracle_detector(9), 3);
  const auto b = simulate(stack_scene(true), 12, oracle_detector(9), 3);
  EXPECT_EQ(a.removed, b.removed);
  EXPECT_EQ(a.steps, b.steps);
}

TEST(Simulate, ExhaustiveSmallForests) {
  for (int n = 1; n <= 4; ++n) {
    for (const auto& forest : oracle::stack_forests(n)) {
      for (auto geo : {oracle::StackGeometry::Offset, oracle::StackGeometry::Covering}) {
        const SceneState s = oracle::forest_scene(forest, geo);
        for (int t = 0; t < n; ++t) {
          const auto r = simulate(s, t, oracle_detector(static_cast<std::uint64_t>(t)), n);
          ASSERT_TRUE(r.success) << "n=" << n << " target=" << t;
          EXPECT_LE(r.steps, n);
        }
      }
    }
  }
}

TEST(StackForests, Counts) {
  // Rooted labelled forests on n nodes: (n + 1)^(n - 1).
  EXPECT_EQ(oracle::stack_forests(1).size(), 1u);
  EXPECT_EQ(oracle::stack_forests(3).size(), 16u);
  EXPECT_EQ(oracle::stack_forests(5).size(), 1296u);
}
