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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "mtgrasp/geometry.hpp"
#include "mtgrasp/testing/oracles.hpp"

using namespace mtgrasp;
namespace oracle = mtgrasp::testing;
using std::numbers::pi;

namespace {

bool same_vertex_set(const std::array<Point2, 4>& got, std::vector<Point2> want, double tol = 1e-9) {
  for (const Point2& g : got) {
    auto it = std::find_if(want.begin(), want.end(),
                           [&](const Point2& w) { return std::abs(w.x - g.x) < tol && std::abs(w.y - g.y) < tol; });
    if (it == want.end()) return false;
    want.erase(it);
  }
  return want.empty();
}

OrientedRect random_rect(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-100, 100), size(0.5, 50), ang(-4, 4);
  return OrientedRect(pos(rng), pos(rng), size(rng), size(rng), ang(rng));
}

}  // namespace

TEST(Angles, NormalizeIntoHalfOpenPi) {
  EXPECT_DOUBLE_EQ(normalize_angle(0.0), 0.0);
  EXPECT_NEAR(normalize_angle(pi), 0.0, 1e-15);
  EXPECT_NEAR(normalize_angle(-pi / 4), 3 * pi / 4, 1e-15);
  EXPECT_NEAR(normalize_angle(7 * pi / 8 + 3 * pi), 7 * pi / 8, 1e-12);
  for (double t = -20; t < 20; t += 0.37) {
    const double n = normalize_angle(t);
    EXPECT_GE(n, 0.0);
    EXPECT_LT(n, pi);
  }
}

TEST(Angles, WrappedDifference) {
  EXPECT_NEAR(wrapped_angle_diff(0.1, pi - 0.1), 0.2, 1e-12);
  EXPECT_NEAR(angle_distance(0.0, pi / 2), pi / 2, 1e-15);
  EXPECT_NEAR(angle_distance(0.2, 0.2 + pi), 0.0, 1e-12);
}

TEST(OrientedRect, RejectsInvalid) {
  EXPECT_THROW(OrientedRect(0, 0, 0, 1, 0), Error);
  EXPECT_THROW(OrientedRect(0, 0, 1, -1, 0), Error);
  EXPECT_THROW(OrientedRect(NAN, 0, 1, 1, 0), Error);
}

TEST(Vertices, AxisAligned) {
  EXPECT_TRUE(same_vertex_set(vertices(OrientedRect(0, 0, 4, 2, 0)), {{2, 1}, {-2, 1}, {-2, -1}, {2, -1}}));
}

TEST(Vertices, QuarterTurn) {
  EXPECT_TRUE(same_vertex_set(vertices(OrientedRect(0, 0, 4, 2, pi / 2)), {{1, 2}, {-1, 2}, {-1, -2}, {1, -2}}));
}

TEST(Vertices, DiagonalSquare) {
  const double r = std::sqrt(2.0);
  EXPECT_TRUE(same_vertex_set(vertices(OrientedRect(1, 1, 2, 2, pi / 4)),
                              {{1, 1 + r}, {1 - r, 1}, {1, 1 - r}, {1 + r, 1}}));
}

TEST(Vertices, CounterClockwise) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto v = vertices(random_rect(rng));
    EXPECT_GT(polygon_area(v), 0.0);
  }
}

TEST(RectFromVertices, EdgeConvention) {
  const OrientedRect r = rect_from_vertices({2, 1}, {-2, 1}, {-2, -1}, {2, -1});
  EXPECT_NEAR(r.x(), 0, 1e-12);
  EXPECT_NEAR(r.y(), 0, 1e-12);
  EXPECT_NEAR(r.h(), 4, 1e-12);
  EXPECT_NEAR(r.w(), 2, 1e-12);
  EXPECT_NEAR(r.theta(), pi / 2, 1e-12);
}

TEST(RectFromVertices, NaNIsNonFinite) {
  try {
    rect_from_vertices({NAN, 1}, {-2, 1}, {-2, -1}, {2, -1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFinite);
  }
}

TEST(RectFromVertices, SkewedQuadRejected) {
  try {
    rect_from_vertices({0, 0}, {10, 0}, {10, 3}, {0, 8});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotARectangle);
  }
}

TEST(RectFromVertices, RoundTripProperty) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const OrientedRect r = random_rect(rng);
    const auto v = vertices(r);
    const OrientedRect back = rect_from_vertices(v[0], v[1], v[2], v[3]);
    EXPECT_NEAR(back.x(), r.x(), 1e-6);
    EXPECT_NEAR(back.y(), r.y(), 1e-6);
    EXPECT_NEAR(back.w(), r.w(), 1e-6);
    EXPECT_NEAR(back.h(), r.h(), 1e-6);
    EXPECT_NEAR(angle_distance(back.theta(), r.theta()), 0.0, 1e-6);
  }
}

TEST(AxisIou, Fixtures) {
  const AxisRect a(0, 0, 2, 2);
  EXPECT_DOUBLE_EQ(axis_iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(axis_iou(a, AxisRect(3, 3, 4, 4)), 0.0);
  EXPECT_NEAR(axis_iou(a, AxisRect(1, 1, 3, 3)), 1.0 / 7.0, 1e-15);
}

TEST(RotatedIou, Fixtures) {
  const OrientedRect a(0, 0, 4, 2, 0), b(0, 0, 4, 2, pi / 2);
  EXPECT_DOUBLE_EQ(rotated_iou(a, a), 1.0);
  EXPECT_NEAR(rotated_iou(a, b), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(oracle::monte_carlo_iou(a, b, 1'000'000, 1), 1.0 / 3.0, 0.01);
  EXPECT_DOUBLE_EQ(rotated_iou(a, OrientedRect(10, 0, 4, 2, 0.3)), 0.0);
}

TEST(RotatedIou, SymmetricBoundedAndReflexive) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 2000; ++i) {
    const auto [a, b] = oracle::random_rect_pair(rng);
    const double ab = rotated_iou(a, b);
    EXPECT_EQ(ab, rotated_iou(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_DOUBLE_EQ(rotated_iou(a, a), 1.0);
  }
}

TEST(RotatedIou, MatchesAxisIouWhenUnrotated) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> pos(0, 20), size(1, 15);
  for (int i = 0; i < 1000; ++i) {
    const OrientedRect a(pos(rng), pos(rng), size(rng), size(rng), 0.0);
    const OrientedRect b(pos(rng), pos(rng), size(rng), size(rng), 0.0);
    EXPECT_NEAR(rotated_iou(a, b), axis_iou(aabb(a), aabb(b)), 1e-9);
  }
}

TEST(RotatedIou, AgreesWithMonteCarlo) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 20; ++i) {
    const auto [a, b] = oracle::random_rect_pair(rng);
    EXPECT_NEAR(rotated_iou(a, b), oracle::monte_carlo_iou(a, b, 200'000, i), 0.01);
  }
}

TEST(Aabb, Fixtures) {
  const AxisRect a = aabb(OrientedRect(0, 0, 4, 2, 0));
  EXPECT_DOUBLE_EQ(a.x1(), -2);
  EXPECT_DOUBLE_EQ(a.y1(), -1);
  EXPECT_DOUBLE_EQ(a.x2(), 2);
  EXPECT_DOUBLE_EQ(a.y2(), 1);
  const double r = std::sqrt(2.0);
  const AxisRect d = aabb(OrientedRect(0, 0, 2, 2, pi / 4));
  EXPECT_NEAR(d.x1(), -r, 1e-12);
  EXPECT_NEAR(d.y1(), -r, 1e-12);
  EXPECT_NEAR(d.x2(), r, 1e-12);
  EXPECT_NEAR(d.y2(), r, 1e-12);
}

TEST(Aabb, ContainsVertices) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 500; ++i) {
    const OrientedRect r = random_rect(rng);
    const AxisRect b = aabb(r);
    for (const Point2& p : vertices(r)) {
      EXPECT_GE(p.x, b.x1() - 1e-12);
      EXPECT_LE(p.x, b.x2() + 1e-12);
      EXPECT_GE(p.y, b.y1() - 1e-12);
      EXPECT_LE(p.y, b.y2() + 1e-12);
    }
  }
}
