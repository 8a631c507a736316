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
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "mtgrasp/error.hpp"

namespace mtgrasp {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
  friend bool operator==(Point2, Point2) = default;
};

inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 p) { return std::hypot(p.x, p.y); }

/// Maps any angle onto the half-open interval [0, pi). A parallel-jaw grasp
/// at theta is the same grasp at theta + pi.
inline double normalize_angle(double theta) {
  constexpr double pi = std::numbers::pi;
  double t = std::fmod(theta, pi);
  if (t < 0.0) t += pi;
  if (t >= pi) t -= pi;
  return t;
}

/// Signed difference a - b taken modulo pi, folded into (-pi/2, pi/2].
inline double wrapped_angle_diff(double a, double b) {
  constexpr double pi = std::numbers::pi;
  double d = std::fmod(a - b, pi);
  if (d <= -pi / 2) d += pi;
  if (d > pi / 2) d -= pi;
  return d;
}

/// Unsigned angular distance under theta = theta + pi symmetry, in [0, pi/2].
inline double angle_distance(double a, double b) { return std::abs(wrapped_angle_diff(a, b)); }

/// Five-parameter grasp rectangle. w is the gripper opening (measured along
/// the theta direction), h the plate extent perpendicular to it.
class OrientedRect {
 public:
  OrientedRect() = default;

  OrientedRect(double x, double y, double w, double h, double theta) {
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(w) || !std::isfinite(h) ||
        !std::isfinite(theta)) {
      throw Error(ErrorCode::NonFinite, "oriented rect has a non-finite field");
    }
    if (!(w > 0.0) || !(h > 0.0)) {
      throw Error(ErrorCode::InvalidRect, "oriented rect needs w > 0 and h > 0");
    }
    x_ = x;
    y_ = y;
    w_ = w;
    h_ = h;
    theta_ = normalize_angle(theta);
  }

  double x() const noexcept { return x_; }
  double y() const noexcept { return y_; }
  double w() const noexcept { return w_; }
  double h() const noexcept { return h_; }
  double theta() const noexcept { return theta_; }
  Point2 center() const noexcept { return {x_, y_}; }
  double area() const noexcept { return w_ * h_; }

  friend bool operator==(const OrientedRect&, const OrientedRect&) = default;

 private:
  double x_ = 0.0;
  double y_ = 0.0;
  double w_ = 1.0;
  double h_ = 1.0;
  double theta_ = 0.0;
};

/// Axis-aligned box in corner form.
class AxisRect {
 public:
  AxisRect() = default;

  AxisRect(double x1, double y1, double x2, double y2) {
    if (!std::isfinite(x1) || !std::isfinite(y1) || !std::isfinite(x2) || !std::isfinite(y2)) {
      throw Error(ErrorCode::NonFinite, "axis rect has a non-finite corner");
    }
    if (!(x1 < x2) || !(y1 < y2)) {
      throw Error(ErrorCode::InvalidRect, "axis rect needs x1 < x2 and y1 < y2");
    }
    x1_ = x1;
    y1_ = y1;
    x2_ = x2;
    y2_ = y2;
  }

  static AxisRect from_center(double cx, double cy, double w, double h) {
    return AxisRect(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2);
  }

  double x1() const noexcept { return x1_; }
  double y1() const noexcept { return y1_; }
  double x2() const noexcept { return x2_; }
  double y2() const noexcept { return y2_; }
  double width() const noexcept { return x2_ - x1_; }
  double height() const noexcept { return y2_ - y1_; }
  double area() const noexcept { return width() * height(); }
  Point2 center() const noexcept { return {(x1_ + x2_) / 2, (y1_ + y2_) / 2}; }

  bool contains(Point2 p, double tol = 0.0) const noexcept {
    return p.x >= x1_ - tol && p.x <= x2_ + tol && p.y >= y1_ - tol && p.y <= y2_ + tol;
  }

  friend bool operator==(const AxisRect&, const AxisRect&) = default;

 private:
  double x1_ = 0.0;
  double y1_ = 0.0;
  double x2_ = 1.0;
  double y2_ = 1.0;
};

/// Corners in counterclockwise order. Edge p1-p2 runs along the plate (length
/// h) and edge p2-p3 along the opening (length w, direction theta).
inline std::array<Point2, 4> vertices(const OrientedRect& r) {
  const Point2 u{std::cos(r.theta()), std::sin(r.theta())};
  const Point2 n{-u.y, u.x};
  const Point2 c = r.center();
  const Point2 hw = (r.w() / 2) * u;
  const Point2 hh = (r.h() / 2) * n;
  return {c - hw + hh, c - hw - hh, c + hw - hh, c + hw + hh};
}

/// Inverse of vertices(): h = |p1 - p2|, w = |p2 - p3|, theta = direction of
/// p2 -> p3. Opposite edges must agree in length to within 5%.
inline OrientedRect rect_from_vertices(Point2 p1, Point2 p2, Point2 p3, Point2 p4) {
  for (Point2 p : {p1, p2, p3, p4}) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw Error(ErrorCode::NonFinite, "rectangle vertex is not finite");
    }
  }
  const double e12 = norm(p2 - p1);
  const double e23 = norm(p3 - p2);
  const double e34 = norm(p4 - p3);
  const double e41 = norm(p1 - p4);
  auto close = [](double a, double b) {
    const double m = std::max(a, b);
    return m > 0.0 && std::abs(a - b) < 0.05 * m;
  };
  if (!close(e12, e34) || !close(e23, e41) || e12 <= 0.0 || e23 <= 0.0) {
    throw Error(ErrorCode::NotARectangle, "opposite edge lengths differ by 5% or more");
  }
  const Point2 c = 0.25 * (p1 + p2 + p3 + p4);
  const Point2 d = p3 - p2;
  return OrientedRect(c.x, c.y, e23, e12, std::atan2(d.y, d.x));
}

/// Tightest axis-aligned box containing every corner.
inline AxisRect aabb(const OrientedRect& r) {
  const auto v = vertices(r);
  double x1 = v[0].x, x2 = v[0].x, y1 = v[0].y, y2 = v[0].y;
  for (const Point2& p : v) {
    x1 = std::min(x1, p.x);
    x2 = std::max(x2, p.x);
    y1 = std::min(y1, p.y);
    y2 = std::max(y2, p.y);
  }
  return AxisRect(x1, y1, x2, y2);
}

inline double intersection_area(const AxisRect& a, const AxisRect& b) {
  const double iw = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double ih = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

inline double axis_iou(const AxisRect& a, const AxisRect& b) {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

/// Shoelace area; positive for counterclockwise polygons.
inline double polygon_area(std::span<const Point2> poly) {
  double acc = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    acc += cross(poly[i], poly[(i + 1) % poly.size()]);
  }
  return acc / 2;
}

/// Intersection of two convex counterclockwise polygons by successive
/// clipping of `subject` against every edge of `clip`.
inline std::vector<Point2> clip_convex(std::span<const Point2> subject,
                                       std::span<const Point2> clip) {
  std::vector<Point2> out(subject.begin(), subject.end());
  for (std::size_t e = 0; e < clip.size() && !out.empty(); ++e) {
    const Point2 a = clip[e];
    const Point2 b = clip[(e + 1) % clip.size()];
    const Point2 edge = b - a;
    std::vector<Point2> in = std::move(out);
    out.clear();
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Point2 cur = in[i];
      const Point2 nxt = in[(i + 1) % in.size()];
      const double sc = cross(edge, cur - a);
      const double sn = cross(edge, nxt - a);
      if (sc >= 0.0) out.push_back(cur);
      if ((sc >= 0.0) != (sn >= 0.0)) {
        const double t = sc / (sc - sn);
        out.push_back(cur + t * (nxt - cur));
      }
    }
  }
  return out;
}

inline double intersection_area(const OrientedRect& a, const OrientedRect& b) {
  const auto va = vertices(a);
  const auto vb = vertices(b);
  const auto poly = clip_convex(va, vb);
  if (poly.size() < 3) return 0.0;
  return std::max(0.0, polygon_area(poly));
}

/// Exact Jaccard overlap of two rotated rectangles.
inline double rotated_iou(const OrientedRect& a, const OrientedRect& b) {
  if (a == b) return 1.0;
  // Clip in a canonical argument order so the result is bitwise symmetric.
  auto key = [](const OrientedRect& r) {
    return std::array<double, 5>{r.x(), r.y(), r.w(), r.h(), r.theta()};
  };
  const bool swap = key(b) < key(a);
  const double inter = swap ? intersection_area(b, a) : intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace mtgrasp
