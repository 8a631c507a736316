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

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "mtgrasp/anchor_codec.hpp"
#include "mtgrasp/error.hpp"
#include "mtgrasp/eval.hpp"
#include "mtgrasp/loss.hpp"
#include "mtgrasp/postprocess.hpp"
#include "mtgrasp/scene.hpp"

namespace mtgrasp {

struct TrainConfig {
  int steps = 500;
  double learning_rate = 0.1;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  double init_scale = 0.01;

  void validate() const {
    if (steps < 1 || !(learning_rate >= 0) || !(momentum >= 0 && momentum < 1) || !(init_scale >= 0)) {
      throw Error(ErrorCode::InvalidConfig, "need steps >= 1, lr >= 0, 0 <= momentum < 1");
    }
  }
};

struct TrainTrace {
  std::vector<double> totals;  // loss before each update
  HeadTensor initial;
  HeadTensor final_tensor;
  double wall_seconds = 0.0;
};

/// Gaussian N(0, scale^2) head values from a fixed seed.
inline HeadTensor random_head(const HeadLayout& layout, std::uint64_t seed, double scale) {
  HeadTensor h(layout);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  for (double& v : h.values()) v = scale * n(rng);
  return h;
}

/// Classic momentum SGD directly on the head values:
///   v <- mu v - lr grad,  t <- t + v.
inline TrainTrace train_direct(const TargetAssignment& a, const TrainConfig& cfg, const LossConfig& loss_cfg = {}) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  TrainTrace trace;
  trace.initial = random_head(a.layout(), cfg.seed, cfg.init_scale);
  HeadTensor h = trace.initial;
  std::vector<double> velocity(h.size(), 0.0);
  trace.totals.reserve(static_cast<std::size_t>(cfg.steps));
  for (int step = 0; step < cfg.steps; ++step) {
    const LossBreakdown lb = multitask_loss(h, a, loss_cfg);
    if (!std::isfinite(lb.total)) {
      throw Error(ErrorCode::DivergenceDetected, "loss became non-finite at step " + std::to_string(step));
    }
    trace.totals.push_back(lb.total);
    auto vals = h.values();
    const auto grad = lb.grad.values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      velocity[i] = cfg.momentum * velocity[i] - cfg.learning_rate * grad[i];
      vals[i] += velocity[i];
    }
  }
  trace.final_tensor = std::move(h);
  trace.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return trace;
}

struct ObjectRecovery {
  int object_id = 0;
  double od_iou = 0.0;
  bool grasp_ok = false;
  bool success = false;
};

struct RecoveryReport {
  std::vector<ObjectRecovery> objects;
  int n_success = 0;

  double success_rate() const {
    return objects.empty() ? 1.0 : static_cast<double>(n_success) / static_cast<double>(objects.size());
  }
  bool all_recovered() const { return n_success == static_cast<int>(objects.size()); }
};

/// Runs the post-processing pipeline on `h` and scores each ground-truth
/// object: best same-class detection by IOU, which must exceed the OD
/// threshold, and its paired grasp, which must pass the rectangle metric.
inline RecoveryReport verify_recovery(const HeadTensor& h, const SceneAnnotation& scene, const EvalConfig& eval_cfg,
                                      const PostConfig& post_cfg = {}) {
  const RelationGraph g = run_pipeline(h, post_cfg);
  RecoveryReport r;
  for (const auto& o : scene.objects) {
    ObjectRecovery rec;
    rec.object_id = o.id;
    const PairedObject* best = nullptr;
    for (const auto& n : g.nodes) {
      if (n.detection.class_id != o.class_id) continue;
      const double iou = axis_iou(n.detection.box, o.box);
      if (!best || iou > rec.od_iou) {
        best = &n;
        rec.od_iou = iou;
      }
    }
    if (best && best->best_grasp) rec.grasp_ok = grasp_match(best->best_grasp->rect, o.grasps, eval_cfg);
    rec.success = rec.od_iou > eval_cfg.od_iou_threshold && rec.grasp_ok;
    r.n_success += rec.success;
    r.objects.push_back(rec);
  }
  return r;
}

inline RecoveryReport verify_recovery(const TrainTrace& trace, const SceneAnnotation& scene, const EvalConfig& eval_cfg,
                                      const PostConfig& post_cfg = {}) {
  return verify_recovery(trace.final_tensor, scene, eval_cfg, post_cfg);
}

/// Two-column "step total" series.
inline std::string trace_to_text(const TrainTrace& t) {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < t.totals.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu %.9g\n", i, t.totals[i]);
    out += buf;
  }
  return out;
}

}  // namespace mtgrasp
