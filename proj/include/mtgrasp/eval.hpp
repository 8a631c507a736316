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
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mtgrasp/error.hpp"
#include "mtgrasp/geometry.hpp"
#include "mtgrasp/postprocess.hpp"
#include "mtgrasp/scene.hpp"

namespace mtgrasp {

struct EvalConfig {
  double angle_threshold = std::numbers::pi / 6;  // 30 degrees
  double grasp_iou_threshold = 0.25;
  double od_iou_threshold = 0.5;
  int top_k = 1;

  void validate() const {
    if (!(angle_threshold > 0 && angle_threshold <= std::numbers::pi / 2) ||
        !(grasp_iou_threshold >= 0 && grasp_iou_threshold <= 1) || !(od_iou_threshold >= 0 && od_iou_threshold <= 1) ||
        top_k < 1) {
      throw Error(ErrorCode::InvalidConfig, "evaluation thresholds out of range");
    }
  }
};

struct EvalReport {
  std::string ap_method = "all-point";
  int n_images = 0;
  int n_success = 0;
  double accuracy = 0.0;
  std::map<int, double> per_class_ap;   // joint box + grasp criterion
  std::map<int, double> per_class_ap_od;  // box criterion only
  double mAP = 0.0;
  double mAPg = 0.0;
  int tp = 0;
  int fp = 0;
  int n_gt = 0;
  int tp_od = 0;
  int fp_od = 0;
  std::vector<std::string> notes;
};

/// Rectangle metric: some ground truth within the angle threshold (mod pi)
/// and with rotated IOU above the IOU threshold.
inline bool grasp_match(const OrientedRect& pred, const std::vector<OrientedRect>& gts, const EvalConfig& cfg) {
  for (const auto& gt : gts) {
    if (angle_distance(pred.theta(), gt.theta()) < cfg.angle_threshold &&
        rotated_iou(pred, gt) > cfg.grasp_iou_threshold) {
      return true;
    }
  }
  return false;
}

struct ScoredGrasp {
  OrientedRect rect;
  double pr = 0.0;
};

/// Share of images whose top-k predictions (by pr) contain a rectangle-metric
/// match. An image without predictions counts as a failure.
inline EvalReport cornell_accuracy(const std::vector<std::vector<ScoredGrasp>>& predictions,
                                   const std::vector<std::vector<OrientedRect>>& ground_truth, const EvalConfig& cfg) {
  cfg.validate();
  if (predictions.size() != ground_truth.size()) {
    throw Error(ErrorCode::DimensionMismatch, "prediction and ground-truth image counts differ");
  }
  EvalReport r;
  r.n_images = static_cast<int>(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    std::vector<ScoredGrasp> preds = predictions[i];
    std::stable_sort(preds.begin(), preds.end(), [](const ScoredGrasp& a, const ScoredGrasp& b) { return a.pr > b.pr; });
    const std::size_t k = std::min(preds.size(), static_cast<std::size_t>(cfg.top_k));
    bool ok = false;
    for (std::size_t j = 0; j < k && !ok; ++j) ok = grasp_match(preds[j].rect, ground_truth[i], cfg);
    if (ok) ++r.n_success;
  }
  r.accuracy = r.n_images ? static_cast<double>(r.n_success) / r.n_images : 0.0;
  return r;
}

struct ScoredMatch {
  double confidence = 0.0;
  bool matched = false;
};

/// All-point interpolated AP: the precision envelope (maximum precision at
/// equal or higher recall) summed over true positives, divided by n_gt.
/// Ranking is by descending confidence, stable for ties.
inline double average_precision(std::vector<ScoredMatch> preds, int n_gt) {
  if (n_gt <= 0) throw Error(ErrorCode::ZeroGT, "average precision is undefined without ground truth");
  std::stable_sort(preds.begin(), preds.end(),
                   [](const ScoredMatch& a, const ScoredMatch& b) { return a.confidence > b.confidence; });
  std::vector<double> precision;
  int tp = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!preds[i].matched) continue;
    ++tp;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
  }
  double sum = 0.0, envelope = 0.0;
  for (auto it = precision.rbegin(); it != precision.rend(); ++it) {
    envelope = std::max(envelope, *it);
    sum += envelope;
  }
  return sum / static_cast<double>(n_gt);
}

/// Box AP (mAP) and box+grasp AP (mAPg) over a set of images.
///
/// Each prediction is compared against the same-class ground-truth object of
/// maximum IOU in its image. It is a box true positive if that IOU exceeds the
/// threshold and the object is not yet claimed. For mAPg its best grasp must
/// additionally pass the rectangle metric against that object's grasps; an
/// object is claimed only by a true positive. Classes without ground truth
/// are left out of the means.
inline EvalReport mapg(const std::vector<std::vector<PairedObject>>& predictions,
                       const std::vector<SceneAnnotation>& scenes, const EvalConfig& cfg) {
  cfg.validate();
  if (predictions.size() != scenes.size()) {
    throw Error(ErrorCode::DimensionMismatch, "prediction and scene counts differ");
  }
  struct Flat {
    std::size_t image;
    std::size_t index;
    double pr;
  };
  std::map<int, int> gt_count;
  std::map<int, std::vector<Flat>> by_class;
  for (const auto& s : scenes) {
    for (const auto& o : s.objects) ++gt_count[o.class_id];
  }
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    for (std::size_t j = 0; j < predictions[i].size(); ++j) {
      by_class[predictions[i][j].detection.class_id].push_back({i, j, predictions[i][j].detection.pr});
    }
  }

  EvalReport r;
  r.n_images = static_cast<int>(scenes.size());
  for (const auto& [cls, flats] : by_class) {
    if (!gt_count.count(cls)) {
      r.notes.push_back("class " + std::to_string(cls) + " has predictions but no ground truth; excluded");
      r.fp += static_cast<int>(flats.size());
      r.fp_od += static_cast<int>(flats.size());
    }
  }
  double sum_ap = 0.0, sum_apg = 0.0;
  for (const auto& [cls, n] : gt_count) {
    std::vector<Flat> flats = by_class[cls];
    std::stable_sort(flats.begin(), flats.end(), [](const Flat& a, const Flat& b) { return a.pr > b.pr; });
    std::set<std::pair<std::size_t, int>> claimed_od, claimed_g;
    std::vector<ScoredMatch> od, joint;
    for (const Flat& f : flats) {
      const PairedObject& p = predictions[f.image][f.index];
      const SceneObject* best = nullptr;
      double best_iou = -1.0;
      for (const auto& o : scenes[f.image].objects) {
        if (o.class_id != cls) continue;
        const double iou = axis_iou(o.box, p.detection.box);
        if (iou > best_iou) {
          best = &o;
          best_iou = iou;
        }
      }
      const bool box_ok = best && best_iou > cfg.od_iou_threshold;
      bool od_tp = false, g_tp = false;
      if (box_ok) {
        const auto key = std::pair(f.image, best->id);
        if (!claimed_od.count(key)) {
          od_tp = true;
          claimed_od.insert(key);
        }
        if (!claimed_g.count(key) && p.best_grasp && grasp_match(p.best_grasp->rect, best->grasps, cfg)) {
          g_tp = true;
          claimed_g.insert(key);
        }
      }
      od.push_back({f.pr, od_tp});
      joint.push_back({f.pr, g_tp});
      r.tp_od += od_tp;
      r.fp_od += !od_tp;
      r.tp += g_tp;
      r.fp += !g_tp;
    }
    r.n_gt += n;
    r.per_class_ap_od[cls] = average_precision(od, n);
    r.per_class_ap[cls] = average_precision(joint, n);
    sum_ap += r.per_class_ap_od[cls];
    sum_apg += r.per_class_ap[cls];
  }
  if (!gt_count.empty()) {
    r.mAP = sum_ap / static_cast<double>(gt_count.size());
    r.mAPg = sum_apg / static_cast<double>(gt_count.size());
  }
  r.n_success = r.tp;
  r.accuracy = r.n_gt ? static_cast<double>(r.tp) / r.n_gt : 0.0;
  return r;
}

enum class SplitMode { ImageWise, ObjectWise };

/// k-fold split. Image-wise: seeded shuffle cut into near-equal folds.
/// Object-wise: groups are shuffled and each goes whole to the currently
/// smallest fold, so no group straddles two folds. Folds hold positions
/// into `ids`.
inline std::vector<std::vector<std::size_t>> cv_splits(std::size_t n_ids, SplitMode mode, int k, std::uint64_t seed,
                                                       const std::vector<std::string>& group_keys = {}) {
  if (k < 1) throw Error(ErrorCode::InvalidConfig, "fold count must be positive");
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
  if (mode == SplitMode::ImageWise) {
    std::vector<std::size_t> order(n_ids);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < order.size(); ++i) {
      const std::size_t f = i * static_cast<std::size_t>(k) / std::max<std::size_t>(order.size(), 1);
      folds[f].push_back(order[i]);
    }
  } else {
    if (group_keys.size() != n_ids) {
      throw Error(ErrorCode::DimensionMismatch, "object-wise split needs one group key per id");
    }
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n_ids; ++i) groups[group_keys[i]].push_back(i);
    if (groups.size() < static_cast<std::size_t>(k)) {
      throw Error(ErrorCode::TooFewGroups, std::to_string(groups.size()) + " groups cannot fill " +
                                               std::to_string(k) + " folds");
    }
    std::vector<const std::vector<std::size_t>*> order;
    for (const auto& [key, members] : groups) order.push_back(&members);
    std::shuffle(order.begin(), order.end(), rng);
    for (const auto* members : order) {
      auto smallest = std::min_element(folds.begin(), folds.end(),
                                       [](const auto& a, const auto& b) { return a.size() < b.size(); });
      smallest->insert(smallest->end(), members->begin(), members->end());
    }
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

}  // namespace mtgrasp
