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
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "mtgrasp/anchor_codec.hpp"
#include "mtgrasp/error.hpp"

namespace mtgrasp {

struct LossConfig {
  double lambda_n = 100.0;
  double gamma = 2.0;
  double w_coord = 1.0;
  double w_obj_pos = 1.0;
  double w_obj_neg = 1.0;
  double w_class = 1.0;
  double w_reason = 1.0;
  double w_angle = 1.0;

  void validate() const {
    if (!(lambda_n >= 0.0) || !(gamma >= 0.0)) {
      throw Error(ErrorCode::InvalidConfig, "lambda_n and gamma must be non-negative");
    }
  }
};

/// Smallest probability fed to a log.
inline constexpr double kProbFloor = 1e-12;

/// -(1 - p)^gamma * ln p with p clamped to [1e-12, 1].
inline double focal_loss(double p_t, double gamma) {
  const double p = std::clamp(p_t, kProbFloor, 1.0);
  return -std::pow(1.0 - p, gamma) * std::log(p);
}

/// Focal-modulated binary cross-entropy summed over slots. Target slots add
/// -(1 - s)^gamma ln s, the others -s^gamma ln(1 - s).
inline double binary_focal_loss(std::span<const double> scores, std::span<const std::uint8_t> targets,
                                double gamma = 2.0) {
  if (scores.size() != targets.size()) {
    throw Error(ErrorCode::DimensionMismatch, "scores and targets differ in length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double s = std::clamp(scores[i], kProbFloor, 1.0 - kProbFloor);
    total += targets[i] ? -std::pow(1.0 - s, gamma) * std::log(s) : -std::pow(s, gamma) * std::log(1.0 - s);
  }
  return total;
}

/// Neumaier-compensated running sum; keeps totals over tens of thousands of
/// slots accurate to a few ulps.
template <class Real>
class CompensatedSum {
 public:
  void add(Real v) {
    const Real t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  Real value() const { return sum_ + comp_; }

 private:
  Real sum_ = 0;
  Real comp_ = 0;
};

template <class Real>
struct BasicLossBreakdown {
  Real coord_mse = 0;
  Real objectness_pos = 0;
  Real objectness_neg = 0;  // already multiplied by lambda_n
  Real class_focal = 0;
  Real reasoning_bifocal = 0;
  Real angle_mse = 0;
  Real total = 0;
  BasicHeadTensor<Real> grad;
};

using LossBreakdown = BasicLossBreakdown<double>;

namespace loss_detail {

template <class Real>
Real log_cap() {
  return -std::log(static_cast<Real>(kProbFloor));
}

/// -ln sigma(t) with the probability floored; returns value and d/dt.
template <class Real>
std::pair<Real, Real> neg_log_sigmoid(Real t) {
  const Real v = softplus(-t);
  if (v >= log_cap<Real>()) return {log_cap<Real>(), Real(0)};
  return {v, -sigmoid(-t)};
}

/// Focal term on a softmax over `z` with target k. Returns the loss and
/// writes dL/dz into `g` (scaled by `scale`).
template <class Real>
Real softmax_focal(std::span<const Real> z, int k, Real gamma, Real scale, std::span<Real> g) {
  const Real m = *std::max_element(z.begin(), z.end());
  Real sum = 0;
  for (Real v : z) sum += std::exp(v - m);
  const Real lse = m + std::log(sum);
  const Real neg_logp = lse - z[static_cast<std::size_t>(k)];
  if (neg_logp >= log_cap<Real>()) {
    return log_cap<Real>() * std::pow(Real(1) - static_cast<Real>(kProbFloor), gamma);
  }
  Real q = 0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (static_cast<int>(j) != k) q += std::exp(z[j] - lse);
  }
  const Real p = std::exp(-neg_logp);
  const Real qg = std::pow(q, gamma);
  const Real loss = qg * neg_logp;
  // G = p * dL/dp, with q = 1 - p summed from the non-target terms.
  Real G = -qg;
  if (gamma != 0 && q > 0) G += -gamma * std::pow(q, gamma - 1) * p * neg_logp;
  for (std::size_t j = 0; j < z.size(); ++j) {
    const Real pj = static_cast<int>(j) == k ? p : std::exp(z[j] - lse);
    const Real delta = static_cast<int>(j) == k ? Real(1) : Real(0);
    g[j] += scale * G * (delta - pj);
  }
  return loss;
}

/// Binary focal term for one logit; adds scale * dL/dt into g.
template <class Real>
Real binary_focal_logit(Real t, bool target, Real gamma, Real scale, Real& g) {
  const Real cap = log_cap<Real>();
  if (target) {
    const Real q = sigmoid(-t);
    const Real sp = softplus(-t);
    const Real qg = std::pow(q, gamma);
    const Real lg = std::min(sp, cap);
    Real d = -gamma * qg * (1 - q) * lg;
    if (sp < cap) d -= qg * q;
    g += scale * d;
    return qg * lg;
  }
  const Real s = sigmoid(t);
  const Real sp = softplus(t);
  const Real sg = std::pow(s, gamma);
  const Real lg = std::min(sp, cap);
  Real d = gamma * sg * (1 - s) * lg;
  if (sp < cap) d += sg * s;
  g += scale * d;
  return sg * lg;
}

template <class Real>
Real wrap_half_pi(Real d) {
  const Real pi = std::numbers::pi_v<Real>;
  d = std::fmod(d, pi);
  if (d <= -pi / 2) d += pi;
  if (d > pi / 2) d -= pi;
  return d;
}

}  // namespace loss_detail

/// Multi-task loss over a head tensor and its target assignment.
///
/// Positives contribute squared errors on the decoded center (grid units)
/// and size (image-normalized units), -ln pr, a softmax focal class term,
/// binary focal FC/CC terms (OD only) and a squared wrapped angle residual
/// (GD only). Negatives contribute lambda_n * -ln(1 - pr). Probabilities are
/// floored at 1e-12 inside logs. The gradient w.r.t. every raw value is
/// returned alongside.
template <class Real>
BasicLossBreakdown<Real> multitask_loss(const BasicHeadTensor<Real>& h, const TargetAssignment& a,
                                        const LossConfig& cfg, bool with_grad = true) {
  cfg.validate();
  const HeadLayout& L = h.layout();
  if (!(L == a.layout())) throw Error(ErrorCode::ShapeMismatch, "tensor and assignment layouts differ");
  const int C = L.num_classes();
  const Real gamma = static_cast<Real>(cfg.gamma);
  const Real inv_w = Real(1) / static_cast<Real>(L.input_w());
  const Real inv_h = Real(1) / static_cast<Real>(L.input_h());

  BasicLossBreakdown<Real> out;
  out.grad = BasicHeadTensor<Real>(L);
  // Gradient scratch is always written; callers that skip it just ignore it.
  auto& grad = out.grad;

  using namespace loss_detail;
  CompensatedSum<Real> coord, obj_pos, obj_neg, cls, reason, angle;
  const Real wc = static_cast<Real>(cfg.w_coord), wp = static_cast<Real>(cfg.w_obj_pos),
             wn = static_cast<Real>(cfg.w_obj_neg), wk = static_cast<Real>(cfg.w_class),
             wr = static_cast<Real>(cfg.w_reason), wa = static_cast<Real>(cfg.w_angle);
  const Real lambda = static_cast<Real>(cfg.lambda_n);

  auto center_term = [&](Real t, Real frac, Real& g) {
    const Real s = sigmoid(t);
    const Real d = s - frac;
    g += wc * 2 * d * s * (1 - s);
    return d * d;
  };
  auto size_term = [&](Real t, Real prior, Real target, Real inv_extent, Real& g) {
    const Real e = prior * inv_extent * std::exp(t);
    const Real d = e - target * inv_extent;
    g += wc * 2 * d * e;
    return d * d;
  };

  for (const auto& t : a.od()) {
    const auto v = h.od(t.slot);
    auto gv = grad.od(t.slot);
    const AnchorSize prior = L.scale(t.slot.scale).od_anchors[static_cast<std::size_t>(t.slot.anchor)];
    Real c = 0;
    c += center_term(v[od_ch::x], static_cast<Real>(t.fx), gv[od_ch::x]);
    c += center_term(v[od_ch::y], static_cast<Real>(t.fy), gv[od_ch::y]);
    c += size_term(v[od_ch::w], static_cast<Real>(prior.w), static_cast<Real>(t.w), inv_w, gv[od_ch::w]);
    c += size_term(v[od_ch::h], static_cast<Real>(prior.h), static_cast<Real>(t.h), inv_h, gv[od_ch::h]);
    coord.add(c);

    const auto [lp, dp] = neg_log_sigmoid(v[od_ch::pr]);
    obj_pos.add(lp);
    gv[od_ch::pr] += wp * dp;

    cls.add(softmax_focal<Real>(v.subspan(od_ch::cls, static_cast<std::size_t>(C)), t.class_id, gamma, wk,
                                gv.subspan(od_ch::cls, static_cast<std::size_t>(C))));

    Real r = 0;
    for (int k = 0; k <= C; ++k) {
      const auto fi = static_cast<std::size_t>(L.fc_offset() + k);
      const auto ci = static_cast<std::size_t>(L.cc_offset() + k);
      r += binary_focal_logit(v[fi], t.fc[static_cast<std::size_t>(k)] != 0, gamma, wr, gv[fi]);
      r += binary_focal_logit(v[ci], t.cc[static_cast<std::size_t>(k)] != 0, gamma, wr, gv[ci]);
    }
    reason.add(r);
  }

  for (const auto& t : a.gd()) {
    const auto v = h.gd(t.slot);
    auto gv = grad.gd(t.slot);
    const auto& sp = L.scale(t.slot.scale);
    const AnchorSize prior = sp.gd_anchors[static_cast<std::size_t>(t.slot.anchor)];
    Real c = 0;
    c += center_term(v[gd_ch::x], static_cast<Real>(t.fx), gv[gd_ch::x]);
    c += center_term(v[gd_ch::y], static_cast<Real>(t.fy), gv[gd_ch::y]);
    c += size_term(v[gd_ch::w], static_cast<Real>(prior.w), static_cast<Real>(t.w), inv_w, gv[gd_ch::w]);
    c += size_term(v[gd_ch::h], static_cast<Real>(prior.h), static_cast<Real>(t.h), inv_h, gv[gd_ch::h]);
    coord.add(c);

    const auto [lp, dp] = neg_log_sigmoid(v[gd_ch::pr]);
    obj_pos.add(lp);
    gv[gd_ch::pr] += wp * dp;

    cls.add(softmax_focal<Real>(v.subspan(gd_ch::cls, static_cast<std::size_t>(C)), t.class_id, gamma, wk,
                                gv.subspan(gd_ch::cls, static_cast<std::size_t>(C))));

    const Real prior_theta = static_cast<Real>(sp.gd_angles[static_cast<std::size_t>(t.slot.angle)]);
    const Real d = wrap_half_pi(prior_theta + v[gd_ch::theta] - static_cast<Real>(t.theta));
    angle.add(d * d);
    gv[gd_ch::theta] += wa * 2 * d;
  }

  // -ln(1 - sigma(t)) = -ln sigma(-t)
  auto negative = [&](Real t, Real& g) {
    const auto [l, d] = neg_log_sigmoid(-t);
    obj_neg.add(l);
    g += wn * lambda * (-d);
  };
  a.for_each_negative_od([&](const OdSlot& k) { negative(h.od(k)[od_ch::pr], grad.od(k)[od_ch::pr]); });
  a.for_each_negative_gd([&](const GdSlot& k) { negative(h.gd(k)[gd_ch::pr], grad.gd(k)[gd_ch::pr]); });

  out.coord_mse = coord.value();
  out.objectness_pos = obj_pos.value();
  out.objectness_neg = lambda * obj_neg.value();
  out.class_focal = cls.value();
  out.reasoning_bifocal = reason.value();
  out.angle_mse = angle.value();
  CompensatedSum<Real> total;
  total.add(wc * out.coord_mse);
  total.add(wp * out.objectness_pos);
  total.add(wn * out.objectness_neg);
  total.add(wk * out.class_focal);
  total.add(wr * out.reasoning_bifocal);
  total.add(wa * out.angle_mse);
  out.total = total.value();
  if (!with_grad) out.grad = BasicHeadTensor<Real>();
  return out;
}

}  // namespace mtgrasp
