// Copyright 2026 The irweak Authors.
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

#include "irweak/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "irweak/ltm.hpp"
#include "irweak/nn/ops.hpp"

namespace irweak::losses {
namespace {

using nn::Tensor;
using nn::Var;

constexpr double kProbFloor = 1e-7;

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct FocalValue {
  double loss;
  double dloss_dp;  // derivative with respect to the clamped probability
  bool clamped;
};

FocalValue focal(double prob, int target, double gamma, double alpha) {
  const bool clamped = prob < kProbFloor || prob > 1.0 - kProbFloor;
  const double p = std::clamp(prob, kProbFloor, 1.0 - kProbFloor);
  const double pt = target ? p : 1.0 - p;
  const double at = target ? alpha : 1.0 - alpha;
  const double one_m = 1.0 - pt;
  const double mod = std::pow(one_m, gamma);
  const double loss = -at * mod * std::log(pt);
  const double dmod = gamma > 0.0 ? -gamma * std::pow(one_m, gamma - 1.0) : 0.0;
  const double dpt = -at * (dmod * std::log(pt) + mod / pt);
  return {loss, target ? dpt : -dpt, clamped};
}

struct GiouParts {
  double value;
  std::array<double, 4> grad;  // d giou / d (x_l, y_l, x_r, y_r) of the first box
};

GiouParts giou_with_grad(const double* p, const Box& t) {
  const double x1 = p[0], y1 = p[1], x2 = p[2], y2 = p[3];
  const double a1 = t.x_l(), b1 = t.y_l(), a2 = t.x_r(), b2 = t.y_r();
  const double pw = x2 - x1, ph = y2 - y1;
  const double area_p = pw * ph, area_t = (a2 - a1) * (b2 - b1);
  const double iw_raw = std::min(x2, a2) - std::max(x1, a1);
  const double ih_raw = std::min(y2, b2) - std::max(y1, b1);
  const double iw = std::max(0.0, iw_raw), ih = std::max(0.0, ih_raw);
  const double inter = iw * ih;
  const double uni = area_p + area_t - inter;
  const double cw = std::max(x2, a2) - std::min(x1, a1);
  const double ch = std::max(y2, b2) - std::min(y1, b1);
  const double enclose = cw * ch;
  const double value = inter / uni - (enclose - uni) / enclose;

  // partials of the intersection sides, enclosure sides and predicted area
  const std::array<double, 4> d_iw{iw_raw > 0 && x1 >= a1 ? -1.0 : 0.0, 0.0,
                                   iw_raw > 0 && x2 <= a2 ? 1.0 : 0.0, 0.0};
  const std::array<double, 4> d_ih{0.0, ih_raw > 0 && y1 >= b1 ? -1.0 : 0.0, 0.0,
                                   ih_raw > 0 && y2 <= b2 ? 1.0 : 0.0};
  const std::array<double, 4> d_cw{x1 <= a1 ? -1.0 : 0.0, 0.0, x2 >= a2 ? 1.0 : 0.0, 0.0};
  const std::array<double, 4> d_ch{0.0, y1 <= b1 ? -1.0 : 0.0, 0.0, y2 >= b2 ? 1.0 : 0.0};
  const std::array<double, 4> d_area{-ph, -pw, ph, pw};
  GiouParts out{value, {}};
  for (int i = 0; i < 4; ++i) {
    const double d_inter = d_iw[i] * ih + d_ih[i] * iw;
    const double d_uni = d_area[i] - d_inter;
    const double d_enclose = d_cw[i] * ch + d_ch[i] * cw;
    const double d_iou = (d_inter * uni - inter * d_uni) / (uni * uni);
    out.grad[i] = d_iou + d_uni / enclose - uni * d_enclose / (enclose * enclose);
  }
  return out;
}

}  // namespace

void init_head(nn::ParameterStore& params, int channels, std::mt19937_64& rng,
               bool zero_init, double objectness_prior) {
  ltm::add_conv(params, "head.reg", channels, 4, 1, rng, 0.1);
  ltm::add_conv(params, "head.obj", channels, 1, 1, rng, 0.1);
  ltm::add_conv(params, "head.cls", channels, 1, 1, rng, 0.1);
  if (zero_init) {
    for (const char* name : {"head.reg.weight", "head.obj.weight", "head.cls.weight"}) {
      Var& p = params.get(name);
      p.mutable_value() = Tensor(p.shape(), 0.0);
    }
    return;
  }
  const double bias = std::log(objectness_prior / (1.0 - objectness_prior));
  params.get("head.obj.bias").mutable_value() = nn::round_to_float(Tensor({1}, bias));
}

HeadOutput detection_head(const nn::ParameterStore& params, const Var& features, int stride) {
  const int n = features.dim(0), h = features.dim(2), w = features.dim(3);
  auto branch = [&](const char* name, int k) {
    const Var y = ltm::apply_conv(params, name, features);
    return nn::permute(nn::reshape(y, {n, k, h * w}), {0, 2, 1});
  };
  HeadOutput out;
  out.reg = branch("head.reg", 4);
  out.obj = branch("head.obj", 1);
  out.cls = branch("head.cls", 1);
  out.grid_h = h;
  out.grid_w = w;
  out.stride = stride;
  return out;
}

std::optional<Box> decode_box(const double* reg, int gx, int gy, int stride, int frame_h,
                              int frame_w) {
  const double cx = (gx + sigmoid(reg[0])) * stride;
  const double cy = (gy + sigmoid(reg[1])) * stride;
  // bounded so exp never overflows
  const double w = std::exp(std::clamp(reg[2], -20.0, 20.0)) * stride;
  const double h = std::exp(std::clamp(reg[3], -20.0, 20.0)) * stride;
  return Box::clamped(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h, frame_w, frame_h);
}

std::vector<Detection> decode(const HeadOutput& head, int image, int frame_h, int frame_w) {
  const int locs = head.locations();
  const auto& reg = head.reg.value().data;
  const auto& obj = head.obj.value().data;
  const auto& cls = head.cls.value().data;
  std::vector<Detection> out;
  for (int loc = 0; loc < locs; ++loc) {
    const std::size_t i = static_cast<std::size_t>(image) * locs + loc;
    const auto box = decode_box(reg.data() + 4 * i, loc % head.grid_w, loc / head.grid_w,
                                head.stride, frame_h, frame_w);
    if (!box) continue;
    out.push_back({*box, sigmoid(obj[i]), sigmoid(cls[i])});
  }
  return out;
}

std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold) {
  std::stable_sort(detections.begin(), detections.end(),
                   [](const Detection& a, const Detection& b) { return a.score() > b.score(); });
  std::vector<Detection> kept;
  for (const Detection& d : detections) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return iou(k.box, d.box) > iou_threshold;
    });
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

double focal_loss(double prob, int target, double gamma, double alpha) {
  return focal(prob, target, gamma, alpha).loss;
}

Var sigmoid_focal(const Var& logits, const Tensor& targets, double gamma, double alpha) {
  if (targets.size() != logits.size()) throw std::invalid_argument("sigmoid_focal: target size");
  Tensor out(logits.shape());
  std::vector<double> slope(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double p = sigmoid(logits.value().data[i]);
    const FocalValue f = focal(p, targets.data[i] > 0.5 ? 1 : 0, gamma, alpha);
    out.data[i] = f.loss;
    slope[i] = f.clamped ? 0.0 : f.dloss_dp * p * (1.0 - p);
  }
  return Var::make(std::move(out), {logits}, [slope = std::move(slope)](nn::Node& self) {
    nn::Node& parent = self.parent(0);
    if (!parent.requires_grad) return;
    Tensor& g = parent.ensure_grad();
    for (std::size_t i = 0; i < slope.size(); ++i) g.data[i] += self.grad.data[i] * slope[i];
  });
}

double giou(const Box& a, const Box& b) {
  const double p[4] = {a.x_l(), a.y_l(), a.x_r(), a.y_r()};
  return giou_with_grad(p, b).value;
}

Var giou_loss(const Var& pred, const std::vector<Box>& targets) {
  const Tensor& pv = pred.value();
  if (pv.rank() != 2 || pv.shape[1] != 4 || pv.shape[0] != static_cast<int>(targets.size())) {
    throw std::invalid_argument("giou_loss expects [P,4] and P targets");
  }
  const int count = pv.shape[0];
  Tensor out({count});
  std::vector<double> grads(4 * static_cast<std::size_t>(count));
  for (int r = 0; r < count; ++r) {
    const GiouParts parts = giou_with_grad(pv.data.data() + 4 * r, targets[r]);
    out.data[r] = 1.0 - parts.value;
    for (int k = 0; k < 4; ++k) grads[4 * r + k] = -parts.grad[k];
  }
  return Var::make(std::move(out), {pred}, [grads = std::move(grads)](nn::Node& self) {
    nn::Node& parent = self.parent(0);
    if (!parent.requires_grad) return;
    Tensor& g = parent.ensure_grad();
    for (std::size_t i = 0; i < grads.size(); ++i) g.data[i] += self.grad.data[i / 4] * grads[i];
  });
}

int Assignment::positives() const {
  return static_cast<int>(std::count_if(owner.begin(), owner.end(), [](int o) { return o >= 0; }));
}

Assignment assign_targets(int grid_h, int grid_w, int stride,
                          const std::vector<PseudoLabel>& boxes, double center_radius) {
  Assignment a{std::vector<int>(static_cast<std::size_t>(grid_h) * grid_w, -1)};
  auto better = [&](int challenger, int holder) {
    return holder < 0 || boxes[challenger].score > boxes[holder].score;
  };
  const double reach = center_radius * stride;
  for (int b = 0; b < static_cast<int>(boxes.size()); ++b) {
    const Box& box = boxes[b].box;
    const int home_x = std::clamp(static_cast<int>(std::floor(box.center_x() / stride)), 0, grid_w - 1);
    const int home_y = std::clamp(static_cast<int>(std::floor(box.center_y() / stride)), 0, grid_h - 1);
    for (int gy = 0; gy < grid_h; ++gy) {
      for (int gx = 0; gx < grid_w; ++gx) {
        const double cx = (gx + 0.5) * stride, cy = (gy + 0.5) * stride;
        const bool inside = cx >= box.x_l() && cx < box.x_r() && cy >= box.y_l() && cy < box.y_r();
        const bool near = std::abs(cx - box.center_x()) <= reach &&
                          std::abs(cy - box.center_y()) <= reach;
        const bool home = gx == home_x && gy == home_y;
        if (!((inside && near) || home)) continue;
        int& owner = a.owner[static_cast<std::size_t>(gy) * grid_w + gx];
        if (better(b, owner)) owner = b;
      }
    }
  }
  return a;
}

DetectionTerms detection_loss(const HeadOutput& head,
                              const std::vector<std::vector<PseudoLabel>>& targets,
                              const Config& config) {
  const int n = head.obj.dim(0), locs = head.locations();
  if (static_cast<int>(targets.size()) != n) throw std::invalid_argument("one target list per image");
  Tensor obj_target({n, locs, 1});
  std::vector<int> rows;
  std::vector<Box> boxes;
  std::vector<int> cells;
  for (int i = 0; i < n; ++i) {
    const Assignment a =
        assign_targets(head.grid_h, head.grid_w, head.stride, targets[i], config.center_radius);
    for (int loc = 0; loc < locs; ++loc) {
      if (a.owner[loc] < 0) continue;
      obj_target.data[static_cast<std::size_t>(i) * locs + loc] = 1.0;
      rows.push_back(i * locs + loc);
      boxes.push_back(targets[i][a.owner[loc]].box);
      cells.push_back(loc);
    }
  }
  DetectionTerms out;
  out.obj = nn::mean(sigmoid_focal(head.obj, obj_target, config.focal_gamma, config.focal_alpha));
  if (rows.empty()) {
    out.cls = Var(Tensor::scalar(0.0));
    out.reg = Var(Tensor::scalar(0.0));
    return out;
  }
  const int p = static_cast<int>(rows.size());
  const Var cls = nn::index_select(nn::reshape(head.cls, {n * locs, 1}), rows);
  out.cls = nn::mean(sigmoid_focal(cls, Tensor({p, 1}, 1.0), config.focal_gamma, config.focal_alpha));

  const Var reg = nn::index_select(nn::reshape(head.reg, {n * locs, 4}), rows);
  Tensor grid_x({p, 1}), grid_y({p, 1});
  for (int r = 0; r < p; ++r) {
    grid_x.data[r] = cells[r] % head.grid_w;
    grid_y.data[r] = cells[r] / head.grid_w;
  }
  const double s = head.stride;
  const Var cx = nn::scale(nn::add(nn::sigmoid(nn::slice(reg, 1, 0, 1)), Var(std::move(grid_x))), s);
  const Var cy = nn::scale(nn::add(nn::sigmoid(nn::slice(reg, 1, 1, 1)), Var(std::move(grid_y))), s);
  const Var half_w = nn::scale(nn::exp(nn::slice(reg, 1, 2, 1)), 0.5 * s);
  const Var half_h = nn::scale(nn::exp(nn::slice(reg, 1, 3, 1)), 0.5 * s);
  const Var pred = nn::concat({nn::sub(cx, half_w), nn::sub(cy, half_h), nn::add(cx, half_w),
                               nn::add(cy, half_h)},
                              1);
  out.reg = nn::mean(giou_loss(pred, boxes));
  return out;
}

double total_loss(double cls, double reg, double obj, double pcl, double eta, double gamma,
                  double lambda1, double lambda2) {
  const std::pair<const char*, double> parts[] = {{"cls", cls}, {"reg", reg}, {"obj", obj}, {"pcl", pcl}};
  for (const auto& [name, v] : parts) {
    if (!std::isfinite(v)) throw NonFiniteLoss(std::string("non-finite loss component ") + name);
  }
  return eta * (cls + lambda1 * reg + lambda2 * obj) + gamma * pcl;
}

Var total_loss(const DetectionTerms& det, const Var& pcl, const Config& config) {
  total_loss(det.cls.item(), det.reg.item(), det.obj.item(), pcl.item(), config.eta,
             config.gamma, config.lambda1, config.lambda2);
  const Var detection =
      nn::add(nn::add(det.cls, nn::scale(det.reg, config.lambda1)), nn::scale(det.obj, config.lambda2));
  return nn::add(nn::scale(detection, config.eta), nn::scale(pcl, config.gamma));
}

}  // namespace irweak::losses
