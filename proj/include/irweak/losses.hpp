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

#pragma once

#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "irweak/box.hpp"
#include "irweak/config.hpp"
#include "irweak/nn/autograd.hpp"
#include "irweak/nn/params.hpp"

namespace irweak::losses {

struct Detection {
  Box box;
  double objectness = 0.0;
  double class_score = 0.0;
  double score() const { return objectness * class_score; }
};

/// Dense head output for N images on an h x w grid, locations row-major.
struct HeadOutput {
  nn::Var reg;  // [N, h*w, 4]: tx, ty (center offset logits), tw, th (log size)
  nn::Var obj;  // [N, h*w, 1] logits
  nn::Var cls;  // [N, h*w, 1] logits
  int grid_h = 0;
  int grid_w = 0;
  int stride = 8;
  int locations() const { return grid_h * grid_w; }
};

/// The objectness bias starts at logit(prior); the default prior 0.5 is a
/// zero bias.
void init_head(nn::ParameterStore& params, int channels, std::mt19937_64& rng,
               bool zero_init = false, double objectness_prior = 0.5);

HeadOutput detection_head(const nn::ParameterStore& params, const nn::Var& features,
                          int stride);

/// Box of one location: center ((gx + sigmoid(tx)) * s, (gy + sigmoid(ty)) * s),
/// size exp(tw) * s by exp(th) * s, clamped to the frame. nullopt when nothing
/// of it is left inside the frame.
std::optional<Box> decode_box(const double* reg, int gx, int gy, int stride,
                              int frame_h, int frame_w);

/// Every location of image n, unfiltered.
std::vector<Detection> decode(const HeadOutput& head, int image, int frame_h,
                              int frame_w);

/// Greedy NMS in descending score order; ties keep the earlier detection.
std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold);

/// Sigmoid focal loss of a probability, clamped to [1e-7, 1 - 1e-7].
double focal_loss(double prob, int target, double gamma = 2.0, double alpha = 0.25);

/// Elementwise focal loss of logits against 0/1 targets (same shape).
nn::Var sigmoid_focal(const nn::Var& logits, const nn::Tensor& targets,
                      double gamma = 2.0, double alpha = 0.25);

double giou(const Box& a, const Box& b);

/// 1 - GIoU per row of pred [P, 4] (x_l, y_l, x_r, y_r) against targets.
/// Returns [P].
nn::Var giou_loss(const nn::Var& pred, const std::vector<Box>& targets);

/// Positive locations of one image: owner[loc] indexes the box, -1 is
/// background.
struct Assignment {
  std::vector<int> owner;
  int positives() const;
};

/// A location is positive for a box when its cell center lies inside the
/// box and within center_radius cells of the box center on both axes. The
/// cell holding the box center is always positive for it. Contested cells go
/// to the higher score, then to the lower index.
Assignment assign_targets(int grid_h, int grid_w, int stride,
                          const std::vector<PseudoLabel>& boxes,
                          double center_radius = 2.5);

struct DetectionTerms {
  nn::Var cls, reg, obj;
};

/// Keyframe supervision for a batch: objectness focal loss averaged over all
/// locations, class focal loss and 1 - GIoU averaged over positives.
DetectionTerms detection_loss(const HeadOutput& head,
                              const std::vector<std::vector<PseudoLabel>>& targets,
                              const Config& config);

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// eta * (cls + lambda1 * reg + lambda2 * obj) + gamma * pcl. Throws
/// NonFiniteLoss naming the first non-finite component.
double total_loss(double cls, double reg, double obj, double pcl, double eta = 1.0,
                  double gamma = 1.0, double lambda1 = 5.0, double lambda2 = 1.0);
nn::Var total_loss(const DetectionTerms& det, const nn::Var& pcl, const Config& config);

}  // namespace irweak::losses
