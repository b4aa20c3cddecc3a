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

#include "irweak/box.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace irweak {

Box::Box(double x_l, double y_l, double x_r, double y_r)
    : x_l_(x_l), y_l_(y_l), x_r_(x_r), y_r_(y_r) {
  if (!(x_l < x_r) || !(y_l < y_r) || !std::isfinite(x_l) ||
      !std::isfinite(y_l) || !std::isfinite(x_r) || !std::isfinite(y_r)) {
    throw std::invalid_argument("degenerate box (" + std::to_string(x_l) +
                                "," + std::to_string(y_l) + "," +
                                std::to_string(x_r) + "," +
                                std::to_string(y_r) + ")");
  }
}

std::optional<Box> Box::clamped(double x_l, double y_l, double x_r,
                                double y_r, double width, double height) {
  x_l = std::clamp(x_l, 0.0, width);
  x_r = std::clamp(x_r, 0.0, width);
  y_l = std::clamp(y_l, 0.0, height);
  y_r = std::clamp(y_r, 0.0, height);
  if (!(x_l < x_r) || !(y_l < y_r)) return std::nullopt;
  return Box(x_l, y_l, x_r, y_r);
}

double iou(const Box& a, const Box& b) {
  const double iw =
      std::min(a.x_r(), b.x_r()) - std::max(a.x_l(), b.x_l());
  const double ih =
      std::min(a.y_r(), b.y_r()) - std::max(a.y_l(), b.y_l());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

Box mask_to_box(const Mask& mask) {
  int x0 = mask.width(), y0 = mask.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(y, x)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) throw NoForeground();
  return Box(x0, y0, x1 + 1, y1 + 1);
}

Mask box_to_mask(const Box& box, int height, int width) {
  Mask mask(height, width, 0);
  for (int y = 0; y < height; ++y) {
    const double cy = y + 0.5;
    if (cy < box.y_l() || cy >= box.y_r()) continue;
    for (int x = 0; x < width; ++x) {
      const double cx = x + 0.5;
      if (cx >= box.x_l() && cx < box.x_r()) mask.at(y, x) = 1;
    }
  }
  return mask;
}

}  // namespace irweak
