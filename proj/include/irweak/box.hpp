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
#include <stdexcept>

#include "irweak/grid.hpp"

namespace irweak {

/// Axis-aligned box, half-open [x_l, x_r) x [y_l, y_r) in pixel units.
class Box {
 public:
  Box(double x_l, double y_l, double x_r, double y_r);

  /// Clamps to [0, width] x [0, height]; nullopt when nothing is left.
  static std::optional<Box> clamped(double x_l, double y_l, double x_r,
                                    double y_r, double width, double height);

  double x_l() const { return x_l_; }
  double y_l() const { return y_l_; }
  double x_r() const { return x_r_; }
  double y_r() const { return y_r_; }
  double width() const { return x_r_ - x_l_; }
  double height() const { return y_r_ - y_l_; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x_l_ + x_r_); }
  double center_y() const { return 0.5 * (y_l_ + y_r_); }

  friend bool operator==(const Box&, const Box&) = default;

 private:
  double x_l_, y_l_, x_r_, y_r_;
};

class NoForeground : public std::runtime_error {
 public:
  NoForeground() : std::runtime_error("mask has no foreground pixels") {}
};

double iou(const Box& a, const Box& b);

/// Tight box around the set pixels. Throws NoForeground on an empty mask.
Box mask_to_box(const Mask& mask);

/// Rasterizes the pixels whose centers fall inside the box.
Mask box_to_mask(const Box& box, int height, int width);

struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Candidate ground truth mined from one keyframe.
struct PseudoLabel {
  Box box;
  double score = 0.0;
  Point peak;
  int mask_area = 0;
};

}  // namespace irweak
