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

#include <array>

#include "irweak/grid.hpp"

namespace irweak {

/// Half-sample symmetric reflection: -1 -> 0, -2 -> 1, n -> n-1.
int reflect_index(int i, int n);

using Kernel3 = std::array<std::array<double, 3>, 3>;

/// 3x3 correlation with reflective boundary handling.
Grid filter3x3(const Grid& in, const Kernel3& kernel);

/// Separable Gaussian blur, radius ceil(3 sigma), reflective boundary.
/// sigma <= 0 returns the input unchanged.
Grid gaussian_blur(const Grid& in, double sigma);

/// Sum of squared weights of the normalized 1-D Gaussian kernel used by
/// gaussian_blur (noise variance gain per axis).
double gaussian_power_gain(double sigma);

/// Mean over a (2r+1)x(2r+1) window, reflective boundary.
Grid box_mean(const Grid& in, int radius);

/// Rescales to [0, 1]; a constant grid maps to all zeros.
Grid min_max_normalize(const Grid& in);

}  // namespace irweak
