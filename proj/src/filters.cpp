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

#include "irweak/filters.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace irweak {
namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

Grid separable(const Grid& in, const std::vector<double>& k) {
  const int r = static_cast<int>(k.size()) / 2;
  const int h = in.height(), w = in.width();
  Grid tmp(h, w), out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * in.at(y, reflect_index(x + i, w));
      tmp.at(y, x) = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.at(reflect_index(y + i, h), x);
      out.at(y, x) = acc;
    }
  }
  return out;
}

}  // namespace

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

Grid filter3x3(const Grid& in, const Kernel3& kernel) {
  const int h = in.height(), w = in.width();
  Grid out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        const int yy = reflect_index(y + dy, h);
        for (int dx = -1; dx <= 1; ++dx) {
          acc += kernel[dy + 1][dx + 1] * in.at(yy, reflect_index(x + dx, w));
        }
      }
      out.at(y, x) = acc;
    }
  }
  return out;
}

Grid gaussian_blur(const Grid& in, double sigma) {
  if (sigma <= 0.0) return in;
  return separable(in, gaussian_kernel(sigma));
}

double gaussian_power_gain(double sigma) {
  if (sigma <= 0.0) return 1.0;
  double acc = 0.0;
  for (double v : gaussian_kernel(sigma)) acc += v * v;
  return acc;
}

Grid box_mean(const Grid& in, int radius) {
  std::vector<double> k(2 * radius + 1, 1.0 / (2 * radius + 1));
  return separable(in, k);
}

Grid min_max_normalize(const Grid& in) {
  Grid out(in.height(), in.width(), 0.0);
  if (in.empty()) return out;
  const auto [lo, hi] = std::minmax_element(in.values().begin(), in.values().end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = (in[i] - *lo) / range;
  return out;
}

}  // namespace irweak
