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

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace irweak {

/// Row-major single-channel real grid. Used for frames, activation maps and
/// masks alike.
template <typename T>
class BasicGrid {
 public:
  BasicGrid() = default;
  BasicGrid(int height, int width, T fill = T{})
      : height_(height), width_(width),
        values_(static_cast<std::size_t>(checked(height, width)), fill) {}

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  T& at(int y, int x) { return values_[index(y, x)]; }
  const T& at(int y, int x) const { return values_[index(y, x)]; }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  bool contains(int y, int x) const {
    return y >= 0 && y < height_ && x >= 0 && x < width_;
  }
  bool same_shape(const BasicGrid& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  std::vector<T>& values() { return values_; }
  const std::vector<T>& values() const { return values_; }

  friend bool operator==(const BasicGrid& a, const BasicGrid& b) {
    return a.height_ == b.height_ && a.width_ == b.width_ &&
           a.values_ == b.values_;
  }

 private:
  static long checked(int h, int w) {
    if (h < 0 || w < 0) throw std::invalid_argument("negative grid shape");
    return static_cast<long>(h) * w;
  }
  std::size_t index(int y, int x) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<T> values_;
};

using Grid = BasicGrid<double>;
using Mask = BasicGrid<unsigned char>;

}  // namespace irweak
