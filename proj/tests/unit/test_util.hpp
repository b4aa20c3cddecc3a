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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "irweak/nn/autograd.hpp"
#include "irweak/nn/tensor.hpp"

namespace irweak::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("irweak_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline nn::Tensor random_tensor(const nn::Shape& shape, std::mt19937_64& rng,
                                double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  nn::Tensor t(shape);
  for (double& v : t.data) v = dist(rng);
  return t;
}

/// Largest relative error between the analytic gradient of f at x and
/// central differences of step h, over the given element indices (all when
/// empty). Relative error is |a - n| / max(|a|, |n|, floor).
inline double gradient_error(const std::function<nn::Var(const nn::Var&)>& f,
                             const nn::Tensor& x, double h = 1e-5,
                             std::vector<std::size_t> indices = {},
                             double floor = 1e-6) {
  nn::Var leaf(x, true);
  nn::backward(f(leaf));
  const nn::Tensor analytic =
      leaf.grad().size() == x.size() ? leaf.grad() : nn::Tensor(x.shape, 0.0);
  if (indices.empty()) {
    for (std::size_t i = 0; i < x.size(); ++i) indices.push_back(i);
  }
  double worst = 0.0;
  for (std::size_t i : indices) {
    nn::Tensor plus = x, minus = x;
    plus.data[i] += h;
    minus.data[i] -= h;
    const double numeric =
        (f(nn::Var(plus)).item() - f(nn::Var(minus)).item()) / (2.0 * h);
    const double a = analytic.data[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace irweak::testing
