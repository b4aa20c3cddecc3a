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

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "irweak/nn/autograd.hpp"

namespace irweak::nn {

/// Named trainable leaves in creation order.
class ParameterStore {
 public:
  Var& add(const std::string& name, Tensor init);
  Var& get(const std::string& name);
  const Var& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  const std::vector<std::string>& names() const { return names_; }
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::vector<std::string> names_;
  std::vector<Var> vars_;
};

/// Values are rounded to float32 so that float32 checkpoints restore them
/// exactly.
Tensor round_to_float(Tensor t);

Tensor uniform_tensor(const Shape& shape, double bound, std::mt19937_64& rng);
/// Kaiming-uniform bound sqrt(3 / fan_in) scaled by gain.
Tensor kaiming_tensor(const Shape& shape, int fan_in, std::mt19937_64& rng,
                      double gain = 1.0);

/// SGD with momentum and decoupled-from-bias weight decay (applied to
/// parameters of rank >= 2). Parameter values and momentum buffers are kept
/// float32-representable.
class Sgd {
 public:
  Sgd(double lr, double momentum, double weight_decay);

  void step(ParameterStore& params);
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

  std::vector<Tensor>& buffers() { return buffers_; }
  const std::vector<Tensor>& buffers() const { return buffers_; }

 private:
  double lr_, momentum_, weight_decay_;
  std::vector<Tensor> buffers_;  // aligned with ParameterStore::names()
};

}  // namespace irweak::nn
