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

#include "irweak/nn/params.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace irweak::nn {

Var& ParameterStore::add(const std::string& name, Tensor init) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter " + name);
  names_.push_back(name);
  vars_.emplace_back(round_to_float(std::move(init)), true);
  return vars_.back();
}

Var& ParameterStore::get(const std::string& name) {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw std::out_of_range("unknown parameter " + name);
  return vars_[it - names_.begin()];
}

const Var& ParameterStore::get(const std::string& name) const {
  return const_cast<ParameterStore*>(this)->get(name);
}

bool ParameterStore::contains(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const Var& v : vars_) n += v.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (Var& v : vars_) v.node()->grad = Tensor();
}

Tensor round_to_float(Tensor t) {
  for (double& v : t.data) v = static_cast<double>(static_cast<float>(v));
  return t;
}

Tensor uniform_tensor(const Shape& shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(shape);
  for (double& v : t.data) v = dist(rng);
  return t;
}

Tensor kaiming_tensor(const Shape& shape, int fan_in, std::mt19937_64& rng, double gain) {
  return uniform_tensor(shape, gain * std::sqrt(3.0 / std::max(1, fan_in)), rng);
}

Sgd::Sgd(double lr, double momentum, double weight_decay)
    : lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {}

void Sgd::step(ParameterStore& params) {
  const auto& names = params.names();
  if (buffers_.size() != names.size()) {
    buffers_.clear();
    for (const auto& name : names) buffers_.emplace_back(params.get(name).shape(), 0.0);
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    Var& p = params.get(names[i]);
    Tensor& value = p.mutable_value();
    const Tensor& grad = p.grad();
    Tensor& buf = buffers_[i];
    const bool decay = value.rank() >= 2;
    for (std::size_t j = 0; j < value.size(); ++j) {
      double g = grad.size() == value.size() ? grad.data[j] : 0.0;
      if (decay) g += weight_decay_ * value.data[j];
      buf.data[j] = static_cast<float>(momentum_ * buf.data[j] + g);
      value.data[j] = static_cast<float>(value.data[j] - lr_ * buf.data[j]);
    }
  }
}

}  // namespace irweak::nn
