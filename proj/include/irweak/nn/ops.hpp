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

#include <vector>

#include "irweak/nn/autograd.hpp"

namespace irweak::nn {

// Elementwise arithmetic with broadcasting over dimensions of size 1.
// Operands must have the same rank.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var add_scalar(const Var& a, double s);
Var scale(const Var& a, double s);

Var sigmoid(const Var& a);
Var silu(const Var& a);
Var exp(const Var& a);
/// Natural log; inputs must be positive.
Var log(const Var& a);
Var square(const Var& a);

Var sum(const Var& a);
Var mean(const Var& a);
/// Reductions along one axis, keeping it with size 1.
Var sum_axis(const Var& a, int axis);
Var mean_axis(const Var& a, int axis);
/// Ties route the gradient to the first maximal element.
Var max_axis(const Var& a, int axis);

Var reshape(const Var& a, Shape shape);
Var permute(const Var& a, const std::vector<int>& order);
Var concat(const std::vector<Var>& parts, int axis);
Var slice(const Var& a, int axis, int start, int length);
/// Rows of a along axis 0.
Var index_select(const Var& a, const std::vector<int>& rows);

/// a [..., K] x b [K, N] -> [..., N], or batched a [B, M, K] x b [B, K, N].
Var matmul(const Var& a, const Var& b);
/// b [B, N, K]: a x b^T per batch.
Var matmul_nt(const Var& a, const Var& b);
/// Softmax along the last axis.
Var softmax(const Var& a);

/// x [N, Cin, H, W], weight [Cout, Cin, k, k], optional bias [Cout];
/// zero padding.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride,
           int padding);

/// Normalizes [N, C, H, W] over the channel axis at every location.
Var layer_norm_channels(const Var& x, double eps = 1e-5);

/// Rows divided by their Euclidean norm; zero rows stay zero.
Var normalize_rows(const Var& a);

}  // namespace irweak::nn
