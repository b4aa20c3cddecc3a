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

#include <doctest.h>

#include <cmath>
#include <random>

#include "irweak/nn/ops.hpp"
#include "irweak/nn/params.hpp"
#include "test_util.hpp"

using namespace irweak;
using namespace irweak::nn;
using irweak::testing::random_tensor;

namespace {

constexpr double kTol = 1e-6;

// Relative error floored at 1e-2 so tiny gradients compare absolutely.
double gerr(const std::function<Var(const Var&)>& f, const Tensor& x) {
  return irweak::testing::gradient_error(f, x, 1e-5, {}, 1e-2);
}

// Weighted sum with fixed random weights so every output element matters.
Var probe(const Var& y, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  return sum(mul(y, Var(random_tensor(y.shape(), rng))));
}

double naive_conv(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad, int n,
                  int co, int oy, int ox) {
  const int cin = x.shape[1], h = x.shape[2], wd = x.shape[3], k = w.shape[2];
  double acc = b.size() ? b.data[co] : 0.0;
  for (int ci = 0; ci < cin; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const int iy = oy * stride - pad + ky, ix = ox * stride - pad + kx;
        if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
        acc += x.data[((n * cin + ci) * h + iy) * wd + ix] *
               w.data[((co * cin + ci) * k + ky) * k + kx];
      }
    }
  }
  return acc;
}

}  // namespace

TEST_CASE("broadcasting arithmetic values") {
  const Var a(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  const Var b(Tensor({1, 3}, {10, 20, 30}));
  CHECK(add(a, b).value().data == std::vector<double>{11, 22, 33, 14, 25, 36});
  CHECK(sub(a, b).value().data == std::vector<double>{-9, -18, -27, -6, -15, -24});
  CHECK(mul(a, Var(Tensor({2, 1}, {2, 3}))).value().data ==
        std::vector<double>{2, 4, 6, 12, 15, 18});
  CHECK(div(a, b).value().data[5] == doctest::Approx(0.2));
  CHECK_THROWS(add(a, Var(Tensor({3, 2}))));
}

TEST_CASE("elementwise gradients") {
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor({3, 4}, rng);
  const Tensor other = random_tensor({1, 4}, rng);
  Tensor positive = x;
  for (double& v : positive.data) v = std::abs(v) + 0.5;
  CHECK(gerr([&](const Var& v) { return probe(add(v, Var(other))); }, x) < kTol);
  CHECK(gerr([&](const Var& v) { return probe(sub(Var(other), v)); }, x) < kTol);
  CHECK(gerr([&](const Var& v) { return probe(mul(v, v)); }, x) < kTol);
  CHECK(gerr([&](const Var& v) { return probe(div(Var(other), v)); }, positive) < kTol);
  CHECK(gerr([&](const Var& v) { return probe(div(v, Var(other))); }, x) < kTol);
  CHECK(gerr([&](const Var& v) { return probe(sigmoid(v)); }, x) < kTol);
  CHECK(gerr([&](const Var& v) { return probe(silu(v)); }, x) < kTol);
  CHECK(gerr([&](const Var& v) { return probe(exp(v)); }, x) < kTol);
  CHECK(gerr([&](const Var& v) { return probe(log(v)); }, positive) < kTol);
  CHECK(gerr([&](const Var& v) { return probe(square(v)); }, x) < kTol);
  CHECK(gerr([&](const Var& v) { return probe(scale(add_scalar(v, 2.0), -3.0)); }, x) < kTol);
  // broadcast operand gradient is reduced over the broadcast axis
  CHECK(gerr([&](const Var& v) { return probe(mul(Var(x), v)); }, other) < kTol);
}

TEST_CASE("reduction and shape gradients") {
  std::mt19937_64 rng(2);
  const Tensor x = random_tensor({2, 3, 4}, rng);
  CHECK(gerr([](const Var& v) { return mean(square(v)); }, x) < kTol);
  for (int axis = 0; axis < 3; ++axis) {
    CHECK(gerr([&](const Var& v) { return probe(sum_axis(v, axis)); }, x) < kTol);
    CHECK(gerr([&](const Var& v) { return probe(mean_axis(v, axis)); }, x) < kTol);
    CHECK(gerr([&](const Var& v) { return probe(max_axis(v, axis)); }, x) < kTol);
  }
  CHECK(gerr([](const Var& v) { return probe(reshape(v, {6, 4})); }, x) < kTol);
  CHECK(gerr([](const Var& v) { return probe(permute(v, {2, 0, 1})); }, x) < kTol);
  CHECK(gerr([](const Var& v) { return probe(slice(v, 2, 1, 2)); }, x) < kTol);
  CHECK(gerr([](const Var& v) { return probe(concat({v, square(v)}, 1)); }, x) < kTol);
  CHECK(gerr([](const Var& v) { return probe(index_select(v, {1, 0, 1})); }, x) < kTol);
  CHECK(gerr([](const Var& v) { return probe(softmax(v)); }, x) < kTol);
  CHECK(gerr([](const Var& v) { return probe(normalize_rows(reshape(v, {6, 4}))); }, x) < kTol);
}

TEST_CASE("shape op values") {
  const Var x(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  CHECK(permute(x, {1, 0}).value().data == std::vector<double>{1, 4, 2, 5, 3, 6});
  CHECK(slice(x, 1, 1, 2).value().data == std::vector<double>{2, 3, 5, 6});
  CHECK(concat({x, x}, 0).value().shape == Shape{4, 3});
  CHECK(index_select(x, {1}).value().data == std::vector<double>{4, 5, 6});
  CHECK(max_axis(x, 1).value().data == std::vector<double>{3, 6});
  CHECK(sum_axis(x, 0).value().data == std::vector<double>{5, 7, 9});
  const Tensor s = softmax(x).value();
  CHECK(s.data[0] + s.data[1] + s.data[2] == doctest::Approx(1.0));
}

TEST_CASE("matmul values and gradients") {
  std::mt19937_64 rng(3);
  const Tensor a = random_tensor({2, 3, 4}, rng);
  const Tensor b = random_tensor({4, 5}, rng);
  const Tensor bb = random_tensor({2, 4, 5}, rng);
  const Tensor bt = random_tensor({2, 5, 4}, rng);
  const Tensor y = matmul(Var(a), Var(b)).value();
  double ref = 0.0;
  for (int k = 0; k < 4; ++k) ref += a.data[(1 * 3 + 2) * 4 + k] * b.data[k * 5 + 3];
  CHECK(y.data[(1 * 3 + 2) * 5 + 3] == doctest::Approx(ref));
  const Tensor nt = matmul_nt(Var(a), Var(bt)).value();
  ref = 0.0;
  for (int k = 0; k < 4; ++k) ref += a.data[(1 * 3 + 0) * 4 + k] * bt.data[(1 * 5 + 4) * 4 + k];
  CHECK(nt.data[(1 * 3 + 0) * 5 + 4] == doctest::Approx(ref));
  CHECK(gerr([&](const Var& v) { return probe(matmul(v, Var(b))); }, a) < kTol);
  CHECK(gerr([&](const Var& v) { return probe(matmul(Var(a), v)); }, b) < kTol);
  CHECK(gerr([&](const Var& v) { return probe(matmul(v, Var(bb))); }, a) < kTol);
  CHECK(gerr([&](const Var& v) { return probe(matmul(Var(a), v)); }, bb) < kTol);
  CHECK(gerr([&](const Var& v) { return probe(matmul_nt(v, Var(bt))); }, a) < kTol);
  CHECK(gerr([&](const Var& v) { return probe(matmul_nt(Var(a), v)); }, bt) < kTol);
}

TEST_CASE("conv2d matches direct summation") {
  std::mt19937_64 rng(4);
  for (int stride : {1, 2}) {
    for (int k : {1, 3, 7}) {
      const Tensor x = random_tensor({2, 3, 9, 8}, rng);
      const Tensor w = random_tensor({4, 3, k, k}, rng);
      const Tensor b = random_tensor({4}, rng);
      const int pad = k / 2;
      const Tensor y = conv2d(Var(x), Var(w), Var(b), stride, pad).value();
      const int oh = y.shape[2], ow = y.shape[3];
      CHECK(oh == (9 + 2 * pad - k) / stride + 1);
      double worst = 0.0;
      for (int n = 0; n < 2; ++n)
        for (int co = 0; co < 4; ++co)
          for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox)
              worst = std::max(worst, std::abs(y.data[((n * 4 + co) * oh + oy) * ow + ox] -
                                               naive_conv(x, w, b, stride, pad, n, co, oy, ox)));
      CHECK(worst < 1e-12);
      CHECK(gerr([&](const Var& v) { return probe(conv2d(v, Var(w), Var(b), stride, pad)); }, x) < kTol);
      CHECK(gerr([&](const Var& v) { return probe(conv2d(Var(x), v, Var(b), stride, pad)); }, w) < kTol);
      CHECK(gerr([&](const Var& v) { return probe(conv2d(Var(x), Var(w), v, stride, pad)); }, b) < kTol);
    }
  }
}

TEST_CASE("layer norm over channels") {
  std::mt19937_64 rng(5);
  const Tensor x = random_tensor({2, 5, 3, 3}, rng);
  const Tensor y = layer_norm_channels(Var(x)).value();
  for (int n = 0; n < 2; ++n) {
    for (int p = 0; p < 9; ++p) {
      double m = 0, v = 0;
      for (int c = 0; c < 5; ++c) m += y.data[(n * 5 + c) * 9 + p] / 5;
      for (int c = 0; c < 5; ++c) v += std::pow(y.data[(n * 5 + c) * 9 + p] - m, 2) / 5;
      CHECK(m == doctest::Approx(0.0).scale(1.0));
      CHECK(v == doctest::Approx(1.0).epsilon(1e-4));
    }
  }
  CHECK(gerr([](const Var& v) { return probe(layer_norm_channels(v)); }, x) < kTol);
}

TEST_CASE("zero rows stay zero under normalization") {
  const Var x(Tensor({2, 2}, {0, 0, 3, 4}), true);
  const Var y = normalize_rows(x);
  CHECK(y.value().data == std::vector<double>{0, 0, 0.6, 0.8});
  backward(sum(y));
  CHECK(x.grad().data[0] == 0.0);
  CHECK(x.grad().data[1] == 0.0);
}

TEST_CASE("backward accumulates over shared subexpressions") {
  const Var x(Tensor::scalar(3.0), true);
  const Var y = mul(x, x);
  backward(add(y, y));
  CHECK(x.grad().item() == doctest::Approx(12.0));
}

TEST_CASE("no-grad mode records nothing") {
  const Var x(Tensor::scalar(2.0), true);
  Var y;
  {
    NoGradGuard guard;
    CHECK_FALSE(grad_enabled());
    y = mul(x, x);
  }
  CHECK(grad_enabled());
  CHECK_FALSE(y.requires_grad());
  CHECK(y.item() == 4.0);
}

TEST_CASE("parameter store and SGD") {
  ParameterStore params;
  params.add("w", Tensor({2, 2}, {1.0, 2.0, 3.0, 0.1}));
  params.add("b", Tensor({2}, {0.5, -0.5}));
  CHECK_THROWS(params.add("w", Tensor({1})));
  CHECK_THROWS(params.get("nope"));
  CHECK(params.scalar_count() == 6);
  CHECK(params.get("w").value().data[3] == static_cast<double>(0.1f));

  Sgd sgd(0.1, 0.9, 0.01);
  backward(sum(mul(params.get("w"), params.get("w"))));
  backward(sum(params.get("b")));
  sgd.step(params);
  // w: buf = 2w + 0.01 w; b (rank 1): no decay
  CHECK(params.get("w").value().data[0] == static_cast<double>(static_cast<float>(1.0 - 0.1 * 2.01)));
  CHECK(params.get("b").value().data[0] == static_cast<double>(static_cast<float>(0.5 - 0.1)));
  params.zero_grad();
  sgd.step(params);
  // momentum carries the previous update
  const double buf = static_cast<float>(0.9 * static_cast<float>(2.01) + 0.01 * static_cast<float>(1.0 - 0.201));
  CHECK(params.get("w").value().data[0] ==
        doctest::Approx(static_cast<float>(1.0 - 0.201) - 0.1 * buf).epsilon(1e-6));
  for (const auto& t : sgd.buffers()) {
    for (double v : t.data) CHECK(v == static_cast<double>(static_cast<float>(v)));
  }
}
