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

#include "irweak/ltm.hpp"
#include "irweak/nn/ops.hpp"
#include "test_util.hpp"

using namespace irweak;
using namespace irweak::nn;
using irweak::testing::random_tensor;

namespace {

ltm::Dims small_dims() {
  ltm::Dims d;
  d.stem_channels = 4;
  d.channels = 8;
  d.heads = 2;
  return d;
}

ParameterStore make_params(const ltm::Dims& d, std::uint64_t seed = 1, ltm::InitOptions opt = {}) {
  ParameterStore p;
  std::mt19937_64 rng(seed);
  ltm::init_params(p, d, rng, opt);
  return p;
}

std::vector<Var> random_maps(int count, const Shape& shape, std::mt19937_64& rng) {
  std::vector<Var> out;
  for (int i = 0; i < count; ++i) out.emplace_back(random_tensor(shape, rng));
  return out;
}

Var probe(const Var& y, std::uint64_t seed = 77) {
  std::mt19937_64 rng(seed);
  return sum(mul(y, Var(random_tensor(y.shape(), rng))));
}

// Gradient error of f with respect to one named parameter at a few elements.
double param_gerr(const ParameterStore& base, const std::string& name,
                  const std::function<Var(const ParameterStore&)>& f, std::vector<std::size_t> idx) {
  return irweak::testing::gradient_error(
      [&](const Var& x) {
        ParameterStore p = base;
        p.get(name) = x;
        return f(p);
      },
      base.get(name).value(), 1e-5, idx, 1e-2);
}

double max_abs(const Tensor& t) {
  double m = 0;
  for (double v : t.data) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

TEST_CASE("construction checks") {
  ltm::Dims d = small_dims();
  d.T = 2;
  ParameterStore p;
  std::mt19937_64 rng(0);
  CHECK_THROWS_AS(ltm::init_params(p, d, rng), std::invalid_argument);
}

TEST_CASE("backbone shape, weight sharing and gradients") {
  const ltm::Dims d;
  const ParameterStore p = make_params(d);
  std::mt19937_64 rng(2);
  const Var big(random_tensor({5, 1, 512, 512}, rng));
  CHECK(ltm::backbone_features(p, big).shape() == Shape{5, 64, 64, 64});

  Tensor frames = random_tensor({2, 1, 32, 32}, rng);
  std::copy(frames.data.begin(), frames.data.begin() + 1024, frames.data.begin() + 1024);
  const Tensor f = ltm::backbone_features(p, Var(frames)).value();
  const std::size_t half = f.size() / 2;
  CHECK(std::equal(f.data.begin(), f.data.begin() + half, f.data.begin() + half));
  for (double v : f.data) CHECK(std::isfinite(v));

  const ParameterStore small = make_params(small_dims());
  const Var x(random_tensor({2, 1, 16, 16}, rng));
  auto loss = [&](const ParameterStore& q) { return probe(ltm::backbone_features(q, x)); };
  CHECK(param_gerr(small, "backbone.stem.weight", loss, {0, 5, 17}) < 1e-4);
  CHECK(param_gerr(small, "backbone.stage2.weight", loss, {3}) < 1e-4);
  CHECK(param_gerr(small, "backbone.stage3.bias", loss, {1}) < 1e-4);
  CHECK(param_gerr(small, "backbone.stage1.norm.weight", loss, {2}) < 1e-4);

  // biases start at zero, so each stage's map norm cancels a positive input gain
  const Tensor base = random_tensor({1, 1, 16, 16}, rng);
  Tensor scaled = base;
  for (double& v : scaled.data) v *= 10.0;
  const Tensor a = ltm::backbone_features(small, Var(base)).value();
  const Tensor b = ltm::backbone_features(small, Var(scaled)).value();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a.data[i] - b.data[i]) < 1e-4);
}

TEST_CASE("long-term motion") {
  const ltm::Dims d = small_dims();
  const ParameterStore p = make_params(d);
  std::mt19937_64 rng(3);
  std::vector<Var> maps(4, Var(Tensor({2, 8, 3, 3})));
  maps.push_back(Var(random_tensor({2, 8, 3, 3}, rng)));
  Var gate;
  const Var out = ltm::long_term_motion(p, maps, &gate);
  CHECK(out.shape() == maps.back().shape());
  for (double v : gate.value().data) CHECK(v == 0.5);

  CHECK(ltm::long_term_motion(p, {maps.back()}).value().data == maps.back().value().data);

  // neighbors are frames 1..4; the keyframe never enters the gate
  auto feats = random_maps(5, {1, 8, 3, 3}, rng);
  Var g1, g2;
  ltm::long_term_motion(p, feats, &g1);
  feats[4] = Var(random_tensor({1, 8, 3, 3}, rng));
  const Tensor o2 = ltm::long_term_motion(p, feats, &g2).value();
  CHECK(g1.value().data == g2.value().data);
  feats[0] = Var(random_tensor({1, 8, 3, 3}, rng));
  Var g3;
  const Tensor o3 = ltm::long_term_motion(p, feats, &g3).value();
  CHECK(g3.value().data != g2.value().data);
  CHECK(o3.data != o2.data);

  const auto gfeats = random_maps(5, {1, 8, 3, 3}, rng);
  auto loss = [&](const ParameterStore& q) { return probe(ltm::long_term_motion(q, gfeats)); };
  CHECK(param_gerr(p, "ltm.long.gate.conv1.weight", loss, {0, 100, 999}) < 1e-4);
}

TEST_CASE("DCT") {
  const auto c = ltm::dct_1d(std::vector<double>(6, 2.0));
  CHECK(c[0] == doctest::Approx(2.0 * std::sqrt(6.0)));
  for (std::size_t k = 1; k < c.size(); ++k) CHECK(std::abs(c[k]) < 1e-12);
  CHECK(ltm::dct_1d({3.5}) == std::vector<double>{3.5});

  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  std::vector<double> s(16);
  for (double& v : s) v = n(rng);
  const auto got = ltm::dct_1d(s);
  for (int k = 0; k < 16; ++k) {
    double acc = 0;
    for (int i = 0; i < 16; ++i) acc += s[i] * std::cos(M_PI * k * (2 * i + 1) / 32.0);
    acc *= std::sqrt((k == 0 ? 1.0 : 2.0) / 16.0);
    CHECK(std::abs(got[k] - acc) < 1e-6);
  }
  const auto back = ltm::idct_1d(got);
  for (int i = 0; i < 16; ++i) CHECK(std::abs(back[i] - s[i]) < 1e-12);

  const Tensor m = ltm::dct_matrix(7);
  for (int a = 0; a < 7; ++a) {
    for (int b = 0; b < 7; ++b) {
      double dot = 0;
      for (int i = 0; i < 7; ++i) dot += m.data[a * 7 + i] * m.data[b * 7 + i];
      CHECK(dot == doctest::Approx(a == b ? 1.0 : 0.0).scale(1.0));
    }
  }

  const Tensor x = random_tensor({2, 8, 3, 4}, rng);
  const Tensor d = ltm::dct_feature(Var(x)).value();
  // the transform runs along channels at each location
  std::vector<double> column(8);
  for (int ch = 0; ch < 8; ++ch) column[ch] = x.data[((1 * 8 + ch) * 3 + 2) * 4 + 1];
  const auto col = ltm::dct_1d(column);
  for (int ch = 0; ch < 8; ++ch) CHECK(d.data[((1 * 8 + ch) * 3 + 2) * 4 + 1] == doctest::Approx(col[ch]));
  const Tensor r = ltm::idct_feature(Var(d)).value();
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(r.data[i] - x.data[i]) < 1e-6);
}

TEST_CASE("frequency enhancement") {
  const ltm::Dims d = small_dims();
  ltm::InitOptions zero;
  zero.zero_attention_outputs = true;
  const ParameterStore pz = make_params(d, 1, zero);
  const Var z(Tensor({1, 8, 3, 3}));
  const Tensor out = ltm::freq_enhance(pz, z, z, 2).value();
  CHECK(out.shape == Shape{1, 8, 3, 3});
  CHECK(max_abs(out) == 0.0);

  const ParameterStore p = make_params(d);
  std::mt19937_64 rng(5);
  const auto maps = random_maps(2, {2, 8, 3, 3}, rng);
  ltm::AttentionTrace trace;
  CHECK(ltm::freq_enhance(p, maps[0], maps[1], 2, &trace).shape() == Shape{2, 8, 3, 3});
  REQUIRE(trace.weights.size() == 2);
  for (const Var& w : trace.weights) {
    const Tensor& t = w.value();
    CHECK(t.shape == Shape{4, 18, 18});
    for (int r = 0; r < t.shape[0] * t.shape[1]; ++r) {
      double s = 0;
      for (int k = 0; k < 18; ++k) s += t.data[r * 18 + k];
      CHECK(std::abs(s - 1.0) < 1e-6);
    }
  }
  // odd channel counts give the low group the extra channel
  ltm::Dims odd = d;
  odd.channels = 7;
  const ParameterStore po = make_params(odd);
  CHECK(po.get("ltm.freq.low.mlp.weight").shape() == Shape{4, 4});
  CHECK(po.get("ltm.freq.high.mlp.weight").shape() == Shape{3, 3});
}

TEST_CASE("short-term motion") {
  const ParameterStore p = make_params(small_dims());
  std::mt19937_64 rng(6);
  const auto f = random_maps(3, {1, 8, 3, 3}, rng);
  CHECK(ltm::short_term_motion(p, f[0], f[1], f[2], 2).shape() == Shape{1, 8, 3, 3});
  const Tensor ab = ltm::cross_motion(p, f[0], f[1], 2).value();
  const Tensor ba = ltm::cross_motion(p, f[1], f[0], 2).value();
  CHECK(max_abs(ab) > 0);
  double diff = 0;
  for (std::size_t i = 0; i < ab.size(); ++i) diff = std::max(diff, std::abs(ab.data[i] - ba.data[i]));
  CHECK(diff > 1e-6);
  auto loss = [&](const ParameterStore& q) { return probe(ltm::short_term_motion(q, f[0], f[1], f[2], 2)); };
  CHECK(param_gerr(p, "ltm.short.cross.q.weight", loss, {0, 9, 63}) < 1e-4);
}

TEST_CASE("long-short fusion") {
  ltm::InitOptions opt;
  opt.zero_gates = true;
  const ParameterStore p = make_params(small_dims(), 1, opt);
  std::mt19937_64 rng(7);
  const auto f = random_maps(2, {2, 8, 3, 3}, rng);
  ltm::FusionTrace trace;
  const Tensor out = ltm::fuse_motion(p, f[0], f[1], &trace).value();
  CHECK(out.shape == Shape{2, 8, 3, 3});
  const Tensor& proj = trace.projected.value();
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.data[i] == doctest::Approx(0.25 * proj.data[i]));

  const ParameterStore q = make_params(small_dims(), 2);
  ltm::FusionTrace t2;
  ltm::fuse_motion(q, f[0], f[1], &t2);
  CHECK(t2.channel_gate.shape() == Shape{2, 8, 1, 1});
  CHECK(t2.spatial_gate.shape() == Shape{2, 1, 3, 3});
  for (double v : t2.channel_gate.value().data) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("every parameter receives gradient and the network is deterministic") {
  const ltm::Dims d = small_dims();
  ParameterStore p = make_params(d, 11);
  std::mt19937_64 rng(8);
  const Var frames(random_tensor({10, 1, 16, 16}, rng));
  auto run = [&](const ParameterStore& q) {
    const Var feats = ltm::backbone_features(q, frames);
    std::vector<Var> per_frame;
    for (int t = 0; t < 5; ++t) per_frame.push_back(slice(feats, 0, 2 * t, 2));
    return ltm::motion_features(q, per_frame, d.heads);
  };
  const Var out = run(p);
  CHECK(out.shape() == Shape{2, 8, 2, 2});
  backward(probe(out));
  for (const auto& name : p.names()) {
    INFO(name);
    const Tensor& g = p.get(name).grad();
    REQUIRE(g.size() == p.get(name).size());
    CHECK(max_abs(g) > 0.0);
  }
  const ParameterStore again = make_params(d, 11);
  CHECK(run(again).value().data == out.value().data);
}
