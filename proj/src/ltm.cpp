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

#include "irweak/ltm.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "irweak/nn/ops.hpp"

namespace irweak::ltm {
namespace {

using nn::ParameterStore;
using nn::Tensor;
using nn::Var;

// keeps unit second moment through conv + SiLU
constexpr double kSiluGain = 1.7;

void add_norm(ParameterStore& params, const std::string& name, int channels) {
  params.add(name + ".weight", Tensor({channels}, 1.0));
  params.add(name + ".bias", Tensor({channels}, 0.0));
}

Var affine(const ParameterStore& params, const std::string& name, const Var& x) {
  const int c = x.dim(1);
  return nn::add(nn::mul(x, nn::reshape(params.get(name + ".weight"), {1, c, 1, 1})),
                 nn::reshape(params.get(name + ".bias"), {1, c, 1, 1}));
}

Var apply_norm(const ParameterStore& params, const std::string& name, const Var& x) {
  return affine(params, name, nn::layer_norm_channels(x));
}

/// normalizes each sample over all of C, H and W, keeping spatial contrast
Var apply_map_norm(const ParameterStore& params, const std::string& name, const Var& x) {
  const Var flat = nn::reshape(x, {x.dim(0), x.dim(1) * x.dim(2) * x.dim(3), 1, 1});
  return affine(params, name, nn::reshape(nn::layer_norm_channels(flat), x.shape()));
}

void add_res_block(ParameterStore& params, const std::string& name, int in, int out,
                   std::mt19937_64& rng) {
  add_conv(params, name + ".conv1", in, out, 3, rng);
  add_norm(params, name + ".norm", out);
  add_conv(params, name + ".conv2", out, out, 3, rng);
  add_conv(params, name + ".skip", in, out, 1, rng);
}

/// conv -> layer norm -> SiLU -> conv, plus a 1x1 projection of the input.
Var res_block(const ParameterStore& params, const std::string& name, const Var& x) {
  Var y = apply_conv(params, name + ".conv1", x);
  y = nn::silu(apply_norm(params, name + ".norm", y));
  y = apply_conv(params, name + ".conv2", y);
  return nn::add(y, apply_conv(params, name + ".skip", x));
}

int heads_for(int channels, int heads) {
  int h = std::max(1, std::min(heads, channels));
  while (channels % h) --h;
  return h;
}

/// [N, C, h, w] -> [N, h*w, C]
Var to_tokens(const Var& x) {
  return nn::permute(nn::reshape(x, {x.dim(0), x.dim(1), x.dim(2) * x.dim(3)}), {0, 2, 1});
}

Var from_tokens(const Var& t, int h, int w) {
  const int n = t.dim(0), c = t.dim(2);
  return nn::reshape(nn::permute(t, {0, 2, 1}), {n, c, h, w});
}

/// [N, L, E] -> [N*heads, L, E/heads]
Var split_heads(const Var& x, int heads) {
  const int n = x.dim(0), l = x.dim(1), e = x.dim(2);
  return nn::reshape(nn::permute(nn::reshape(x, {n, l, heads, e / heads}), {0, 2, 1, 3}),
                     {n * heads, l, e / heads});
}

Var merge_heads(const Var& x, int n, int heads) {
  const int l = x.dim(1), d = x.dim(2);
  return nn::reshape(nn::permute(nn::reshape(x, {n, heads, l, d}), {0, 2, 1, 3}),
                     {n, l, heads * d});
}

void add_attention(ParameterStore& params, const std::string& name, int dim,
                   std::mt19937_64& rng) {
  add_linear(params, name + ".q", dim, dim, rng);
  add_linear(params, name + ".k", dim, dim, rng);
  add_linear(params, name + ".v", dim, dim, rng);
}

/// Scaled dot-product attention with concatenated heads, before any output
/// projection. Returns [N, Lq, E].
Var attend(const ParameterStore& params, const std::string& name, const Var& queries,
           const Var& context, int heads, Var* weights_out) {
  const int n = queries.dim(0), e = queries.dim(2);
  const Var q = split_heads(apply_linear(params, name + ".q", queries), heads);
  const Var k = split_heads(apply_linear(params, name + ".k", context), heads);
  const Var v = split_heads(apply_linear(params, name + ".v", context), heads);
  const double temperature = 1.0 / std::sqrt(static_cast<double>(e / heads));
  const Var weights = nn::softmax(nn::scale(nn::matmul_nt(q, k), temperature));
  if (weights_out) *weights_out = weights;
  return merge_heads(nn::matmul(weights, v), n, heads);
}

void zero_param(ParameterStore& params, const std::string& name) {
  Var& p = params.get(name);
  p.mutable_value() = Tensor(p.shape(), 0.0);
}

}  // namespace

void add_conv(ParameterStore& params, const std::string& name, int cin, int cout, int kernel,
              std::mt19937_64& rng, double gain) {
  const int fan_in = cin * kernel * kernel;
  params.add(name + ".weight", nn::kaiming_tensor({cout, cin, kernel, kernel}, fan_in, rng, gain));
  params.add(name + ".bias", Tensor({cout}, 0.0));
}

Var apply_conv(const ParameterStore& params, const std::string& name, const Var& x, int stride) {
  const Var& w = params.get(name + ".weight");
  return nn::conv2d(x, w, params.get(name + ".bias"), stride, w.dim(2) / 2);
}

void add_linear(ParameterStore& params, const std::string& name, int in, int out,
                std::mt19937_64& rng, double gain) {
  params.add(name + ".weight", nn::kaiming_tensor({in, out}, in, rng, gain));
  params.add(name + ".bias", Tensor({out}, 0.0));
}

Var apply_linear(const ParameterStore& params, const std::string& name, const Var& x) {
  const Var& b = params.get(name + ".bias");
  nn::Shape bias_shape(x.value().rank(), 1);
  bias_shape.back() = b.dim(0);
  return nn::add(nn::matmul(x, params.get(name + ".weight")), nn::reshape(b, bias_shape));
}

void init_params(ParameterStore& params, const Dims& dims, std::mt19937_64& rng,
                 const InitOptions& options) {
  if (dims.T < 3) throw std::invalid_argument("motion network needs T >= 3");
  if (dims.stride != 8) throw std::invalid_argument("backbone stride is fixed at 8");
  const int s = dims.stem_channels, c = dims.channels;
  if (s < 1 || c < 2 || dims.heads < 1) throw std::invalid_argument("bad model dimensions");
  add_conv(params, "backbone.stem", 1, s, 3, rng, kSiluGain);
  add_conv(params, "backbone.stage1", s, 2 * s, 3, rng, kSiluGain);
  add_conv(params, "backbone.stage2", 2 * s, c, 3, rng, kSiluGain);
  add_conv(params, "backbone.stage3", c, c, 3, rng, kSiluGain);
  add_norm(params, "backbone.stem.norm", s);
  add_norm(params, "backbone.stage1.norm", 2 * s);
  add_norm(params, "backbone.stage2.norm", c);
  add_norm(params, "backbone.stage3.norm", c);

  add_res_block(params, "ltm.long.gate", (dims.T - 1) * c, c, rng);
  add_res_block(params, "ltm.long.fuse", 2 * c, c, rng);

  const int low = (c + 1) / 2, high = c - low;
  add_attention(params, "ltm.freq.low", low, rng);
  add_linear(params, "ltm.freq.low.mlp", low, low, rng);
  add_attention(params, "ltm.freq.high", high, rng);
  add_linear(params, "ltm.freq.high.mlp", high, high, rng);
  add_conv(params, "ltm.freq.proj", c, c, 1, rng);

  add_conv(params, "ltm.short.pre_a", c, c, 1, rng);
  add_conv(params, "ltm.short.pre_b", c, c, 1, rng);
  add_attention(params, "ltm.short.cross", c, rng);
  add_linear(params, "ltm.short.cross.out", c, c, rng);
  add_conv(params, "ltm.short.post", c, c, 3, rng);

  const int hidden = std::max(1, c / 4);
  add_conv(params, "ltm.fuse.proj", 2 * c, c, 3, rng);
  add_linear(params, "ltm.fuse.ca.fc1", c, hidden, rng);
  add_linear(params, "ltm.fuse.ca.fc2", hidden, c, rng, 0.1);
  add_conv(params, "ltm.fuse.sa", 2, 1, 7, rng, 0.1);

  if (options.zero_gates) {
    for (const char* name : {"ltm.fuse.ca.fc2.weight", "ltm.fuse.ca.fc2.bias",
                             "ltm.fuse.sa.weight", "ltm.fuse.sa.bias"}) {
      zero_param(params, name);
    }
  }
  if (options.zero_attention_outputs) {
    for (const char* name : {"ltm.freq.low.mlp.weight", "ltm.freq.high.mlp.weight",
                             "ltm.freq.proj.weight", "ltm.short.cross.out.weight"}) {
      zero_param(params, name);
    }
  }
}

Var backbone_features(const ParameterStore& params, const Var& frames) {
  if (frames.value().rank() != 4 || frames.dim(1) != 1) {
    throw std::invalid_argument("backbone expects [N,1,H,W]");
  }
  auto stage = [&](const std::string& name, const Var& in, int stride) {
    return nn::silu(apply_map_norm(params, name + ".norm", apply_conv(params, name, in, stride)));
  };
  Var x = stage("backbone.stem", frames, 1);
  x = stage("backbone.stage1", x, 2);
  x = stage("backbone.stage2", x, 2);
  return stage("backbone.stage3", x, 2);
}

Tensor dct_matrix(int n) {
  if (n < 1) throw std::invalid_argument("dct length must be positive");
  Tensor m({n, n});
  for (int k = 0; k < n; ++k) {
    const double alpha = std::sqrt((k == 0 ? 1.0 : 2.0) / n);
    for (int i = 0; i < n; ++i) {
      m.data[k * n + i] = alpha * std::cos(std::numbers::pi * (2 * i + 1) * k / (2.0 * n));
    }
  }
  return m;
}

std::vector<double> dct_1d(const std::vector<double>& signal) {
  const int n = static_cast<int>(signal.size());
  const Tensor m = dct_matrix(n);
  std::vector<double> out(n, 0.0);
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) out[k] += m.data[k * n + i] * signal[i];
  }
  return out;
}

std::vector<double> idct_1d(const std::vector<double>& coefficients) {
  const int n = static_cast<int>(coefficients.size());
  const Tensor m = dct_matrix(n);
  std::vector<double> out(n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) out[i] += m.data[k * n + i] * coefficients[k];
  }
  return out;
}

namespace {

Var channel_transform(const Var& x, bool inverse) {
  const int c = x.dim(1);
  const Tensor m = dct_matrix(c);
  Tensor w({c, c, 1, 1});
  for (int o = 0; o < c; ++o) {
    for (int i = 0; i < c; ++i) w.data[o * c + i] = inverse ? m.data[i * c + o] : m.data[o * c + i];
  }
  return nn::conv2d(x, Var(std::move(w)), Var(), 1, 0);
}

}  // namespace

Var dct_feature(const Var& x) { return channel_transform(x, false); }
Var idct_feature(const Var& x) { return channel_transform(x, true); }

Var long_term_motion(const ParameterStore& params, const std::vector<Var>& features,
                     Var* gate_out) {
  if (features.empty()) throw std::invalid_argument("long_term_motion: no features");
  const Var& key = features.back();
  if (features.size() == 1) return key;
  const std::vector<Var> neighbors(features.begin(), features.end() - 1);
  const Var gate = nn::sigmoid(res_block(params, "ltm.long.gate", nn::concat(neighbors, 1)));
  if (gate_out) *gate_out = gate;
  return res_block(params, "ltm.long.fuse", nn::concat({nn::mul(gate, key), key}, 1));
}

Var freq_enhance(const ParameterStore& params, const Var& earlier, const Var& later,
                 int heads, AttentionTrace* trace) {
  if (earlier.shape() != later.shape()) throw std::invalid_argument("freq_enhance: shape mismatch");
  const int c = earlier.dim(1), h = earlier.dim(2), w = earlier.dim(3);
  const int low = (c + 1) / 2;
  const int hw = h * w;
  std::vector<Var> groups;
  const struct {
    const char* name;
    int start, size;
  } parts[] = {{"ltm.freq.low", 0, low}, {"ltm.freq.high", low, c - low}};
  for (const auto& part : parts) {
    if (part.size == 0) continue;
    const std::string name = part.name;
    const Var tokens = nn::concat({to_tokens(nn::slice(earlier, 1, part.start, part.size)),
                                   to_tokens(nn::slice(later, 1, part.start, part.size))},
                                  1);
    Var weights;
    const Var mixed = attend(params, name, tokens, tokens, heads_for(part.size, heads), &weights);
    if (trace) trace->weights.push_back(weights);
    const Var enhanced = nn::add(tokens, apply_linear(params, name + ".mlp", mixed));
    groups.push_back(from_tokens(nn::slice(enhanced, 1, hw, hw), h, w));
  }
  const Var joined = nn::concat(groups, 1);
  return nn::add(joined, apply_conv(params, "ltm.freq.proj", joined));
}

Var cross_motion(const ParameterStore& params, const Var& earlier_pair, const Var& later_pair,
                 int heads) {
  const int h = later_pair.dim(2), w = later_pair.dim(3);
  const Var context = to_tokens(apply_conv(params, "ltm.short.pre_a", earlier_pair));
  const Var queries = to_tokens(apply_conv(params, "ltm.short.pre_b", later_pair));
  const Var mixed = attend(params, "ltm.short.cross", queries, context,
                           heads_for(queries.dim(2), heads), nullptr);
  const Var out = nn::add(queries, apply_linear(params, "ltm.short.cross.out", mixed));
  return apply_conv(params, "ltm.short.post", from_tokens(out, h, w));
}

Var short_term_motion(const ParameterStore& params, const Var& f0, const Var& f1,
                      const Var& f2, int heads) {
  const Var d0 = dct_feature(f0), d1 = dct_feature(f1), d2 = dct_feature(f2);
  return cross_motion(params, freq_enhance(params, d0, d1, heads),
                      freq_enhance(params, d1, d2, heads), heads);
}

Var fuse_motion(const ParameterStore& params, const Var& long_term, const Var& short_term,
                FusionTrace* trace) {
  if (long_term.shape() != short_term.shape()) throw std::invalid_argument("fuse_motion: shape mismatch");
  const int n = long_term.dim(0), c = long_term.dim(1);
  const Var x = apply_conv(params, "ltm.fuse.proj", nn::concat({long_term, short_term}, 1));
  const Var pooled = nn::reshape(nn::mean_axis(nn::mean_axis(x, 3), 2), {n, c});
  Var ca = nn::silu(apply_linear(params, "ltm.fuse.ca.fc1", pooled));
  ca = nn::sigmoid(apply_linear(params, "ltm.fuse.ca.fc2", ca));
  const Var channel_gate = nn::reshape(ca, {n, c, 1, 1});
  const Var y = nn::mul(x, channel_gate);
  const Var stats = nn::concat({nn::mean_axis(y, 1), nn::max_axis(y, 1)}, 1);
  const Var spatial_gate = nn::sigmoid(apply_conv(params, "ltm.fuse.sa", stats));
  if (trace) *trace = {x, channel_gate, spatial_gate};
  return nn::mul(y, spatial_gate);
}

Var motion_features(const ParameterStore& params, const std::vector<Var>& features, int heads) {
  const std::size_t t = features.size();
  if (t < 3) throw std::invalid_argument("motion_features needs at least three frames");
  const Var long_term = long_term_motion(params, features);
  const Var short_term =
      short_term_motion(params, features[t - 3], features[t - 2], features[t - 1], heads);
  return fuse_motion(params, long_term, short_term);
}

}  // namespace irweak::ltm
