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

#include <random>
#include <string>
#include <vector>

#include "irweak/nn/autograd.hpp"
#include "irweak/nn/params.hpp"

namespace irweak::ltm {

struct Dims {
  int T = 5;
  int stem_channels = 16;
  int channels = 64;
  int heads = 4;
  int stride = 8;  // fixed by the three stride-2 stages
};

struct InitOptions {
  /// Zero the channel- and spatial-attention gate layers so both gates
  /// start at exactly 0.5.
  bool zero_gates = false;
  /// Zero the output projections of the frequency and cross attention
  /// blocks.
  bool zero_attention_outputs = false;
};

/// Registers backbone and motion-block parameters. Throws if T < 3.
void init_params(nn::ParameterStore& params, const Dims& dims, std::mt19937_64& rng,
                 const InitOptions& options = {});

/// Shared-weight encoder: a stride-1 stem and three stride-2 stages.
/// frames is [N, 1, H, W]; output [N, C, H/8, W/8].
nn::Var backbone_features(const nn::ParameterStore& params, const nn::Var& frames);

/// Orthonormal DCT-II and its inverse.
std::vector<double> dct_1d(const std::vector<double>& signal);
std::vector<double> idct_1d(const std::vector<double>& coefficients);
/// Row k holds basis vector k, so coefficients = matrix * signal.
nn::Tensor dct_matrix(int n);

/// DCT along the channel axis at every location of [N, C, h, w].
nn::Var dct_feature(const nn::Var& x);
nn::Var idct_feature(const nn::Var& x);

/// Gate from the neighbors, then a residual block over the gated keyframe
/// and the keyframe. features holds T maps [N, C, h, w], keyframe last.
/// With a single map it is returned unchanged.
nn::Var long_term_motion(const nn::ParameterStore& params,
                         const std::vector<nn::Var>& features,
                         nn::Var* gate_out = nullptr);

/// Attention weights of one freq_enhance call, per channel group, each
/// [N*heads, L, L].
struct AttentionTrace {
  std::vector<nn::Var> weights;
};

/// Frequency-group attention over the two maps' tokens. Inputs are already
/// DCT-transformed; the output keeps the later map's tokens.
nn::Var freq_enhance(const nn::ParameterStore& params, const nn::Var& earlier,
                     const nn::Var& later, int heads = 4,
                     AttentionTrace* trace = nullptr);

/// Pairwise maps of the last three frames via freq_enhance, then
/// cross-attention with queries from the later pair.
nn::Var short_term_motion(const nn::ParameterStore& params, const nn::Var& f0,
                          const nn::Var& f1, const nn::Var& f2, int heads = 4);

/// The cross-attention stage of short_term_motion on two pairwise maps.
nn::Var cross_motion(const nn::ParameterStore& params, const nn::Var& earlier_pair,
                     const nn::Var& later_pair, int heads = 4);

struct FusionTrace {
  nn::Var projected;     // convolution output before attention
  nn::Var channel_gate;  // [N, C, 1, 1]
  nn::Var spatial_gate;  // [N, 1, h, w]
};

nn::Var fuse_motion(const nn::ParameterStore& params, const nn::Var& long_term,
                    const nn::Var& short_term, FusionTrace* trace = nullptr);

/// features: T maps, keyframe last. Returns F_M.
nn::Var motion_features(const nn::ParameterStore& params,
                        const std::vector<nn::Var>& features, int heads = 4);

// Layer helpers shared with the detection head.
void add_conv(nn::ParameterStore& params, const std::string& name, int cin, int cout,
              int kernel, std::mt19937_64& rng, double gain = 1.0);
nn::Var apply_conv(const nn::ParameterStore& params, const std::string& name,
                   const nn::Var& x, int stride = 1);
void add_linear(nn::ParameterStore& params, const std::string& name, int in, int out,
                std::mt19937_64& rng, double gain = 1.0);
/// x [..., in] -> [..., out]
nn::Var apply_linear(const nn::ParameterStore& params, const std::string& name,
                     const nn::Var& x);

}  // namespace irweak::ltm
