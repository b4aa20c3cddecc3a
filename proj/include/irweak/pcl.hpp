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
#include <vector>

#include "irweak/box.hpp"
#include "irweak/nn/autograd.hpp"
#include "irweak/nn/params.hpp"

namespace irweak::pcl {

inline constexpr int kPoolGrid = 4;

/// Embeddings of the m pseudo-label regions of one keyframe.
struct RegionFeatures {
  nn::Var embeddings;           // [m, D]
  std::vector<int> label_refs;  // row -> index into the pseudo-label list
  int count() const { return static_cast<int>(label_refs.size()); }
};

struct SampleSplit {
  std::vector<int> positives;  // rows, descending score
  std::vector<int> negatives;  // remaining rows, ascending index
  std::vector<PseudoLabel> selected;  // boxes of the positives, score order
};

/// Registers the region projector ([C*16] -> D) and the MIL classifier
/// (D -> 1) under "pcl.".
void init_params(nn::ParameterStore& params, int channels, int embed_dim,
                 std::mt19937_64& rng);

/// Area-weighted average of a piecewise-constant feature map over each box,
/// split into a 4x4 grid of bins. features is [N, C, h, w]; image selects
/// the map. Output is [m, C*16], flattened channel-major. Boxes are in pixel
/// units and are divided by stride.
nn::Var roi_pool(const nn::Var& features, int image, const std::vector<Box>& boxes,
                 int stride);

/// roi_pool followed by the learned linear projection.
RegionFeatures crop_and_pool(const std::vector<PseudoLabel>& labels,
                             const nn::Var& features, int image, int stride,
                             const nn::ParameterStore& params);

/// sigmoid(embeddings * w + b), shape [m, 1].
nn::Var mil_score(const nn::Var& embeddings, const nn::Var& weight,
                  const nn::Var& bias);
nn::Var mil_score(const nn::Var& embeddings, const nn::ParameterStore& params);

/// Top-min(K, m) scores are positives; ties prefer the lower index.
SampleSplit split_samples(const std::vector<double>& scores, int K,
                          const std::vector<PseudoLabel>& labels = {});

/// Negated mean pairwise cosine over distinct unordered pairs; 0 for fewer
/// than two rows.
nn::Var loss_pos(const nn::Var& positives);

/// Mean cosine over all positive/negative pairs; 0 if either set is empty.
nn::Var loss_neg(const nn::Var& positives, const nn::Var& negatives);

/// Smooth Top-K MIL loss. scores[b] is the [m_b, 1] (or [m_b]) score vector of
/// frame b. Softmax runs over each frame's scores; frames with K == 0 or
/// m == 0 are skipped.
nn::Var loss_mil(const std::vector<nn::Var>& scores, const std::vector<int>& K,
                 double epsilon);

struct PclTerms {
  nn::Var pos, neg, mil;
  nn::Var total() const;
};

nn::Var pcl_loss(const nn::Var& positives, const nn::Var& negatives,
                 const std::vector<nn::Var>& scores, const std::vector<int>& K,
                 double epsilon);

}  // namespace irweak::pcl
