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

#include <memory>
#include <vector>

#include "irweak/box.hpp"
#include "irweak/clip.hpp"
#include "irweak/config.hpp"
#include "irweak/grid.hpp"
#include "irweak/segmenter.hpp"

namespace irweak::ptm {

enum class MapSource { generator, energy, fused };

struct ActivationMap {
  Grid values;
  MapSource source = MapSource::generator;
};

struct PointPrompt {
  int x = 0;
  int y = 0;
  int rank = 0;
  double value = 0.0;
};

/// Produces the coarse saliency map M of a keyframe. Pretrained generators
/// plug in here; LocalContrastGenerator is the built-in default.
class ActivationGenerator {
 public:
  virtual ~ActivationGenerator() = default;
  virtual Grid generate(const Grid& keyframe) = 0;
};

/// Mean of the 3x3 center minus mean of the surrounding 9x9 ring,
/// rectified at zero.
class LocalContrastGenerator final : public ActivationGenerator {
 public:
  Grid generate(const Grid& keyframe) override;
};

/// M: generator output, min-max normalized. Counts as a generator call.
ActivationMap activation_generate(const Grid& keyframe,
                                  ActivationGenerator& generator);
ActivationMap activation_generate(const Grid& keyframe);

/// 3x3 high-pass kernel (center 8, ring -1) with reflective boundary.
Grid high_pass(const Grid& frame);
std::vector<Grid> high_pass_filter(const std::vector<Grid>& frames);

/// 5-point discrete Laplacian with reflective boundary.
Grid laplacian(const Grid& frame);

/// Sum over frames of |laplacian|, before normalization.
Grid energy_sum(const std::vector<Grid>& filtered);

/// E: energy_sum, min-max normalized.
ActivationMap energy_accumulate(const std::vector<Grid>& filtered);

/// A = M + E, not renormalized. Throws std::invalid_argument on shape
/// mismatch.
ActivationMap fuse_activation(const ActivationMap& m, const ActivationMap& e);

/// Greedy descending-value selection of strict local maxima (8-neighborhood)
/// with pairwise Chebyshev distance >= min_distance. Ties are broken by
/// (row, column).
std::vector<PointPrompt> extract_peaks(const Grid& activation, int count,
                                       int min_distance);

/// Rejection bounds applied to segmented candidates.
struct CandidateFilter {
  double min_side = 1.0;
  double max_side = 32.0;
  double max_area_fraction = 0.005;
  double dedup_iou = 0.7;

  static CandidateFilter from_config(const Config& config);
};

/// Segments each prompt, converts masks to boxes and drops candidates that
/// violate the size bounds, the area fraction, or duplicate an earlier
/// (higher-ranked) box. Scores are left at zero.
std::vector<PseudoLabel> segment_and_propose(
    const std::vector<PointPrompt>& prompts, const Grid& keyframe,
    Segmenter& segmenter, const CandidateFilter& filter);

struct MiningResult {
  ActivationMap generator_map;
  ActivationMap energy_map;
  ActivationMap fused_map;
  std::vector<PointPrompt> prompts;
  std::vector<PseudoLabel> labels;
};

/// Full mining pass for one clip with quantity prompt K: n*K peak prompts on
/// the fused activation, then segmentation and filtering. With
/// config.use_energy == false the generator map is used alone.
MiningResult mine(const FrameClip& clip, int K, const Config& config,
                  Segmenter& segmenter, ActivationGenerator& generator);

}  // namespace irweak::ptm
