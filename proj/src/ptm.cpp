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

#include "irweak/ptm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "irweak/filters.hpp"
#include "irweak/instrumentation.hpp"

namespace irweak::ptm {
namespace {

void check_shapes(const std::vector<Grid>& frames) {
  for (const Grid& f : frames) {
    if (!f.same_shape(frames.front())) {
      throw std::invalid_argument("frames differ in shape");
    }
  }
}

}  // namespace

Grid LocalContrastGenerator::generate(const Grid& keyframe) {
  const Grid center = box_mean(keyframe, 1);
  const Grid outer = box_mean(keyframe, 4);
  Grid out(keyframe.height(), keyframe.width());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double ring = (81.0 * outer[i] - 9.0 * center[i]) / 72.0;
    out[i] = std::max(0.0, center[i] - ring);
  }
  return out;
}

ActivationMap activation_generate(const Grid& keyframe,
                                  ActivationGenerator& generator) {
  ++call_counters().activation_generator;
  Grid raw = generator.generate(keyframe);
  if (!raw.same_shape(keyframe)) {
    throw std::invalid_argument("activation generator returned a map of wrong shape");
  }
  for (double v : raw.values()) {
    if (!std::isfinite(v)) throw std::runtime_error("activation generator returned non-finite values");
  }
  return {min_max_normalize(raw), MapSource::generator};
}

ActivationMap activation_generate(const Grid& keyframe) {
  LocalContrastGenerator generator;
  return activation_generate(keyframe, generator);
}

Grid high_pass(const Grid& frame) {
  static constexpr Kernel3 kernel{{{-1, -1, -1}, {-1, 8, -1}, {-1, -1, -1}}};
  return filter3x3(frame, kernel);
}

std::vector<Grid> high_pass_filter(const std::vector<Grid>& frames) {
  check_shapes(frames);
  std::vector<Grid> out;
  out.reserve(frames.size());
  for (const Grid& f : frames) out.push_back(high_pass(f));
  return out;
}

Grid laplacian(const Grid& frame) {
  static constexpr Kernel3 kernel{{{0, 1, 0}, {1, -4, 1}, {0, 1, 0}}};
  return filter3x3(frame, kernel);
}

Grid energy_sum(const std::vector<Grid>& filtered) {
  if (filtered.empty()) throw std::invalid_argument("energy: no frames");
  check_shapes(filtered);
  Grid acc(filtered.front().height(), filtered.front().width(), 0.0);
  for (const Grid& f : filtered) {
    const Grid lap = laplacian(f);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += std::abs(lap[i]);
  }
  return acc;
}

ActivationMap energy_accumulate(const std::vector<Grid>& filtered) {
  return {min_max_normalize(energy_sum(filtered)), MapSource::energy};
}

ActivationMap fuse_activation(const ActivationMap& m, const ActivationMap& e) {
  if (!m.values.same_shape(e.values)) {
    throw std::invalid_argument("fuse_activation: shape mismatch");
  }
  ActivationMap out{m.values, MapSource::fused};
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += e.values[i];
  return out;
}

std::vector<PointPrompt> extract_peaks(const Grid& activation, int count,
                                       int min_distance) {
  if (count < 0) throw std::invalid_argument("extract_peaks: negative count");
  if (min_distance < 1) throw std::invalid_argument("extract_peaks: min_distance < 1");
  std::vector<PointPrompt> candidates;
  if (count == 0) return candidates;
  const int h = activation.height(), w = activation.width();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = activation.at(y, x);
      bool strict = true;
      for (int dy = -1; dy <= 1 && strict; ++dy) {
        for (int dx = -1; dx <= 1 && strict; ++dx) {
          if ((dx || dy) && activation.contains(y + dy, x + dx)) {
            strict = v > activation.at(y + dy, x + dx);
          }
        }
      }
      if (strict) candidates.push_back({x, y, 0, v});
    }
  }
  // row-major enumeration already orders ties by (row, column)
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const PointPrompt& a, const PointPrompt& b) { return a.value > b.value; });
  std::vector<PointPrompt> peaks;
  for (const PointPrompt& c : candidates) {
    if (static_cast<int>(peaks.size()) == count) break;
    const bool far = std::all_of(peaks.begin(), peaks.end(), [&](const PointPrompt& p) {
      return std::max(std::abs(p.x - c.x), std::abs(p.y - c.y)) >= min_distance;
    });
    if (!far) continue;
    peaks.push_back(c);
    peaks.back().rank = static_cast<int>(peaks.size()) - 1;
  }
  return peaks;
}

CandidateFilter CandidateFilter::from_config(const Config& config) {
  return {config.box_min_side, config.box_max_side, config.max_area_fraction,
          config.dedup_iou};
}

std::vector<PseudoLabel> segment_and_propose(
    const std::vector<PointPrompt>& prompts, const Grid& keyframe,
    Segmenter& segmenter, const CandidateFilter& filter) {
  std::vector<PseudoLabel> kept;
  const double max_area = filter.max_area_fraction * static_cast<double>(keyframe.size());
  for (const PointPrompt& p : prompts) {
    if (!keyframe.contains(p.y, p.x)) {
      throw std::invalid_argument("segment_and_propose: prompt outside frame");
    }
    const Mask mask = segmenter.segment(keyframe, {p.x, p.y});
    const int area = static_cast<int>(std::count_if(
        mask.values().begin(), mask.values().end(), [](unsigned char v) { return v != 0; }));
    if (area == 0) continue;
    const Box box = mask_to_box(mask);
    if (box.width() < filter.min_side || box.height() < filter.min_side ||
        box.width() > filter.max_side || box.height() > filter.max_side) {
      continue;
    }
    if (area > max_area) continue;
    const bool duplicate = std::any_of(kept.begin(), kept.end(), [&](const PseudoLabel& k) {
      return iou(k.box, box) > filter.dedup_iou;
    });
    if (duplicate) continue;
    kept.push_back({box, 0.0, {p.x, p.y}, area});
  }
  return kept;
}

MiningResult mine(const FrameClip& clip, int K, const Config& config,
                  Segmenter& segmenter, ActivationGenerator& generator) {
  if (K < 0) throw std::invalid_argument("mine: negative quantity prompt");
  MiningResult r;
  const Grid& key = clip.keyframe();
  r.generator_map = activation_generate(key, generator);
  if (config.use_energy) {
    r.energy_map = energy_accumulate(high_pass_filter(clip.frames));
    r.fused_map = fuse_activation(r.generator_map, r.energy_map);
  } else {
    r.energy_map = {Grid(key.height(), key.width(), 0.0), MapSource::energy};
    r.fused_map = {r.generator_map.values, MapSource::fused};
  }
  r.prompts = extract_peaks(r.fused_map.values, config.n * K, config.peak_min_distance);
  r.labels = segment_and_propose(r.prompts, key, segmenter,
                                 CandidateFilter::from_config(config));
  return r;
}

}  // namespace irweak::ptm
