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

#include "irweak/clip.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace irweak {

FrameClip make_clip(std::vector<Grid> frames, std::string sequence_id,
                    std::vector<int> frame_ids) {
  FrameClip clip;
  clip.keyframe_index = static_cast<int>(frames.size()) - 1;
  if (frame_ids.empty()) {
    frame_ids.resize(frames.size());
    std::iota(frame_ids.begin(), frame_ids.end(), 0);
  }
  clip.frames = std::move(frames);
  clip.sequence_id = std::move(sequence_id);
  clip.frame_ids = std::move(frame_ids);
  validate_clip(clip);
  return clip;
}

void validate_clip(const FrameClip& clip) {
  if (clip.frames.empty()) throw std::invalid_argument("clip has no frames");
  if (clip.keyframe_index < 0 || clip.keyframe_index >= clip.length()) {
    throw std::invalid_argument("keyframe index out of range");
  }
  if (clip.frame_ids.size() != clip.frames.size()) {
    throw std::invalid_argument("frame_ids length differs from frames");
  }
  const Grid& first = clip.frames.front();
  if (first.empty()) throw std::invalid_argument("empty frame");
  for (const Grid& f : clip.frames) {
    if (!f.same_shape(first)) {
      throw std::invalid_argument("clip frames differ in shape");
    }
    for (double v : f.values()) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument("frame intensity outside [0,1]");
      }
    }
  }
}

}  // namespace irweak
