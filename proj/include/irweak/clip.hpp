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

#include <string>
#include <vector>

#include "irweak/grid.hpp"

namespace irweak {

/// T consecutive grayscale frames in [0, 1]; the keyframe is the one whose
/// targets are mined, supervised and detected (the last one by default).
struct FrameClip {
  std::vector<Grid> frames;
  int keyframe_index = -1;
  std::string sequence_id;
  std::vector<int> frame_ids;

  int length() const { return static_cast<int>(frames.size()); }
  int height() const { return frames.empty() ? 0 : frames.front().height(); }
  int width() const { return frames.empty() ? 0 : frames.front().width(); }
  const Grid& keyframe() const { return frames.at(keyframe_index); }
  int keyframe_id() const { return frame_ids.at(keyframe_index); }
};

/// Builds a clip with the keyframe at the last position and checks the
/// invariants. Throws std::invalid_argument on violation.
FrameClip make_clip(std::vector<Grid> frames, std::string sequence_id = "",
                    std::vector<int> frame_ids = {});

void validate_clip(const FrameClip& clip);

/// Non-negative target count of a keyframe; the only training annotation.
struct QuantityPrompt {
  int K = 0;
};

}  // namespace irweak
