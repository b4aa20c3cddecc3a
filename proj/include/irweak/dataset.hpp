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

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "irweak/box.hpp"
#include "irweak/clip.hpp"

namespace irweak {

using BoxTable = std::map<int, std::vector<Box>>;

/// One sequence directory: <root>/<id>/<frame_id>.png plus quantities.csv
/// (frame_id,K) and, for evaluation only, boxes.csv
/// (frame_id,x_l,y_l,x_r,y_r).
struct Sequence {
  std::string id;
  std::vector<int> frame_ids;
  std::vector<Grid> frames;
  std::map<int, int> quantities;
  BoxTable boxes;
  bool has_boxes = false;

  int quantity(int frame_id) const;
};

std::vector<std::string> list_sequences(const std::filesystem::path& root);
Sequence load_sequence(const std::filesystem::path& dir);
std::vector<Sequence> load_dataset(const std::filesystem::path& root);

/// One clip per frame. Keyframes that lack T-1 predecessors are padded by
/// repeating the first frame when pad_start is set, and skipped otherwise.
std::vector<FrameClip> make_clips(const Sequence& seq, int T, bool pad_start);

std::map<int, int> read_quantities_csv(const std::filesystem::path& path);
void write_quantities_csv(const std::filesystem::path& path,
                          const std::map<int, int>& quantities);

BoxTable read_boxes_csv(const std::filesystem::path& path);
void write_boxes_csv(const std::filesystem::path& path, const BoxTable& boxes);

struct ScoredBox {
  Box box;
  double score = 0.0;
};
using DetectionTable = std::map<int, std::vector<ScoredBox>>;

/// frame_id,x_l,y_l,x_r,y_r,score
DetectionTable read_detections_csv(const std::filesystem::path& path);
void write_detections_csv(const std::filesystem::path& path,
                          const DetectionTable& dets);

std::string frame_filename(int frame_id);

}  // namespace irweak
