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

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace irweak {

struct SegmenterConfig {
  std::string backend = "floodfill";  // floodfill | external
  std::string url;                    // http://host:port/path or pipe:<cmd>
  double tau_fraction = 0.3;
  int window = 15;
  double smooth_sigma = 0.5;
  int connectivity = 8;
  int snap_radius = 1;
};

/// Every tunable of the system. Defaults follow the reference training
/// recipe (T=5, n=3, eta=gamma=1, lambda1=5, lambda2=1, SGD 0.01/0.937/5e-4).
struct Config {
  // window and mining
  int T = 5;
  int n = 3;
  int peak_min_distance = 5;
  double box_min_side = 1.0;
  double box_max_side = 32.0;
  double max_area_fraction = 0.005;
  double dedup_iou = 0.7;
  bool use_energy = true;
  SegmenterConfig segmenter;

  // loss balance
  double eta = 1.0;
  double gamma = 1.0;
  double lambda1 = 5.0;
  double lambda2 = 1.0;
  double epsilon = 1e-6;
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;
  double center_radius = 2.5;
  bool use_pcl = true;

  // optimization
  double lr = 0.01;
  double momentum = 0.937;
  double weight_decay = 5e-4;
  int batch_size = 4;
  int epochs = 20;
  int warmup_steps = 0;
  double grad_clip = 1.0;  // global gradient-norm bound, 0 disables
  std::uint64_t seed = 0;

  // model
  int stem_channels = 16;
  int channels = 64;
  int embed_dim = 128;
  int heads = 4;

  // inference and evaluation
  double score_threshold = 0.3;
  double nms_iou = 0.5;
  double iou_threshold = 0.5;

  /// Sets one key. Throws std::invalid_argument on unknown keys or values
  /// that do not parse.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  /// Flat key=value text; '#' starts a comment.
  static Config from_file(const std::filesystem::path& path);
  void merge_file(const std::filesystem::path& path);
  std::string to_text() const;
  std::map<std::string, std::string> to_map() const;

  /// Throws std::invalid_argument when a value is out of its legal range.
  void validate() const;
};

}  // namespace irweak
