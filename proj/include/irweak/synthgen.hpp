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
#include <optional>
#include <string>
#include <vector>

#include "irweak/dataset.hpp"

namespace irweak::synth {

struct Motion {
  double vx = 0.0;
  double vy = 0.0;
};

struct Position {
  double x = 0.0;
  double y = 0.0;
};

/// Smooth background: base level plus a few low-frequency sinusoids whose
/// phases drift slowly from frame to frame.
struct Background {
  double base = 0.3;
  int components = 3;
  double amplitude = 0.03;      // per component
  double max_cycles = 1.5;      // spatial frequency, cycles per frame side
  double drift = 0.03;          // phase drift, radians per frame
};

struct SceneSpec {
  std::string name;  // sequence id; "seq_<index>" when empty
  int height = 64;
  int width = 64;
  int num_frames = 10;
  int num_targets = 1;
  double target_amplitude = 0.3;
  double target_sigma = 1.4;  // Gaussian point-spread radius, pixels
  /// Per-target velocities; drawn uniformly in [-max_speed, max_speed]
  /// when shorter than num_targets.
  std::vector<Motion> motion;
  double max_speed = 1.0;
  /// Per-target start positions; drawn inside a margin when absent.
  std::vector<Position> start;
  Background background;
  double noise_sigma = 0.02;
  /// Spatial correlation length of the noise (Gaussian smoothing sigma in
  /// pixels, 0 = white). Noise is rescaled to keep noise_sigma per pixel.
  double noise_correlation = 0.0;
  std::uint64_t seed = 0;

  double local_snr() const;
};

struct GeneratedSequence {
  std::vector<Grid> frames;
  BoxTable truth;               // frame index -> boxes
  std::vector<int> quantities;  // K per frame
  std::vector<std::vector<Position>> centers;  // per frame, per visible target
};

/// Deterministic given spec.seed. A target counts toward K only while its
/// truth box lies fully inside the frame.
GeneratedSequence generate_sequence(const SceneSpec& spec);

/// Half-width of the truth box: the half-maximum radius sigma*sqrt(2 ln 2).
double truth_radius(double sigma);

/// Box around the pixels whose centers lie within truth_radius of the
/// target center (per axis). nullopt when it does not fit in the frame.
std::optional<Box> truth_box(double cx, double cy, double sigma, int height,
                             int width);

/// Writes <root>/<id>/<frame>.png, quantities.csv, boxes.csv and
/// <root>/manifest.json. Returns the manifest text.
std::string emit_dataset(const std::vector<SceneSpec>& specs,
                         const std::filesystem::path& root);

Sequence to_sequence(const SceneSpec& spec, const GeneratedSequence& gen,
                     const std::string& id);

/// Ranges used to draw families of scenes for benchmarks.
struct SceneFamily {
  int height = 64;
  int width = 64;
  int num_frames = 10;
  int min_targets = 1;
  int max_targets = 3;
  double min_amplitude = 0.2;
  double max_amplitude = 0.35;
  double min_sigma = 1.2;
  double max_sigma = 1.6;
  double min_snr = 8.0;
  double max_snr = 12.0;
  double max_speed = 1.0;
  double noise_correlation = 0.0;
};

std::vector<SceneSpec> sample_scene_specs(const SceneFamily& family, int count,
                                          std::uint64_t seed);

}  // namespace irweak::synth
