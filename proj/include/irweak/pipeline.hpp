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
#include <functional>
#include <vector>

#include "irweak/clip.hpp"
#include "irweak/config.hpp"
#include "irweak/dataset.hpp"
#include "irweak/eval.hpp"
#include "irweak/losses.hpp"
#include "irweak/ltm.hpp"
#include "irweak/nn/params.hpp"
#include "irweak/ptm.hpp"
#include "irweak/segmenter.hpp"

namespace irweak::pipeline {

struct ModelOptions {
  ltm::InitOptions ltm;
  bool zero_head = false;
};

/// Backbone, motion blocks, detection head, region projector and MIL
/// classifier, initialized deterministically from config.seed.
struct Model {
  Config config;
  ltm::Dims dims;
  nn::ParameterStore params;

  static Model create(const Config& config, const ModelOptions& options = {});
};

struct Forward {
  nn::Var keyframe_features;  // backbone output of the keyframes [B, C, h, w]
  nn::Var motion;             // fused motion features [B, C, h, w]
  losses::HeadOutput head;
};

/// Runs the trunk on clips of equal length and frame size.
Forward forward(const Model& model, const std::vector<const FrameClip*>& clips);

struct Sample {
  FrameClip clip;
  int K = 0;
};

/// Every keyframe with a full window and a quantity prompt.
std::vector<Sample> training_samples(const std::vector<Sequence>& sequences, int T);

struct LossRecord {
  double total = 0.0;
  double cls = 0.0, reg = 0.0, obj = 0.0;
  double pos = 0.0, neg = 0.0, mil = 0.0;
  int pseudo_labels = 0;  // |G| over the batch
  int selected = 0;       // |G_n| over the batch
};

struct TrainState {
  Model model;
  nn::Sgd optimizer{0.01, 0.937, 5e-4};
  int epoch = 0;
  std::int64_t step = 0;
  std::vector<LossRecord> history;

  static TrainState create(const Config& config, const ModelOptions& options = {});
};

/// One SGD update on a batch: mine G, score and split it, supervise the
/// keyframe detections with G_n, then apply eta * L_det + gamma * L_pcl.
LossRecord train_step(const std::vector<Sample>& batch, TrainState& state,
                      Segmenter& segmenter, ptm::ActivationGenerator& generator);

struct EpochSummary {
  int epoch = 0;
  int steps = 0;
  LossRecord mean;
  double seconds = 0.0;
};

/// Shuffles the samples every epoch with a seed derived from config.seed and
/// the epoch number.
void train(const std::vector<Sample>& samples, TrainState& state, Segmenter& segmenter,
           ptm::ActivationGenerator& generator, int epochs,
           const std::function<void(const EpochSummary&)>& on_epoch = {});

/// Trunk and head only. Detections scoring at least score_threshold, after
/// NMS at nms_iou.
std::vector<losses::Detection> infer(const FrameClip& clip, const Model& model,
                                     double score_threshold, double nms_iou);
std::vector<losses::Detection> infer(const FrameClip& clip, const Model& model);
std::vector<std::vector<losses::Detection>> infer_batch(
    const std::vector<const FrameClip*>& clips, const Model& model, double score_threshold,
    double nms_iou);

/// Detections for every frame of a sequence (early frames padded).
DetectionTable predict_sequence(const Sequence& seq, const Model& model,
                                double score_threshold);

/// Pairs predictions with the sequence's truth boxes, frame by frame.
std::vector<eval::FrameResult> frame_results(const DetectionTable& predictions,
                                             const BoxTable& truth);

/// Pseudo-labels of every keyframe, for inspection.
BoxTable mine_sequence(const Sequence& seq, const Config& config, Segmenter& segmenter,
                       ptm::ActivationGenerator& generator);

/// <dir>/manifest.json and <dir>/params.bin; see README for the layout.
void save_checkpoint(const TrainState& state, const std::filesystem::path& dir);
TrainState load_checkpoint(const std::filesystem::path& dir);

}  // namespace irweak::pipeline
