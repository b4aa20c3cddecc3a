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
#include <optional>
#include <string>
#include <vector>

#include "irweak/box.hpp"
#include "irweak/dataset.hpp"

namespace irweak::eval {

inline constexpr int kMetricsSchemaVersion = 1;

struct MatchResult {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  std::vector<bool> true_positive;  // per detection, input order
};

/// Greedy one-to-one matching in descending score order (stable for ties):
/// each detection takes the unmatched truth of highest IoU, if that IoU
/// reaches iou_threshold.
MatchResult match_detections(const std::vector<ScoredBox>& detections,
                             const std::vector<Box>& truths,
                             double iou_threshold = 0.5);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// 0/0 ratios are 0.
Prf precision_recall_f1(int tp, int fp, int fn);
double f1_score(double precision, double recall);

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

/// Detections and truths of one frame.
struct FrameResult {
  std::vector<ScoredBox> detections;
  std::vector<Box> truths;
};

struct ApResult {
  double ap = 0.0;
  std::vector<PrPoint> points;  // one per distinct score cut, descending score
};

/// All-point interpolated AP over every distinct score threshold. Throws
/// std::domain_error when there are no truths at all.
ApResult average_precision(const std::vector<FrameResult>& frames,
                           double iou_threshold = 0.5);
inline ApResult average_precision_50(const std::vector<FrameResult>& frames) {
  return average_precision(frames, 0.5);
}

struct MetricsReport {
  int tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  double ap50 = 0.0;
  double score_threshold = 0.0;
  std::vector<PrPoint> pr_points;  // recall non-decreasing
};

/// Counts (micro-averaged over frames) use detections scoring at least
/// score_threshold; AP uses all detections.
MetricsReport evaluate(const std::vector<FrameResult>& frames, double score_threshold,
                       double iou_threshold = 0.5);

std::string metrics_to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const std::string& text);
void write_metrics(const std::filesystem::path& path, const MetricsReport& report);
MetricsReport read_metrics(const std::filesystem::path& path);

/// recall,precision CSV sorted by recall (then precision descending); an
/// optional PNG rendering of the curve.
void emit_pr_curve(std::vector<PrPoint> points, const std::filesystem::path& csv_path,
                   const std::optional<std::filesystem::path>& png_path = std::nullopt);
std::string pr_curve_csv(std::vector<PrPoint> points);

}  // namespace irweak::eval
