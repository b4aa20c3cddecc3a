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

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "irweak/eval.hpp"

namespace irweak::testing {

struct OracleMatch {
  int tp = 0, fp = 0, fn = 0;
  std::vector<bool> true_positive;
};

/// Enumerates every one-to-one assignment of detections to truths (IoU at
/// least the threshold, or unassigned) and keeps the one whose IoU vector,
/// read in descending score order, is lexicographically largest.
inline OracleMatch exhaustive_match(const std::vector<ScoredBox>& dets, const std::vector<Box>& truths,
                                    double thr) {
  std::vector<int> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return dets[a].score > dets[b].score; });
  std::vector<int> best, current(dets.size(), -1);
  std::vector<double> best_key, key(dets.size(), 0.0);
  std::vector<bool> used(truths.size(), false);
  auto recurse = [&](auto&& self, std::size_t i) -> void {
    if (i == order.size()) {
      if (best.empty() || key > best_key) {
        best = current;
        best_key = key;
      }
      return;
    }
    const int d = order[i];
    current[d] = -1;
    key[i] = 0.0;
    self(self, i + 1);
    for (std::size_t t = 0; t < truths.size(); ++t) {
      const double v = iou(dets[d].box, truths[t]);
      if (used[t] || v < thr) continue;
      used[t] = true;
      current[d] = static_cast<int>(t);
      key[i] = v;
      self(self, i + 1);
      used[t] = false;
    }
    current[d] = -1;
    key[i] = 0.0;
  };
  recurse(recurse, 0);
  if (best.empty()) best = current;
  OracleMatch m;
  m.true_positive.resize(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    m.true_positive[i] = best[i] >= 0;
    m.true_positive[i] ? ++m.tp : ++m.fp;
  }
  m.fn = static_cast<int>(truths.size()) - m.tp;
  return m;
}

/// AP by enumerating every distinct score cut and re-matching the detections
/// that survive it, then integrating the precision envelope over recall.
inline double brute_force_ap(const std::vector<eval::FrameResult>& frames, double thr) {
  std::vector<double> cuts;
  std::size_t truths = 0;
  for (const auto& f : frames) {
    truths += f.truths.size();
    for (const auto& d : f.detections) cuts.push_back(d.score);
  }
  std::sort(cuts.begin(), cuts.end(), std::greater<>());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::vector<double> recall, precision;
  for (double cut : cuts) {
    int tp = 0, fp = 0;
    for (const auto& f : frames) {
      std::vector<ScoredBox> kept;
      for (const auto& d : f.detections) {
        if (d.score >= cut) kept.push_back(d);
      }
      const auto m = exhaustive_match(kept, f.truths, thr);
      tp += m.tp;
      fp += m.fp;
    }
    recall.push_back(static_cast<double>(tp) / truths);
    precision.push_back(static_cast<double>(tp) / (tp + fp));
  }
  double ap = 0.0, previous = 0.0;
  for (std::size_t i = 0; i < recall.size(); ++i) {
    const double envelope = *std::max_element(precision.begin() + i, precision.end());
    ap += (recall[i] - previous) * envelope;
    previous = recall[i];
  }
  return ap;
}

/// Up to five truths and a handful of jittered or spurious detections with
/// continuous coordinates and scores.
inline eval::FrameResult toy_scene(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  eval::FrameResult f;
  const int n_truth = static_cast<int>(rng() % 6);
  for (int i = 0; i < n_truth; ++i) {
    const double x = u(rng) * 40, y = u(rng) * 40;
    f.truths.emplace_back(x, y, x + 3 + u(rng) * 8, y + 3 + u(rng) * 8);
  }
  const int n_det = static_cast<int>(rng() % 6);
  for (int i = 0; i < n_det; ++i) {
    if (!f.truths.empty() && u(rng) < 0.7) {
      const Box& t = f.truths[rng() % f.truths.size()];
      const double dx = (u(rng) - 0.5) * 4, dy = (u(rng) - 0.5) * 4;
      f.detections.push_back({Box(t.x_l() + dx, t.y_l() + dy, t.x_r() + dx, t.y_r() + dy), u(rng)});
    } else {
      const double x = u(rng) * 40, y = u(rng) * 40;
      f.detections.push_back({Box(x, y, x + 3 + u(rng) * 8, y + 3 + u(rng) * 8), u(rng)});
    }
  }
  return f;
}

}  // namespace irweak::testing
