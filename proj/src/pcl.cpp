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

#include "irweak/pcl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "irweak/instrumentation.hpp"
#include "irweak/nn/ops.hpp"

namespace irweak::pcl {
namespace {

using nn::Tensor;
using nn::Var;

struct CellWeight {
  std::size_t cell;
  double weight;
};

/// Overlap of [lo, hi) with every unit cell of [0, n), as (cell, length).
std::vector<std::pair<int, double>> overlaps(double lo, double hi, int n) {
  std::vector<std::pair<int, double>> out;
  const int first = std::clamp(static_cast<int>(std::floor(lo)), 0, n - 1);
  const int last = std::clamp(static_cast<int>(std::ceil(hi)) - 1, 0, n - 1);
  for (int c = first; c <= last; ++c) {
    const double len = std::min(hi, c + 1.0) - std::max(lo, static_cast<double>(c));
    if (len > 0.0) out.emplace_back(c, len);
  }
  if (out.empty()) out.emplace_back(first, 1.0);
  return out;
}

Var zero() { return Var(Tensor::scalar(0.0)); }

Var as_batch(const Var& m) { return nn::reshape(m, {1, m.dim(0), m.dim(1)}); }

}  // namespace

void init_params(nn::ParameterStore& params, int channels, int embed_dim,
                 std::mt19937_64& rng) {
  const int in = channels * kPoolGrid * kPoolGrid;
  params.add("pcl.proj.weight", nn::kaiming_tensor({in, embed_dim}, in, rng));
  params.add("pcl.proj.bias", Tensor({embed_dim}, 0.0));
  params.add("pcl.mil.weight", nn::kaiming_tensor({embed_dim, 1}, embed_dim, rng, 0.1));
  params.add("pcl.mil.bias", Tensor({1}, 0.0));
}

Var roi_pool(const Var& features, int image, const std::vector<Box>& boxes, int stride) {
  const Tensor& fv = features.value();
  if (fv.rank() != 4) throw std::invalid_argument("roi_pool expects [N,C,h,w]");
  if (image < 0 || image >= fv.shape[0]) throw std::out_of_range("roi_pool image index");
  if (stride < 1) throw std::invalid_argument("roi_pool stride");
  const int c = fv.shape[1], h = fv.shape[2], w = fv.shape[3];
  const int bins = kPoolGrid * kPoolGrid;
  const int m = static_cast<int>(boxes.size());
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  const std::size_t base = static_cast<std::size_t>(image) * c * hw;

  // weights[r * bins + bin] lists the contributing cells
  std::vector<std::vector<CellWeight>> weights(static_cast<std::size_t>(m) * bins);
  for (int r = 0; r < m; ++r) {
    const double x0 = boxes[r].x_l() / stride, x1 = boxes[r].x_r() / stride;
    const double y0 = boxes[r].y_l() / stride, y1 = boxes[r].y_r() / stride;
    const double bw = (x1 - x0) / kPoolGrid, bh = (y1 - y0) / kPoolGrid;
    for (int by = 0; by < kPoolGrid; ++by) {
      const auto ys = overlaps(y0 + by * bh, y0 + (by + 1) * bh, h);
      for (int bx = 0; bx < kPoolGrid; ++bx) {
        const auto xs = overlaps(x0 + bx * bw, x0 + (bx + 1) * bw, w);
        auto& cells = weights[static_cast<std::size_t>(r) * bins + by * kPoolGrid + bx];
        double total = 0.0;
        for (const auto& [cy, ly] : ys) {
          for (const auto& [cx, lx] : xs) {
            cells.push_back({static_cast<std::size_t>(cy) * w + cx, ly * lx});
            total += ly * lx;
          }
        }
        for (auto& cw : cells) cw.weight /= total;
      }
    }
  }

  Tensor out({m, c * bins});
  for (int r = 0; r < m; ++r) {
    for (int bin = 0; bin < bins; ++bin) {
      const auto& cells = weights[static_cast<std::size_t>(r) * bins + bin];
      for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (const auto& cw : cells) acc += cw.weight * fv.data[base + ch * hw + cw.cell];
        out.data[static_cast<std::size_t>(r) * c * bins + ch * bins + bin] = acc;
      }
    }
  }
  return Var::make(std::move(out), {features},
                   [weights = std::move(weights), m, c, bins, hw, base](nn::Node& self) {
                     nn::Node& parent = self.parent(0);
                     if (!parent.requires_grad) return;
                     Tensor& g = parent.ensure_grad();
                     for (int r = 0; r < m; ++r) {
                       for (int bin = 0; bin < bins; ++bin) {
                         const auto& cells = weights[static_cast<std::size_t>(r) * bins + bin];
                         for (int ch = 0; ch < c; ++ch) {
                           const double up =
                               self.grad.data[static_cast<std::size_t>(r) * c * bins + ch * bins + bin];
                           for (const auto& cw : cells) {
                             g.data[base + ch * hw + cw.cell] += cw.weight * up;
                           }
                         }
                       }
                     }
                   });
}

RegionFeatures crop_and_pool(const std::vector<PseudoLabel>& labels, const Var& features,
                             int image, int stride, const nn::ParameterStore& params) {
  const Var& weight = params.get("pcl.proj.weight");
  const Var& bias = params.get("pcl.proj.bias");
  RegionFeatures out;
  std::vector<Box> boxes;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    boxes.push_back(labels[i].box);
    out.label_refs.push_back(static_cast<int>(i));
  }
  const Var pooled = roi_pool(features, image, boxes, stride);
  if (pooled.dim(1) != weight.dim(0)) {
    throw std::invalid_argument("crop_and_pool: projector expects " +
                                std::to_string(weight.dim(0)) + " inputs");
  }
  if (boxes.empty()) {
    out.embeddings = Var(Tensor({0, weight.dim(1)}));
    return out;
  }
  out.embeddings = nn::add(nn::matmul(pooled, weight), nn::reshape(bias, {1, bias.dim(0)}));
  return out;
}

Var mil_score(const Var& embeddings, const Var& weight, const Var& bias) {
  ++call_counters().mil_classifier;
  if (embeddings.dim(0) == 0) return Var(Tensor({0, 1}));
  return nn::sigmoid(nn::add(nn::matmul(embeddings, weight), nn::reshape(bias, {1, 1})));
}

Var mil_score(const Var& embeddings, const nn::ParameterStore& params) {
  return mil_score(embeddings, params.get("pcl.mil.weight"), params.get("pcl.mil.bias"));
}

SampleSplit split_samples(const std::vector<double>& scores, int K,
                          const std::vector<PseudoLabel>& labels) {
  if (K < 0) throw std::invalid_argument("split_samples: negative K");
  if (!labels.empty() && labels.size() != scores.size()) {
    throw std::invalid_argument("split_samples: labels and scores differ in length");
  }
  const int m = static_cast<int>(scores.size());
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  const int q = std::min(K, m);
  SampleSplit split;
  split.positives.assign(order.begin(), order.begin() + q);
  split.negatives.assign(order.begin() + q, order.end());
  std::sort(split.negatives.begin(), split.negatives.end());
  for (int i : split.positives) {
    if (!labels.empty()) {
      split.selected.push_back(labels[i]);
      split.selected.back().score = scores[i];
    }
  }
  return split;
}

Var loss_pos(const Var& positives) {
  const int q = positives.dim(0);
  if (q < 2) return zero();
  const Var unit = as_batch(nn::normalize_rows(positives));
  const Var gram = nn::matmul_nt(unit, unit);
  Tensor upper({1, q, q});
  for (int i = 0; i < q; ++i) {
    for (int j = i + 1; j < q; ++j) upper.data[i * q + j] = 1.0;
  }
  const double pairs = q * (q - 1) / 2.0;
  return nn::scale(nn::sum(nn::mul(gram, Var(std::move(upper)))), -1.0 / pairs);
}

Var loss_neg(const Var& positives, const Var& negatives) {
  if (positives.dim(0) == 0 || negatives.dim(0) == 0) return zero();
  const Var sims = nn::matmul_nt(as_batch(nn::normalize_rows(positives)),
                                 as_batch(nn::normalize_rows(negatives)));
  return nn::mean(sims);
}

Var loss_mil(const std::vector<Var>& scores, const std::vector<int>& K, double epsilon) {
  if (scores.size() != K.size()) throw std::invalid_argument("loss_mil: one K per frame");
  if (!(epsilon > 0.0)) throw std::invalid_argument("loss_mil: epsilon must be positive");
  std::vector<Var> terms;
  for (std::size_t b = 0; b < scores.size(); ++b) {
    const int m = static_cast<int>(scores[b].size());
    if (K[b] <= 0 || m == 0) continue;
    const Var row = nn::reshape(scores[b], {1, m});
    const Var weights = nn::softmax(row);
    std::vector<double> values(scores[b].value().data);
    const SampleSplit split = split_samples(values, K[b]);
    Tensor pick({1, m});
    for (int i : split.positives) pick.data[i] = 1.0;
    const Var logs = nn::log(nn::add_scalar(weights, epsilon));
    const double k = static_cast<double>(split.positives.size());
    terms.push_back(nn::scale(nn::sum(nn::mul(logs, Var(std::move(pick)))), -1.0 / k));
  }
  if (terms.empty()) return zero();
  Var total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = nn::add(total, terms[i]);
  return nn::scale(total, 1.0 / static_cast<double>(terms.size()));
}

Var PclTerms::total() const { return nn::add(nn::add(pos, neg), mil); }

Var pcl_loss(const Var& positives, const Var& negatives, const std::vector<Var>& scores,
             const std::vector<int>& K, double epsilon) {
  return PclTerms{loss_pos(positives), loss_neg(positives, negatives),
                  loss_mil(scores, K, epsilon)}
      .total();
}

}  // namespace irweak::pcl
