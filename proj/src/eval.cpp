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

#include "irweak/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "irweak/image_io.hpp"

namespace irweak::eval {
namespace {

std::vector<int> score_order(const std::vector<ScoredBox>& dets) {
  std::vector<int> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return dets[a].score > dets[b].score; });
  return order;
}

void sort_points(std::vector<PrPoint>& points) {
  std::stable_sort(points.begin(), points.end(), [](const PrPoint& a, const PrPoint& b) {
    if (a.recall != b.recall) return a.recall < b.recall;
    return a.precision > b.precision;
  });
}

void draw_line(std::vector<std::uint8_t>& rgb, int w, int h, double x0, double y0, double x1,
               double y1, std::array<std::uint8_t, 3> color) {
  const int steps = static_cast<int>(std::max(std::abs(x1 - x0), std::abs(y1 - y0))) + 1;
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
    const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
    if (x < 0 || x >= w || y < 0 || y >= h) continue;
    for (int c = 0; c < 3; ++c) rgb[(static_cast<std::size_t>(y) * w + x) * 3 + c] = color[c];
  }
}

}  // namespace

MatchResult match_detections(const std::vector<ScoredBox>& detections,
                             const std::vector<Box>& truths, double iou_threshold) {
  MatchResult r;
  r.true_positive.assign(detections.size(), false);
  std::vector<bool> taken(truths.size(), false);
  for (int d : score_order(detections)) {
    int best = -1;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < truths.size(); ++g) {
      if (taken[g]) continue;
      const double v = iou(detections[d].box, truths[g]);
      if (v > best_iou) {
        best_iou = v;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0 && best_iou >= iou_threshold) {
      taken[best] = true;
      r.true_positive[d] = true;
      ++r.tp;
    } else {
      ++r.fp;
    }
  }
  r.fn = static_cast<int>(truths.size()) - r.tp;
  return r;
}

double f1_score(double precision, double recall) {
  const double denom = precision + recall;
  return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

Prf precision_recall_f1(int tp, int fp, int fn) {
  if (tp < 0 || fp < 0 || fn < 0) throw std::invalid_argument("negative count");
  Prf r;
  r.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  r.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  r.f1 = f1_score(r.precision, r.recall);
  return r;
}

ApResult average_precision(const std::vector<FrameResult>& frames, double iou_threshold) {
  struct Entry {
    double score;
    bool tp;
  };
  std::vector<Entry> entries;
  std::size_t total_truths = 0;
  for (const FrameResult& f : frames) {
    total_truths += f.truths.size();
    const MatchResult m = match_detections(f.detections, f.truths, iou_threshold);
    for (std::size_t i = 0; i < f.detections.size(); ++i) {
      entries.push_back({f.detections[i].score, m.true_positive[i]});
    }
  }
  if (total_truths == 0) throw std::domain_error("average precision undefined without ground truth");
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.score > b.score; });
  ApResult r;
  int tp = 0, fp = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    entries[i].tp ? ++tp : ++fp;
    // a cut admits every detection with the same score
    if (i + 1 < entries.size() && entries[i + 1].score == entries[i].score) continue;
    r.points.push_back({static_cast<double>(tp) / total_truths, static_cast<double>(tp) / (tp + fp)});
  }
  // precision envelope, integrated over recall steps
  double envelope = 0.0;
  std::vector<double> interp(r.points.size());
  for (std::size_t i = r.points.size(); i-- > 0;) {
    envelope = std::max(envelope, r.points[i].precision);
    interp[i] = envelope;
  }
  double previous = 0.0;
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    r.ap += (r.points[i].recall - previous) * interp[i];
    previous = r.points[i].recall;
  }
  return r;
}

MetricsReport evaluate(const std::vector<FrameResult>& frames, double score_threshold,
                       double iou_threshold) {
  MetricsReport report;
  report.score_threshold = score_threshold;
  for (const FrameResult& f : frames) {
    std::vector<ScoredBox> kept;
    for (const ScoredBox& d : f.detections) {
      if (d.score >= score_threshold) kept.push_back(d);
    }
    const MatchResult m = match_detections(kept, f.truths, iou_threshold);
    report.tp += m.tp;
    report.fp += m.fp;
    report.fn += m.fn;
  }
  const Prf prf = precision_recall_f1(report.tp, report.fp, report.fn);
  report.precision = prf.precision;
  report.recall = prf.recall;
  report.f1 = prf.f1;
  const ApResult ap = average_precision(frames, iou_threshold);
  report.ap50 = ap.ap;
  report.pr_points = ap.points;
  sort_points(report.pr_points);
  return report;
}

std::string metrics_to_json(const MetricsReport& r) {
  nlohmann::json points = nlohmann::json::array();
  for (const PrPoint& p : r.pr_points) points.push_back({p.recall, p.precision});
  const nlohmann::json j = {
      {"schema_version", kMetricsSchemaVersion},
      {"tp", r.tp},
      {"fp", r.fp},
      {"fn", r.fn},
      {"precision", r.precision},
      {"recall", r.recall},
      {"f1", r.f1},
      {"ap50", r.ap50},
      {"score_threshold", r.score_threshold},
      {"pr_points", points},
  };
  return j.dump(2) + "\n";
}

MetricsReport metrics_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    const int version = j.at("schema_version").get<int>();
    if (version != kMetricsSchemaVersion) {
      throw std::runtime_error("unsupported metrics schema_version " + std::to_string(version));
    }
    MetricsReport r;
    r.tp = j.at("tp").get<int>();
    r.fp = j.at("fp").get<int>();
    r.fn = j.at("fn").get<int>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.f1 = j.at("f1").get<double>();
    r.ap50 = j.at("ap50").get<double>();
    r.score_threshold = j.value("score_threshold", 0.0);
    for (const auto& p : j.at("pr_points")) r.pr_points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed metrics: ") + e.what());
  }
}

void write_metrics(const std::filesystem::path& path, const MetricsReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << metrics_to_json(report);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

MetricsReport read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return metrics_from_json(ss.str());
}

std::string pr_curve_csv(std::vector<PrPoint> points) {
  sort_points(points);
  std::string out = "recall,precision\n";
  char line[64];
  for (const PrPoint& p : points) {
    std::snprintf(line, sizeof line, "%.9g,%.9g\n", p.recall, p.precision);
    out += line;
  }
  return out;
}

void emit_pr_curve(std::vector<PrPoint> points, const std::filesystem::path& csv_path,
                   const std::optional<std::filesystem::path>& png_path) {
  if (points.empty()) throw std::invalid_argument("emit_pr_curve: no points");
  sort_points(points);
  {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + csv_path.string());
    out << pr_curve_csv(points);
    if (!out) throw std::runtime_error("write failed: " + csv_path.string());
  }
  if (!png_path) return;
  constexpr int w = 320, h = 240, margin = 20;
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(w) * h * 3, 255);
  const std::array<std::uint8_t, 3> axis{0, 0, 0}, curve{200, 30, 30};
  auto px = [&](double recall) { return margin + recall * (w - 2 * margin); };
  auto py = [&](double precision) { return h - margin - precision * (h - 2 * margin); };
  draw_line(rgb, w, h, px(0), py(0), px(1), py(0), axis);
  draw_line(rgb, w, h, px(0), py(0), px(0), py(1), axis);
  for (std::size_t i = 1; i < points.size(); ++i) {
    draw_line(rgb, w, h, px(points[i - 1].recall), py(points[i - 1].precision),
              px(points[i].recall), py(points[i].precision), curve);
  }
  write_png_rgb(*png_path, h, w, rgb);
}

}  // namespace irweak::eval
