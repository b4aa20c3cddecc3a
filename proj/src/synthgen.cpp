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

#include "irweak/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "irweak/filters.hpp"
#include "irweak/image_io.hpp"

namespace irweak::synth {
namespace fs = std::filesystem;
namespace {

struct Wave {
  double fx, fy, phase, drift, amplitude;
};

struct Track {
  Position start;
  Motion motion;
};

void check_spec(const SceneSpec& s) {
  if (s.height < 1 || s.width < 1 || s.num_frames < 1 || s.num_targets < 0) {
    throw std::invalid_argument("scene spec: bad shape or counts");
  }
  if (!(s.target_sigma > 0.0) || !(s.noise_sigma >= 0.0) ||
      !(s.noise_correlation >= 0.0)) {
    throw std::invalid_argument("scene spec: bad sigma");
  }
}

/// Start positions keep the whole trajectory inside a margin when the
/// motion allows it, and targets at least min_gap apart in every frame.
std::vector<Track> draw_tracks(const SceneSpec& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double margin = std::max(4.0, 3.0 * s.target_sigma);
  const double min_gap = std::max(6.0, 5.0 * s.target_sigma);
  const int last = s.num_frames - 1;

  std::vector<Track> tracks;
  for (int i = 0; i < s.num_targets; ++i) {
    Track best;
    for (int attempt = 0; attempt < 200; ++attempt) {
      Track t;
      if (i < static_cast<int>(s.motion.size())) {
        t.motion = s.motion[i];
      } else {
        t.motion.vx = (2.0 * unit(rng) - 1.0) * s.max_speed;
        t.motion.vy = (2.0 * unit(rng) - 1.0) * s.max_speed;
      }
      if (i < static_cast<int>(s.start.size())) {
        t.start = s.start[i];
        best = t;
        break;
      }
      auto draw_axis = [&](double extent, double v) {
        double lo = margin - std::min(0.0, v * last);
        double hi = extent - margin - std::max(0.0, v * last);
        if (lo > hi) {
          lo = margin;
          hi = extent - margin;
        }
        if (lo > hi) return 0.5 * extent;
        return lo + unit(rng) * (hi - lo);
      };
      t.start.x = draw_axis(s.width, t.motion.vx);
      t.start.y = draw_axis(s.height, t.motion.vy);
      best = t;
      bool ok = true;
      for (const Track& o : tracks) {
        for (int f = 0; f <= last && ok; ++f) {
          const double dx = (t.start.x + t.motion.vx * f) -
                            (o.start.x + o.motion.vx * f);
          const double dy = (t.start.y + t.motion.vy * f) -
                            (o.start.y + o.motion.vy * f);
          ok = std::hypot(dx, dy) >= min_gap;
        }
      }
      if (ok) break;
    }
    tracks.push_back(best);
  }
  return tracks;
}

nlohmann::json spec_json(const SceneSpec& s, const std::string& id) {
  nlohmann::json motion = nlohmann::json::array();
  for (const auto& m : s.motion) motion.push_back({m.vx, m.vy});
  nlohmann::json start = nlohmann::json::array();
  for (const auto& p : s.start) start.push_back({p.x, p.y});
  return {
      {"sequence_id", id},
      {"height", s.height},
      {"width", s.width},
      {"num_frames", s.num_frames},
      {"num_targets", s.num_targets},
      {"target_amplitude", s.target_amplitude},
      {"target_sigma", s.target_sigma},
      {"motion", motion},
      {"max_speed", s.max_speed},
      {"start", start},
      {"background",
       {{"base", s.background.base},
        {"components", s.background.components},
        {"amplitude", s.background.amplitude},
        {"max_cycles", s.background.max_cycles},
        {"drift", s.background.drift}}},
      {"noise_sigma", s.noise_sigma},
      {"noise_correlation", s.noise_correlation},
      {"local_snr", s.noise_sigma > 0.0 ? nlohmann::json(s.local_snr())
                                         : nlohmann::json(nullptr)},
      {"seed", s.seed},
  };
}

}  // namespace

double SceneSpec::local_snr() const {
  if (noise_sigma <= 0.0) return std::numeric_limits<double>::infinity();
  return target_amplitude / noise_sigma;
}

double truth_radius(double sigma) {
  return sigma * std::sqrt(2.0 * std::numbers::ln2);
}

std::optional<Box> truth_box(double cx, double cy, double sigma, int height,
                             int width) {
  const double r = truth_radius(sigma);
  if (cx - r < 0.0 || cy - r < 0.0 || cx + r > width || cy + r > height) {
    return std::nullopt;
  }
  // pixel x covers [x, x+1); include those whose center is within r
  auto span = [r](double c, int extent) -> std::pair<int, int> {
    int lo = static_cast<int>(std::ceil(c - r - 0.5));
    int hi = static_cast<int>(std::floor(c + r - 0.5));
    if (lo > hi) lo = hi = static_cast<int>(std::floor(c));
    lo = std::clamp(lo, 0, extent - 1);
    hi = std::clamp(hi, 0, extent - 1);
    return {lo, hi + 1};
  };
  const auto [x0, x1] = span(cx, width);
  const auto [y0, y1] = span(cy, height);
  return Box(x0, y0, x1, y1);
}

GeneratedSequence generate_sequence(const SceneSpec& spec) {
  check_spec(spec);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Wave> waves;
  for (int i = 0; i < spec.background.components; ++i) {
    Wave w;
    w.fx = (2.0 * unit(rng) - 1.0) * spec.background.max_cycles;
    w.fy = (2.0 * unit(rng) - 1.0) * spec.background.max_cycles;
    w.phase = unit(rng) * 2.0 * std::numbers::pi;
    w.drift = (2.0 * unit(rng) - 1.0) * spec.background.drift;
    w.amplitude = spec.background.amplitude * (0.5 + 0.5 * unit(rng));
    waves.push_back(w);
  }
  const std::vector<Track> tracks = draw_tracks(spec, rng);
  const double noise_gain = gaussian_power_gain(spec.noise_correlation);

  GeneratedSequence out;
  const int h = spec.height, w = spec.width;
  const double sigma = spec.target_sigma;
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  const int reach = static_cast<int>(std::ceil(4.0 * sigma));
  for (int f = 0; f < spec.num_frames; ++f) {
    Grid frame(h, w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double v = spec.background.base;
        for (const Wave& wave : waves) {
          v += wave.amplitude *
               std::sin(2.0 * std::numbers::pi *
                            (wave.fx * (x + 0.5) / w + wave.fy * (y + 0.5) / h) +
                        wave.phase + wave.drift * f);
        }
        frame.at(y, x) = v;
      }
    }
    std::vector<Box> boxes;
    std::vector<Position> centers;
    for (const Track& t : tracks) {
      const double cx = t.start.x + t.motion.vx * f;
      const double cy = t.start.y + t.motion.vy * f;
      const int px = static_cast<int>(std::floor(cx));
      const int py = static_cast<int>(std::floor(cy));
      for (int y = std::max(0, py - reach); y <= std::min(h - 1, py + reach); ++y) {
        for (int x = std::max(0, px - reach); x <= std::min(w - 1, px + reach); ++x) {
          const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
          frame.at(y, x) += spec.target_amplitude *
                            std::exp(-(dx * dx + dy * dy) * inv2s2);
        }
      }
      if (auto box = truth_box(cx, cy, sigma, h, w)) {
        boxes.push_back(*box);
        centers.push_back({cx, cy});
      }
    }
    if (spec.noise_sigma > 0.0) {
      Grid noise(h, w);
      for (double& v : noise.values()) v = normal(rng);
      noise = gaussian_blur(noise, spec.noise_correlation);
      const double scale = spec.noise_sigma / noise_gain;
      for (std::size_t i = 0; i < frame.size(); ++i) frame[i] += scale * noise[i];
    }
    for (double& v : frame.values()) v = std::clamp(v, 0.0, 1.0);
    out.quantities.push_back(static_cast<int>(boxes.size()));
    out.truth[f] = std::move(boxes);
    out.centers.push_back(std::move(centers));
    out.frames.push_back(std::move(frame));
  }
  return out;
}

Sequence to_sequence(const SceneSpec& spec, const GeneratedSequence& gen,
                     const std::string& id) {
  Sequence seq;
  seq.id = id;
  for (int f = 0; f < spec.num_frames; ++f) {
    seq.frame_ids.push_back(f);
    seq.frames.push_back(gen.frames[f]);
    seq.quantities[f] = gen.quantities[f];
  }
  seq.boxes = gen.truth;
  seq.has_boxes = true;
  return seq;
}

std::string emit_dataset(const std::vector<SceneSpec>& specs,
                         const fs::path& root) {
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw std::runtime_error("cannot create " + root.string() + ": " + ec.message());
  nlohmann::json manifest = {{"schema_version", 1},
                             {"sequences", nlohmann::json::array()}};
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const SceneSpec& spec = specs[i];
    char fallback[32];
    std::snprintf(fallback, sizeof fallback, "seq_%03zu", i);
    const std::string id = spec.name.empty() ? fallback : spec.name;
    const GeneratedSequence gen = generate_sequence(spec);
    const fs::path dir = root / id;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
    std::map<int, int> quantities;
    for (int f = 0; f < spec.num_frames; ++f) {
      write_png(dir / frame_filename(f), gen.frames[f], 16);
      quantities[f] = gen.quantities[f];
    }
    write_quantities_csv(dir / "quantities.csv", quantities);
    write_boxes_csv(dir / "boxes.csv", gen.truth);
    manifest["sequences"].push_back(spec_json(spec, id));
  }
  const std::string text = manifest.dump(2) + "\n";
  std::ofstream out(root / "manifest.json");
  if (!out) throw std::runtime_error("cannot write " + (root / "manifest.json").string());
  out << text;
  return text;
}

std::vector<SceneSpec> sample_scene_specs(const SceneFamily& family, int count,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  std::vector<SceneSpec> specs;
  for (int i = 0; i < count; ++i) {
    SceneSpec s;
    s.height = family.height;
    s.width = family.width;
    s.num_frames = family.num_frames;
    s.num_targets = family.min_targets +
                    static_cast<int>(unit(rng) * (family.max_targets - family.min_targets + 1));
    s.num_targets = std::min(s.num_targets, family.max_targets);
    s.target_amplitude = between(family.min_amplitude, family.max_amplitude);
    s.target_sigma = between(family.min_sigma, family.max_sigma);
    s.noise_sigma = s.target_amplitude / between(family.min_snr, family.max_snr);
    s.noise_correlation = family.noise_correlation;
    s.max_speed = family.max_speed;
    s.seed = rng();
    specs.push_back(s);
  }
  return specs;
}

}  // namespace irweak::synth
