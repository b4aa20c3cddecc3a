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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "irweak/filters.hpp"
#include "irweak/instrumentation.hpp"
#include "irweak/ptm.hpp"
#include "irweak/segmenter.hpp"
#include "irweak/synthgen.hpp"

using namespace irweak;

namespace {

int refl(int i, int n) {
  while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
  return i;
}

double px(const Grid& g, int y, int x) {
  return g.at(refl(y, g.height()), refl(x, g.width()));
}

Grid contrast_oracle(const Grid& g) {
  Grid out(g.height(), g.width());
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      double center = 0, ring = 0;
      for (int dy = -4; dy <= 4; ++dy) {
        for (int dx = -4; dx <= 4; ++dx) {
          const double v = px(g, y + dy, x + dx);
          if (std::abs(dy) <= 1 && std::abs(dx) <= 1) {
            center += v;
          } else {
            ring += v;
          }
        }
      }
      out.at(y, x) = std::max(0.0, center / 9 - ring / 72);
    }
  }
  return out;
}

Grid conv_oracle(const Grid& g, bool laplace) {
  Grid out(g.height(), g.width());
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      double acc = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          double k;
          if (laplace) {
            k = (dx == 0 && dy == 0) ? -4.0 : (dx == 0 || dy == 0) ? 1.0 : 0.0;
          } else {
            k = (dx == 0 && dy == 0) ? 8.0 : -1.0;
          }
          acc += k * px(g, y + dy, x + dx);
        }
      }
      out.at(y, x) = acc;
    }
  }
  return out;
}

// Enumerate every strict local maximum, sort, then greedy suppress.
std::vector<std::pair<int, int>> peaks_oracle(const Grid& a, int count, int min_distance) {
  struct Cand {
    double v;
    int y, x;
  };
  std::vector<Cand> all;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      bool strict = true;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if ((dy || dx) && a.contains(y + dy, x + dx) && a.at(y + dy, x + dx) >= a.at(y, x)) {
            strict = false;
          }
        }
      }
      if (strict) all.push_back({a.at(y, x), y, x});
    }
  }
  std::sort(all.begin(), all.end(), [](const Cand& p, const Cand& q) {
    if (p.v != q.v) return p.v > q.v;
    return std::pair(p.y, p.x) < std::pair(q.y, q.x);
  });
  std::vector<std::pair<int, int>> out;
  for (const Cand& c : all) {
    if (static_cast<int>(out.size()) == count) break;
    bool ok = true;
    for (const auto& [y, x] : out) {
      ok &= std::max(std::abs(y - c.y), std::abs(x - c.x)) >= min_distance;
    }
    if (ok) out.emplace_back(c.y, c.x);
  }
  return out;
}

Grid random_grid(int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Grid g(h, w);
  for (double& v : g.values()) v = u(rng);
  return g;
}

Grid blob(int h, int w, double cx, double cy, double sigma, double amp = 1.0, double base = 0.2) {
  Grid g(h, w, base);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      g.at(y, x) += amp * std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
    }
  }
  return g;
}

std::pair<int, int> argmax(const Grid& g) {
  const auto it = std::max_element(g.values().begin(), g.values().end());
  const int i = static_cast<int>(it - g.values().begin());
  return {i / g.width(), i % g.width()};
}

double max_abs_diff(const Grid& a, const Grid& b) {
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST_CASE("activation of a constant frame is zero") {
  const auto m = ptm::activation_generate(Grid(32, 32, 0.4));
  for (double v : m.values.values()) CHECK(v == 0.0);
  CHECK(m.source == ptm::MapSource::generator);
}

TEST_CASE("local contrast matches brute force") {
  std::mt19937_64 rng(1);
  const Grid g = random_grid(20, 23, rng);
  ptm::LocalContrastGenerator gen;
  CHECK(max_abs_diff(gen.generate(g), contrast_oracle(g)) < 1e-12);
}

TEST_CASE("activation peaks at a single blob center") {
  const Grid g = blob(48, 48, 20.5, 30.5, 1.5);
  const auto m = ptm::activation_generate(g);
  const auto [y, x] = argmax(m.values);
  CHECK(std::abs(y - 30) <= 1);
  CHECK(std::abs(x - 20) <= 1);
  CHECK(*std::max_element(m.values.values().begin(), m.values.values().end()) == doctest::Approx(1.0));
}

TEST_CASE("two equal blobs give equal maxima") {
  Grid g = blob(48, 48, 12.5, 24.5, 1.3);
  const Grid other = blob(48, 48, 36.5, 24.5, 1.3, 1.0, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += other[i];
  const auto m = ptm::activation_generate(g);
  CHECK(std::abs(m.values.at(24, 12) - m.values.at(24, 36)) < 1e-6);
  const auto peaks = ptm::extract_peaks(m.values, 2, 5);
  REQUIRE(peaks.size() == 2);
  CHECK(std::abs(peaks[0].value - peaks[1].value) < 1e-6);
}

TEST_CASE("high-pass filter") {
  const Grid flat = ptm::high_pass(Grid(9, 9, 0.7));
  for (double v : flat.values()) CHECK(std::abs(v) < 1e-12);
  Grid impulse(9, 9);
  impulse.at(4, 4) = 1.0;
  const Grid h = ptm::high_pass(impulse);
  for (int y = 0; y < 9; ++y) {
    for (int x = 0; x < 9; ++x) {
      const int d = std::max(std::abs(y - 4), std::abs(x - 4));
      CHECK(h.at(y, x) == (d == 0 ? 8.0 : d == 1 ? -1.0 : 0.0));
    }
  }
  std::mt19937_64 rng(2);
  const Grid g = random_grid(13, 17, rng);
  CHECK(max_abs_diff(ptm::high_pass(g), conv_oracle(g, false)) < 1e-12);
  const auto many = ptm::high_pass_filter({g, g});
  CHECK(many.size() == 2);
  CHECK_THROWS_AS(ptm::high_pass_filter({g, impulse}), std::invalid_argument);
}

TEST_CASE("laplacian matches brute force") {
  std::mt19937_64 rng(3);
  const Grid g = random_grid(11, 14, rng);
  CHECK(max_abs_diff(ptm::laplacian(g), conv_oracle(g, true)) < 1e-12);
}

TEST_CASE("energy accumulation") {
  const std::vector<Grid> flat(4, Grid(16, 16, 0.3));
  const auto zero = ptm::energy_accumulate(ptm::high_pass_filter(flat));
  for (double v : zero.values.values()) CHECK(v == 0.0);

  const Grid b = blob(32, 32, 16.0, 16.0, 1.4);
  const Grid hp = ptm::high_pass(b);
  const Grid five = ptm::energy_sum(std::vector<Grid>(5, hp));
  const Grid single = ptm::laplacian(hp);
  double worst = 0;
  for (std::size_t i = 0; i < five.size(); ++i) {
    worst = std::max(worst, std::abs(five[i] - 5.0 * std::abs(single[i])));
  }
  CHECK(worst < 1e-9);

  // frame order does not matter
  std::mt19937_64 rng(4);
  std::vector<Grid> frames{random_grid(16, 16, rng), random_grid(16, 16, rng), random_grid(16, 16, rng)};
  const Grid e1 = ptm::energy_accumulate(frames).values;
  std::swap(frames[0], frames[2]);
  CHECK(max_abs_diff(e1, ptm::energy_accumulate(frames).values) < 1e-12);
  CHECK(ptm::energy_accumulate({frames[0]}).values.height() == 16);
}

TEST_CASE("energy concentrates on a moving target's trajectory") {
  synth::SceneSpec s;
  s.num_targets = 1;
  s.num_frames = 5;
  s.start = {{20.0, 32.0}};
  s.motion = {{2.0, 0.0}};
  s.noise_sigma = 0.0;
  const auto g = synth::generate_sequence(s);
  const Grid e = ptm::energy_accumulate(ptm::high_pass_filter(g.frames)).values;
  double on = 0, off = 0;
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      const bool near = std::abs(y + 0.5 - 32.0) <= 4 && x + 0.5 >= 16 && x + 0.5 <= 32;
      (near ? on : off) = std::max(near ? on : off, e.at(y, x));
    }
  }
  CHECK(on > 0.0);
  CHECK(on > off);
}

TEST_CASE("fusion is an elementwise sum") {
  std::mt19937_64 rng(5);
  const ptm::ActivationMap m{random_grid(8, 8, rng), ptm::MapSource::generator};
  const ptm::ActivationMap e{random_grid(8, 8, rng), ptm::MapSource::energy};
  const ptm::ActivationMap zero{Grid(8, 8), ptm::MapSource::energy};
  CHECK(ptm::fuse_activation(m, zero).values == m.values);
  CHECK(ptm::fuse_activation(zero, e).values == e.values);
  const auto a = ptm::fuse_activation(m, e);
  CHECK(a.source == ptm::MapSource::fused);
  CHECK(a.values[10] == m.values[10] + e.values[10]);
  CHECK_THROWS_AS(ptm::fuse_activation(m, {Grid(8, 9), ptm::MapSource::energy}), std::invalid_argument);
}

TEST_CASE("fused activation peaks inside the truth box on clean scenes") {
  synth::SceneFamily fam;
  fam.max_targets = 1;
  auto specs = synth::sample_scene_specs(fam, 6, 21);
  for (auto& s : specs) {
    s.noise_sigma = 0.0;
    s.num_frames = 5;
    const auto g = synth::generate_sequence(s);
    const auto& truth = g.truth.at(4);
    if (truth.empty()) continue;
    const auto m = ptm::activation_generate(g.frames[4]);
    const auto e = ptm::energy_accumulate(ptm::high_pass_filter(g.frames));
    const auto [y, x] = argmax(ptm::fuse_activation(m, e).values);
    const Box& b = truth.front();
    CHECK(x + 0.5 >= b.x_l());
    CHECK(x + 0.5 < b.x_r());
    CHECK(y + 0.5 >= b.y_l());
    CHECK(y + 0.5 < b.y_r());
  }
}

TEST_CASE("peak extraction examples") {
  Grid one(16, 16);
  one.at(5, 7) = 1.0;
  const auto p = ptm::extract_peaks(one, 3, 5);
  REQUIRE(p.size() == 1);
  CHECK(p[0].x == 7);
  CHECK(p[0].y == 5);
  CHECK(p[0].rank == 0);

  Grid two(16, 16);
  two.at(5, 5) = 1.0;
  two.at(5, 7) = 0.8;
  const auto q = ptm::extract_peaks(two, 3, 5);
  REQUIRE(q.size() == 1);
  CHECK(q[0].x == 5);
  CHECK(ptm::extract_peaks(two, 0, 5).empty());
}

TEST_CASE("peak extraction matches the exhaustive oracle") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    Grid a = random_grid(24, 24, rng);
    if (trial % 2) {
      // coarse quantization creates ties
      for (double& v : a.values()) v = std::round(v * 4) / 4;
    }
    for (int md : {1, 3, 5}) {
      const auto got = ptm::extract_peaks(a, 10, md);
      const auto want = peaks_oracle(a, 10, md);
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].y == want[i].first);
        CHECK(got[i].x == want[i].second);
        CHECK(got[i].rank == static_cast<int>(i));
      }
    }
  }
}

TEST_CASE("peak extraction is invariant under monotone maps") {
  std::mt19937_64 rng(7);
  const Grid a = random_grid(24, 24, rng);
  Grid b = a;
  for (double& v : b.values()) v = std::exp(3 * v) - 2;
  const auto pa = ptm::extract_peaks(a, 8, 4);
  const auto pb = ptm::extract_peaks(b, 8, 4);
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].x == pb[i].x);
    CHECK(pa[i].y == pb[i].y);
  }
}

TEST_CASE("segment and propose") {
  FloodFillSegmenter seg;
  const ptm::CandidateFilter filter;
  synth::SceneSpec s;
  s.num_targets = 1;
  s.start = {{30.5, 20.5}};
  s.motion = {{0.0, 0.0}};
  s.noise_sigma = 0.0;
  s.background.components = 0;
  const auto g = synth::generate_sequence(s);
  const Grid& key = g.frames.back();
  const Box truth = g.truth.at(s.num_frames - 1).front();

  const auto one = ptm::segment_and_propose({{30, 20, 0, 1.0}}, key, seg, filter);
  REQUIRE(one.size() == 1);
  CHECK(iou(one[0].box, truth) >= 0.5);

  // flat background floods past the area bound
  CHECK(ptm::segment_and_propose({{5, 50, 0, 1.0}}, key, seg, filter).empty());

  // two prompts on one blob dedup to the first
  const auto dup = ptm::segment_and_propose({{30, 20, 0, 1.0}, {31, 20, 1, 0.9}}, key, seg, filter);
  REQUIRE(dup.size() == 1);
  CHECK(dup[0].peak == Point{30, 20});
  CHECK(ptm::segment_and_propose({}, key, seg, filter).empty());
}

TEST_CASE("mining respects n K and every survivor passes the filter") {
  synth::SceneFamily fam;
  const auto specs = synth::sample_scene_specs(fam, 6, 31);
  Config cfg;
  FloodFillSegmenter seg;
  ptm::LocalContrastGenerator gen;
  const auto filter = ptm::CandidateFilter::from_config(cfg);
  for (const auto& s : specs) {
    const auto g = synth::generate_sequence(s);
    const std::vector<Grid> window(g.frames.end() - cfg.T, g.frames.end());
    const FrameClip clip = make_clip(window);
    const int K = g.quantities.back();
    call_counters().reset();
    const auto r = ptm::mine(clip, K, cfg, seg, gen);
    CHECK(call_counters().activation_generator.load() == 1);
    CHECK(static_cast<int>(r.prompts.size()) <= cfg.n * K);
    CHECK(static_cast<int>(r.labels.size()) <= cfg.n * K);
    const double frame_area = 64.0 * 64.0;
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
      const Box& b = r.labels[i].box;
      CHECK(b.width() >= filter.min_side);
      CHECK(b.height() >= filter.min_side);
      CHECK(b.width() <= filter.max_side);
      CHECK(b.height() <= filter.max_side);
      CHECK(r.labels[i].mask_area <= filter.max_area_fraction * frame_area);
      for (std::size_t j = 0; j < i; ++j) CHECK(iou(b, r.labels[j].box) <= filter.dedup_iou);
    }
  }
  const FrameClip clip = make_clip(std::vector<Grid>(5, Grid(64, 64, 0.3)));
  CHECK(ptm::mine(clip, 0, cfg, seg, gen).labels.empty());
}

TEST_CASE("disabling energy uses the generator map alone") {
  synth::SceneSpec s;
  s.num_targets = 2;
  s.seed = 5;
  const auto g = synth::generate_sequence(s);
  Config cfg;
  cfg.use_energy = false;
  FloodFillSegmenter seg;
  ptm::LocalContrastGenerator gen;
  const FrameClip clip = make_clip(std::vector<Grid>(g.frames.end() - 5, g.frames.end()));
  const auto r = ptm::mine(clip, 2, cfg, seg, gen);
  CHECK(r.fused_map.values == r.generator_map.values);
}

TEST_CASE("top-3K prompts cover planted targets at moderate SNR") {
  synth::SceneFamily fam;
  fam.min_snr = 5.0;
  fam.max_snr = 8.0;
  const auto specs = synth::sample_scene_specs(fam, 30, 41);
  ptm::LocalContrastGenerator gen;
  int planted = 0, covered = 0;
  for (const auto& s : specs) {
    const auto g = synth::generate_sequence(s);
    const int last = s.num_frames - 1;
    const std::vector<Grid> window(g.frames.end() - 5, g.frames.end());
    const auto a = ptm::fuse_activation(ptm::activation_generate(window.back(), gen),
                                        ptm::energy_accumulate(ptm::high_pass_filter(window)));
    const auto prompts = ptm::extract_peaks(a.values, 3 * g.quantities[last], 5);
    for (const auto& c : g.centers[last]) {
      ++planted;
      for (const auto& p : prompts) {
        if (std::hypot(p.x + 0.5 - c.x, p.y + 0.5 - c.y) <= 3.0) {
          ++covered;
          break;
        }
      }
    }
  }
  REQUIRE(planted > 0);
  CHECK(static_cast<double>(covered) / planted >= 0.9);
}
