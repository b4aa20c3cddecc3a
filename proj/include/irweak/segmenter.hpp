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
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "irweak/box.hpp"
#include "irweak/config.hpp"
#include "irweak/grid.hpp"

namespace irweak {

/// Point-prompted segmentation. Returns a single connected component that
/// contains the prompt, or an empty mask.
class Segmenter {
 public:
  virtual ~Segmenter() = default;
  Mask segment(const Grid& frame, Point prompt);

 protected:
  virtual Mask do_segment(const Grid& frame, Point prompt) = 0;
};

/// Adaptive flood fill. The frame is lightly smoothed, the seed value is the
/// brightest smoothed pixel adjacent to the prompt, and the region grows over
/// pixels no dimmer than seed - tau, tau = tau_fraction * (max - min) of the
/// window around the seed.
class FloodFillSegmenter final : public Segmenter {
 public:
  explicit FloodFillSegmenter(SegmenterConfig config = {});

 protected:
  Mask do_segment(const Grid& frame, Point prompt) override;

 private:
  SegmenterConfig config_;
  const Grid* cached_source_ = nullptr;
  std::vector<double> cached_values_;
  Grid smoothed_;
};

/// Row-major run lengths, alternating background/foreground and starting
/// with a (possibly empty) background run.
std::vector<std::uint32_t> rle_encode(const Mask& mask);
Mask rle_decode(int height, int width, const std::vector<std::uint32_t>& counts);

/// Wire format of a segmentation response: {"height","width","counts"}.
std::string mask_to_json(const Mask& mask);
Mask mask_from_json(const std::string& text);

/// Talks to an out-of-process segmenter. The request is the frame as PNG
/// bytes plus the prompt point; the response is an RLE mask.
///   http://host:port/path  POST path?x=..&y=.. with an image/png body
///   pipe:<command>         one persistent child; per request the header line
///                          "<x> <y> <nbytes>\n" then the PNG bytes, answered
///                          by one JSON line
/// Requests on one instance are serialized.
class ExternalSegmenter final : public Segmenter {
 public:
  explicit ExternalSegmenter(std::string url);
  ~ExternalSegmenter() override;
  ExternalSegmenter(const ExternalSegmenter&) = delete;
  ExternalSegmenter& operator=(const ExternalSegmenter&) = delete;

 protected:
  Mask do_segment(const Grid& frame, Point prompt) override;

 private:
  Mask via_http(const std::vector<std::uint8_t>& png, Point prompt);
  Mask via_pipe(const std::vector<std::uint8_t>& png, Point prompt);

  std::string url_;
  std::mutex mutex_;
  int child_pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string pending_;
};

std::unique_ptr<Segmenter> make_segmenter(const SegmenterConfig& config);

}  // namespace irweak
