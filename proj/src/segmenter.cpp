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

#include "irweak/segmenter.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <deque>
#include <stdexcept>

#include <httplib.h>
#include <json.hpp>

#include "irweak/filters.hpp"
#include "irweak/image_io.hpp"
#include "irweak/instrumentation.hpp"

namespace irweak {
namespace {

Mask grow(const Grid& values, Point seed, double threshold, int connectivity) {
  const int h = values.height(), w = values.width();
  Mask mask(h, w, 0);
  std::deque<Point> queue{seed};
  mask.at(seed.y, seed.x) = 1;
  while (!queue.empty()) {
    const Point p = queue.front();
    queue.pop_front();
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if ((dx == 0 && dy == 0) || (connectivity == 4 && dx != 0 && dy != 0)) {
          continue;
        }
        const int x = p.x + dx, y = p.y + dy;
        if (!values.contains(y, x) || mask.at(y, x)) continue;
        if (values.at(y, x) < threshold) continue;
        mask.at(y, x) = 1;
        queue.push_back({x, y});
      }
    }
  }
  return mask;
}

double window_range(const Grid& values, Point c, int radius) {
  double lo = values.at(c.y, c.x), hi = lo;
  for (int y = std::max(0, c.y - radius); y <= std::min(values.height() - 1, c.y + radius); ++y) {
    for (int x = std::max(0, c.x - radius); x <= std::min(values.width() - 1, c.x + radius); ++x) {
      lo = std::min(lo, values.at(y, x));
      hi = std::max(hi, values.at(y, x));
    }
  }
  return hi - lo;
}

void write_all(int fd, const void* data, std::size_t size) {
  const char* p = static_cast<const char*>(data);
  while (size > 0) {
    const ssize_t n = ::write(fd, p, size);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw std::runtime_error("segmenter pipe: write failed");
    p += n;
    size -= static_cast<std::size_t>(n);
  }
}

}  // namespace

Mask Segmenter::segment(const Grid& frame, Point prompt) {
  if (!frame.contains(prompt.y, prompt.x)) {
    throw std::invalid_argument("segment: prompt outside frame");
  }
  ++call_counters().segmenter;
  return do_segment(frame, prompt);
}

FloodFillSegmenter::FloodFillSegmenter(SegmenterConfig config)
    : config_(std::move(config)) {
  if (config_.connectivity != 4 && config_.connectivity != 8) {
    throw std::invalid_argument("flood fill: connectivity must be 4 or 8");
  }
  if (config_.window < 1 || config_.snap_radius < 0 || config_.tau_fraction < 0.0) {
    throw std::invalid_argument("flood fill: bad window, snap radius or tau");
  }
}

Mask FloodFillSegmenter::do_segment(const Grid& frame, Point prompt) {
  if (!smoothed_.same_shape(frame) || cached_values_ != frame.values()) {
    cached_values_ = frame.values();
    smoothed_ = gaussian_blur(frame, config_.smooth_sigma);
  }
  const Grid& values = smoothed_;

  Point seed = prompt;
  const int s = config_.snap_radius;
  for (int y = std::max(0, prompt.y - s); y <= std::min(values.height() - 1, prompt.y + s); ++y) {
    for (int x = std::max(0, prompt.x - s); x <= std::min(values.width() - 1, prompt.x + s); ++x) {
      if (values.at(y, x) > values.at(seed.y, seed.x)) seed = {x, y};
    }
  }
  auto fill_from = [&](Point p) {
    const double tau = config_.tau_fraction * window_range(values, p, config_.window / 2);
    return grow(values, p, values.at(p.y, p.x) - tau, config_.connectivity);
  };
  Mask mask = fill_from(seed);
  if (!mask.at(prompt.y, prompt.x)) mask = fill_from(prompt);
  return mask;
}

std::vector<std::uint32_t> rle_encode(const Mask& mask) {
  std::vector<std::uint32_t> counts;
  unsigned char current = 0;
  std::uint32_t run = 0;
  for (unsigned char v : mask.values()) {
    const unsigned char bit = v ? 1 : 0;
    if (bit != current) {
      counts.push_back(run);
      current = bit;
      run = 0;
    }
    ++run;
  }
  counts.push_back(run);
  return counts;
}

Mask rle_decode(int height, int width, const std::vector<std::uint32_t>& counts) {
  Mask mask(height, width, 0);
  std::size_t pos = 0;
  unsigned char bit = 0;
  for (std::uint32_t run : counts) {
    if (run > mask.size() - pos) throw std::invalid_argument("rle: runs exceed mask size");
    std::fill_n(mask.values().begin() + static_cast<std::ptrdiff_t>(pos), run, bit);
    pos += run;
    bit ^= 1;
  }
  if (pos != mask.size()) throw std::invalid_argument("rle: runs do not cover the mask");
  return mask;
}

std::string mask_to_json(const Mask& mask) {
  return nlohmann::json{{"height", mask.height()},
                        {"width", mask.width()},
                        {"counts", rle_encode(mask)}}
      .dump();
}

Mask mask_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    return rle_decode(j.at("height").get<int>(), j.at("width").get<int>(),
                      j.at("counts").get<std::vector<std::uint32_t>>());
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("segmenter response: ") + e.what());
  }
}

ExternalSegmenter::ExternalSegmenter(std::string url) : url_(std::move(url)) {
  if (url_.rfind("pipe:", 0) == 0) {
    const std::string command = url_.substr(5);
    int in_pipe[2], out_pipe[2];
    if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0) {
      throw std::runtime_error("segmenter pipe: cannot create pipes");
    }
    const pid_t pid = ::fork();
    if (pid < 0) throw std::runtime_error("segmenter pipe: fork failed");
    if (pid == 0) {
      ::dup2(in_pipe[0], STDIN_FILENO);
      ::dup2(out_pipe[1], STDOUT_FILENO);
      ::close(in_pipe[0]);
      ::close(in_pipe[1]);
      ::close(out_pipe[0]);
      ::close(out_pipe[1]);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    child_pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    ::fcntl(to_child_, F_SETFD, FD_CLOEXEC);
    ::fcntl(from_child_, F_SETFD, FD_CLOEXEC);
  } else if (url_.rfind("http://", 0) != 0) {
    throw std::invalid_argument("external segmenter: url must start with http:// or pipe:");
  }
}

ExternalSegmenter::~ExternalSegmenter() {
  if (child_pid_ > 0) {
    ::close(to_child_);
    ::close(from_child_);
    int status = 0;
    ::waitpid(child_pid_, &status, 0);
  }
}

Mask ExternalSegmenter::do_segment(const Grid& frame, Point prompt) {
  const std::vector<std::uint8_t> png = encode_png(frame, 16);
  std::lock_guard lock(mutex_);
  Mask mask = child_pid_ > 0 ? via_pipe(png, prompt) : via_http(png, prompt);
  if (!mask.same_shape(Mask(frame.height(), frame.width()))) {
    throw std::runtime_error("external segmenter: mask shape differs from frame");
  }
  return mask;
}

Mask ExternalSegmenter::via_http(const std::vector<std::uint8_t>& png, Point prompt) {
  // http://host[:port][/path]
  const std::string rest = url_.substr(7);
  const std::size_t slash = rest.find('/');
  const std::string host = rest.substr(0, slash);
  const std::string path = slash == std::string::npos ? "/" : rest.substr(slash);
  httplib::Client client("http://" + host);
  const std::string target = path + (path.find('?') == std::string::npos ? "?" : "&") +
                             "x=" + std::to_string(prompt.x) +
                             "&y=" + std::to_string(prompt.y);
  auto res = client.Post(target, reinterpret_cast<const char*>(png.data()), png.size(),
                         "image/png");
  if (!res) {
    throw std::runtime_error("external segmenter: request failed: " +
                             httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw std::runtime_error("external segmenter: HTTP " + std::to_string(res->status));
  }
  return mask_from_json(res->body);
}

Mask ExternalSegmenter::via_pipe(const std::vector<std::uint8_t>& png, Point prompt) {
  const std::string header = std::to_string(prompt.x) + " " + std::to_string(prompt.y) +
                             " " + std::to_string(png.size()) + "\n";
  write_all(to_child_, header.data(), header.size());
  write_all(to_child_, png.data(), png.size());
  std::size_t newline;
  while ((newline = pending_.find('\n')) == std::string::npos) {
    char buf[4096];
    const ssize_t n = ::read(from_child_, buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw std::runtime_error("segmenter pipe: child closed the stream");
    pending_.append(buf, static_cast<std::size_t>(n));
  }
  const std::string line = pending_.substr(0, newline);
  pending_.erase(0, newline + 1);
  return mask_from_json(line);
}

std::unique_ptr<Segmenter> make_segmenter(const SegmenterConfig& config) {
  if (config.backend == "floodfill") return std::make_unique<FloodFillSegmenter>(config);
  if (config.backend == "external") return std::make_unique<ExternalSegmenter>(config.url);
  throw std::invalid_argument("unknown segmenter backend: " + config.backend);
}

}  // namespace irweak
