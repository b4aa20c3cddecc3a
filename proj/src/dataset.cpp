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

#include "irweak/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "irweak/image_io.hpp"

namespace irweak {
namespace fs = std::filesystem;
namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  return out;
}

bool parse_int(const std::string& s, int& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  while (e > b && (e[-1] == ' ' || e[-1] == '\t' || e[-1] == '\r')) --e;
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e && b != e;
}

double parse_real(const std::string& s, const fs::path& path, int lineno) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                             ": bad number '" + s + "'");
  }
}

/// Reads rows, skipping an optional header line.
template <typename Fn>
void for_each_row(const fs::path& path, std::size_t columns, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv(line);
    int probe = 0;
    if (lineno == 1 && !cells.empty() && !parse_int(cells[0], probe)) {
      continue;  // header
    }
    if (cells.size() != columns) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": expected " + std::to_string(columns) +
                               " columns");
    }
    fn(cells, lineno);
  }
}

void ensure_stream(std::ofstream& out, const fs::path& path) {
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

int Sequence::quantity(int frame_id) const {
  auto it = quantities.find(frame_id);
  if (it == quantities.end()) {
    throw std::runtime_error("sequence " + id + ": no quantity for frame " +
                             std::to_string(frame_id));
  }
  return it->second;
}

std::string frame_filename(int frame_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06d.png", frame_id);
  return buf;
}

std::vector<std::string> list_sequences(const fs::path& root) {
  if (!fs::is_directory(root)) {
    throw std::runtime_error("not a dataset directory: " + root.string());
  }
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) ids.push_back(entry.path().filename().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

Sequence load_sequence(const fs::path& dir) {
  Sequence seq;
  seq.id = dir.filename().string();
  std::vector<std::pair<int, fs::path>> pngs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".png") {
      continue;
    }
    int id = 0;
    if (!parse_int(entry.path().stem().string(), id)) {
      throw std::runtime_error("frame name is not an integer id: " +
                               entry.path().string());
    }
    pngs.emplace_back(id, entry.path());
  }
  std::sort(pngs.begin(), pngs.end());
  for (const auto& [id, path] : pngs) {
    Grid frame = read_png(path);
    if (!seq.frames.empty() && !frame.same_shape(seq.frames.front())) {
      throw std::runtime_error("frame size differs within sequence: " +
                               path.string());
    }
    seq.frame_ids.push_back(id);
    seq.frames.push_back(std::move(frame));
  }
  if (fs::exists(dir / "quantities.csv")) {
    seq.quantities = read_quantities_csv(dir / "quantities.csv");
  }
  if (fs::exists(dir / "boxes.csv")) {
    seq.boxes = read_boxes_csv(dir / "boxes.csv");
    seq.has_boxes = true;
  }
  return seq;
}

std::vector<Sequence> load_dataset(const fs::path& root) {
  std::vector<Sequence> out;
  for (const auto& id : list_sequences(root)) {
    out.push_back(load_sequence(root / id));
  }
  return out;
}

std::vector<FrameClip> make_clips(const Sequence& seq, int T, bool pad_start) {
  if (T < 1) throw std::invalid_argument("T must be >= 1");
  std::vector<FrameClip> clips;
  const int count = static_cast<int>(seq.frames.size());
  for (int key = 0; key < count; ++key) {
    if (!pad_start && key < T - 1) continue;
    FrameClip clip;
    clip.sequence_id = seq.id;
    for (int k = key - T + 1; k <= key; ++k) {
      const int src = std::max(k, 0);
      clip.frames.push_back(seq.frames[src]);
      clip.frame_ids.push_back(seq.frame_ids[src]);
    }
    clip.keyframe_index = T - 1;
    clips.push_back(std::move(clip));
  }
  return clips;
}

std::map<int, int> read_quantities_csv(const fs::path& path) {
  std::map<int, int> out;
  for_each_row(path, 2, [&](const std::vector<std::string>& c, int lineno) {
    int id = 0, k = 0;
    if (!parse_int(c[0], id) || !parse_int(c[1], k) || k < 0) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": bad quantity row");
    }
    out[id] = k;
  });
  return out;
}

void write_quantities_csv(const fs::path& path,
                          const std::map<int, int>& quantities) {
  std::ofstream out(path);
  ensure_stream(out, path);
  out << "frame_id,K\n";
  for (const auto& [id, k] : quantities) out << id << ',' << k << '\n';
  ensure_stream(out, path);
}

BoxTable read_boxes_csv(const fs::path& path) {
  BoxTable out;
  for_each_row(path, 5, [&](const std::vector<std::string>& c, int lineno) {
    int id = 0;
    if (!parse_int(c[0], id)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": bad frame id");
    }
    out[id].emplace_back(parse_real(c[1], path, lineno),
                         parse_real(c[2], path, lineno),
                         parse_real(c[3], path, lineno),
                         parse_real(c[4], path, lineno));
  });
  return out;
}

void write_boxes_csv(const fs::path& path, const BoxTable& boxes) {
  std::ofstream out(path);
  ensure_stream(out, path);
  out << "frame_id,x_l,y_l,x_r,y_r\n";
  for (const auto& [id, list] : boxes) {
    for (const Box& b : list) {
      out << id << ',' << fmt_real(b.x_l()) << ',' << fmt_real(b.y_l()) << ','
          << fmt_real(b.x_r()) << ',' << fmt_real(b.y_r()) << '\n';
    }
  }
  ensure_stream(out, path);
}

DetectionTable read_detections_csv(const fs::path& path) {
  DetectionTable out;
  for_each_row(path, 6, [&](const std::vector<std::string>& c, int lineno) {
    int id = 0;
    if (!parse_int(c[0], id)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": bad frame id");
    }
    out[id].push_back(ScoredBox{
        Box(parse_real(c[1], path, lineno), parse_real(c[2], path, lineno),
            parse_real(c[3], path, lineno), parse_real(c[4], path, lineno)),
        parse_real(c[5], path, lineno)});
  });
  return out;
}

void write_detections_csv(const fs::path& path, const DetectionTable& dets) {
  std::ofstream out(path);
  ensure_stream(out, path);
  out << "frame_id,x_l,y_l,x_r,y_r,score\n";
  char buf[160];
  for (const auto& [id, list] : dets) {
    for (const ScoredBox& d : list) {
      std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", id,
                    d.box.x_l(), d.box.y_l(), d.box.x_r(), d.box.y_r(),
                    d.score);
      out << buf;
    }
  }
  ensure_stream(out, path);
}

}  // namespace irweak
