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

#include "irweak/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <variant>

namespace irweak {
namespace {

using FieldRef = std::variant<int*, double*, bool*, std::string*,
                              std::uint64_t*>;

struct Entry {
  const char* key;
  std::function<FieldRef(Config&)> field;
};

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      {"T", [](Config& c) -> FieldRef { return &c.T; }},
      {"n", [](Config& c) -> FieldRef { return &c.n; }},
      {"peak_min_distance",
       [](Config& c) -> FieldRef { return &c.peak_min_distance; }},
      {"box_min_side", [](Config& c) -> FieldRef { return &c.box_min_side; }},
      {"box_max_side", [](Config& c) -> FieldRef { return &c.box_max_side; }},
      {"max_area_fraction",
       [](Config& c) -> FieldRef { return &c.max_area_fraction; }},
      {"dedup_iou", [](Config& c) -> FieldRef { return &c.dedup_iou; }},
      {"use_energy", [](Config& c) -> FieldRef { return &c.use_energy; }},
      {"segmenter.backend",
       [](Config& c) -> FieldRef { return &c.segmenter.backend; }},
      {"segmenter.url", [](Config& c) -> FieldRef { return &c.segmenter.url; }},
      {"segmenter.tau_fraction",
       [](Config& c) -> FieldRef { return &c.segmenter.tau_fraction; }},
      {"segmenter.window",
       [](Config& c) -> FieldRef { return &c.segmenter.window; }},
      {"segmenter.smooth_sigma",
       [](Config& c) -> FieldRef { return &c.segmenter.smooth_sigma; }},
      {"segmenter.connectivity",
       [](Config& c) -> FieldRef { return &c.segmenter.connectivity; }},
      {"segmenter.snap_radius",
       [](Config& c) -> FieldRef { return &c.segmenter.snap_radius; }},
      {"eta", [](Config& c) -> FieldRef { return &c.eta; }},
      {"gamma", [](Config& c) -> FieldRef { return &c.gamma; }},
      {"lambda1", [](Config& c) -> FieldRef { return &c.lambda1; }},
      {"lambda2", [](Config& c) -> FieldRef { return &c.lambda2; }},
      {"epsilon", [](Config& c) -> FieldRef { return &c.epsilon; }},
      {"focal_gamma", [](Config& c) -> FieldRef { return &c.focal_gamma; }},
      {"focal_alpha", [](Config& c) -> FieldRef { return &c.focal_alpha; }},
      {"center_radius", [](Config& c) -> FieldRef { return &c.center_radius; }},
      {"use_pcl", [](Config& c) -> FieldRef { return &c.use_pcl; }},
      {"lr", [](Config& c) -> FieldRef { return &c.lr; }},
      {"momentum", [](Config& c) -> FieldRef { return &c.momentum; }},
      {"weight_decay", [](Config& c) -> FieldRef { return &c.weight_decay; }},
      {"batch_size", [](Config& c) -> FieldRef { return &c.batch_size; }},
      {"epochs", [](Config& c) -> FieldRef { return &c.epochs; }},
      {"warmup_steps", [](Config& c) -> FieldRef { return &c.warmup_steps; }},
      {"grad_clip", [](Config& c) -> FieldRef { return &c.grad_clip; }},
      {"seed", [](Config& c) -> FieldRef { return &c.seed; }},
      {"stem_channels", [](Config& c) -> FieldRef { return &c.stem_channels; }},
      {"channels", [](Config& c) -> FieldRef { return &c.channels; }},
      {"embed_dim", [](Config& c) -> FieldRef { return &c.embed_dim; }},
      {"heads", [](Config& c) -> FieldRef { return &c.heads; }},
      {"score_threshold",
       [](Config& c) -> FieldRef { return &c.score_threshold; }},
      {"nms_iou", [](Config& c) -> FieldRef { return &c.nms_iou; }},
      {"iou_threshold", [](Config& c) -> FieldRef { return &c.iou_threshold; }},
  };
  return table;
}

const Entry& find(const std::string& key) {
  for (const auto& e : entries()) {
    if (key == e.key) return e;
  }
  throw std::invalid_argument("unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T out{};
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    throw std::invalid_argument("bad value '" + text + "' for key '" + key +
                                "'");
  }
  return out;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void Config::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  FieldRef ref = find(key).field(*this);
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, std::string>) {
          *p = value;
        } else if constexpr (std::is_same_v<T, bool>) {
          if (value == "1" || value == "true") {
            *p = true;
          } else if (value == "0" || value == "false") {
            *p = false;
          } else {
            throw std::invalid_argument("bad boolean '" + value +
                                        "' for key '" + key + "'");
          }
        } else {
          *p = parse_number<T>(key, value);
        }
      },
      ref);
}

std::string Config::get(const std::string& key) const {
  FieldRef ref = find(key).field(const_cast<Config&>(*this));
  return std::visit(
      [](auto* p) -> std::string {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, std::string>) {
          return *p;
        } else if constexpr (std::is_same_v<T, bool>) {
          return *p ? "true" : "false";
        } else if constexpr (std::is_same_v<T, double>) {
          return format_double(*p);
        } else {
          return std::to_string(*p);
        }
      },
      ref);
}

const std::vector<std::string>& Config::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& e : entries()) out.emplace_back(e.key);
    return out;
  }();
  return names;
}

Config Config::from_file(const std::filesystem::path& path) {
  Config c;
  c.merge_file(path);
  return c;
}

void Config::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path.string() + ":" +
                                  std::to_string(lineno) +
                                  ": expected key=value");
    }
    set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

std::string Config::to_text() const {
  std::string out;
  for (const auto& key : keys()) out += key + "=" + get(key) + "\n";
  return out;
}

std::map<std::string, std::string> Config::to_map() const {
  std::map<std::string, std::string> out;
  for (const auto& key : keys()) out[key] = get(key);
  return out;
}

void Config::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("config: ") + what);
  };
  require(T >= 1, "T must be >= 1");
  require(n >= 1, "n must be >= 1");
  require(epsilon > 0.0, "epsilon must be > 0");
  require(peak_min_distance >= 1, "peak_min_distance must be >= 1");
  require(box_min_side > 0.0 && box_min_side <= box_max_side,
          "box side bounds must satisfy 0 < min <= max");
  require(max_area_fraction > 0.0 && max_area_fraction <= 1.0,
          "max_area_fraction must be in (0, 1]");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(epochs >= 0, "epochs must be >= 0");
  require(grad_clip >= 0.0, "grad_clip must be >= 0");
  require(channels >= 2 && channels % heads == 0,
          "channels must be divisible by heads");
  require(heads >= 1 && ((channels + 1) / 2) % heads == 0 &&
              (channels / 2) % heads == 0,
          "each frequency group must be divisible by heads");
  require(embed_dim >= 1, "embed_dim must be >= 1");
  require(segmenter.backend == "floodfill" || segmenter.backend == "external",
          "segmenter.backend must be floodfill or external");
  require(segmenter.backend != "external" || !segmenter.url.empty(),
          "segmenter.url required for the external backend");
  require(segmenter.connectivity == 4 || segmenter.connectivity == 8,
          "segmenter.connectivity must be 4 or 8");
  require(segmenter.window >= 3 && segmenter.window % 2 == 1,
          "segmenter.window must be odd and >= 3");
}

}  // namespace irweak
