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
#include <filesystem>
#include <string>
#include <vector>

#include "irweak/grid.hpp"

namespace irweak {

/// Reads an 8- or 16-bit PNG as grayscale and normalizes it to [0, 1].
Grid read_png(const std::filesystem::path& path);
Grid decode_png(const std::vector<std::uint8_t>& bytes);

/// Writes a [0, 1] grid as grayscale PNG with the given bit depth (8 or 16).
void write_png(const std::filesystem::path& path, const Grid& grid,
               int bit_depth = 16);
std::vector<std::uint8_t> encode_png(const Grid& grid, int bit_depth = 16);

/// 8-bit RGB output for plots.
void write_png_rgb(const std::filesystem::path& path, int height, int width,
                   const std::vector<std::uint8_t>& rgb);

}  // namespace irweak
