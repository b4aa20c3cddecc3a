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

#include "irweak/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace irweak {
namespace {

struct ReadCursor {
  const std::vector<std::uint8_t>* bytes;
  std::size_t offset;
};

void read_from_memory(png_structp png, png_bytep out, png_size_t count) {
  auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cursor->offset + count > cursor->bytes->size()) {
    png_error(png, "truncated PNG stream");
  }
  std::memcpy(out, cursor->bytes->data() + cursor->offset, count);
  cursor->offset += count;
}

void write_to_memory(png_structp png, png_bytep data, png_size_t count) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + count);
}

void flush_noop(png_structp) {}

void on_error(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  *text = msg;
  png_longjmp(png, 1);
}

void on_warning(png_structp, png_const_charp) {}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::filesystem::path& path,
          const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<std::uint8_t> encode(int height, int width, int bit_depth,
                                 int color_type,
                                 const std::vector<png_bytep>& rows) {
  std::string error;
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error,
                                            on_error, on_warning);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("PNG encode failed: " + error);
  }
  png_set_write_fn(png, &out, write_to_memory, flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace

Grid decode_png(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw std::runtime_error("not a PNG stream");
  }
  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error,
                                           on_error, on_warning);
  if (!png) throw std::runtime_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  ReadCursor cursor{&bytes, 0};
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("PNG decode failed: " + error);
  }
  png_set_read_fn(png, &cursor, read_from_memory);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
      color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int height = static_cast<int>(png_get_image_height(png, info));
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int out_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  pixels.resize(stride * static_cast<std::size_t>(height));
  rows.resize(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) rows[y] = pixels.data() + stride * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Grid grid(height, width);
  for (int y = 0; y < height; ++y) {
    const std::uint8_t* row = rows[y];
    for (int x = 0; x < width; ++x) {
      if (out_depth == 16) {
        const unsigned v = (static_cast<unsigned>(row[2 * x]) << 8) |
                           row[2 * x + 1];
        grid.at(y, x) = v / 65535.0;
      } else {
        grid.at(y, x) = row[x] / 255.0;
      }
    }
  }
  return grid;
}

Grid read_png(const std::filesystem::path& path) {
  try {
    return decode_png(slurp(path));
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_png(const Grid& grid, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) {
    throw std::invalid_argument("bit depth must be 8 or 16");
  }
  const int bytes_per = bit_depth / 8;
  const double scale = bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<std::uint8_t> pixels(grid.size() * bytes_per);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto q = static_cast<unsigned>(
        std::lround(std::clamp(grid[i], 0.0, 1.0) * scale));
    if (bit_depth == 16) {
      pixels[2 * i] = static_cast<std::uint8_t>(q >> 8);
      pixels[2 * i + 1] = static_cast<std::uint8_t>(q & 0xff);
    } else {
      pixels[i] = static_cast<std::uint8_t>(q);
    }
  }
  std::vector<png_bytep> rows(grid.height());
  const std::size_t stride = static_cast<std::size_t>(grid.width()) * bytes_per;
  for (int y = 0; y < grid.height(); ++y) rows[y] = pixels.data() + stride * y;
  return encode(grid.height(), grid.width(), bit_depth, PNG_COLOR_TYPE_GRAY,
                rows);
}

void write_png(const std::filesystem::path& path, const Grid& grid,
               int bit_depth) {
  dump(path, encode_png(grid, bit_depth));
}

void write_png_rgb(const std::filesystem::path& path, int height, int width,
                   const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(height) * width * 3) {
    throw std::invalid_argument("rgb buffer size mismatch");
  }
  std::vector<std::uint8_t> copy = rgb;
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) {
    rows[y] = copy.data() + static_cast<std::size_t>(y) * width * 3;
  }
  dump(path, encode(height, width, 8, PNG_COLOR_TYPE_RGB, rows));
}

}  // namespace irweak
