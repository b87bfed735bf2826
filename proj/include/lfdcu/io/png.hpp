// Copyright 2026 The lfdcu Authors.
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

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "lfdcu/errors.hpp"

namespace lfdcu::io {

/// Interleaved 8- or 16-bit image with 1 or 3 channels.
struct RawImage {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t channels = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;  // rows * cols * channels
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline void png_error_longjmp(png_structp png, png_const_charp) {
  std::longjmp(png_jmpbuf(png), 1);
}
inline void png_warning_silent(png_structp, png_const_charp) {}

}  // namespace detail

inline void write_png(const std::filesystem::path& path, const RawImage& img) {
  if (img.bit_depth != 8 && img.bit_depth != 16)
    throw FormatError("PNG bit depth must be 8 or 16");
  if (img.channels != 1 && img.channels != 3)
    throw FormatError("PNG channel count must be 1 or 3");
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open " + path.string() + " for writing");
  const std::size_t bytes = img.bit_depth / 8;
  const std::size_t stride = img.cols * img.channels * bytes;
  std::vector<png_byte> buffer(img.rows * stride);
  for (std::size_t i = 0; i < img.samples.size(); ++i) {
    if (bytes == 1) {
      buffer[i] = static_cast<png_byte>(img.samples[i]);
    } else {
      buffer[2 * i] = static_cast<png_byte>(img.samples[i] >> 8);
      buffer[2 * i + 1] = static_cast<png_byte>(img.samples[i] & 0xff);
    }
  }
  std::vector<png_bytep> rows(img.rows);
  for (std::size_t r = 0; r < img.rows; ++r) rows[r] = buffer.data() + r * stride;

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            detail::png_error_longjmp,
                                            detail::png_warning_silent);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed to encode " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.cols),
               static_cast<png_uint_32>(img.rows), img.bit_depth,
               img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_rows(png, info, rows.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(fp.get()) != 0) throw IoError("failed to flush " + path.string());
}

/// Reads gray, gray+alpha, RGB, RGBA or palette PNGs; alpha is dropped and
/// palette/low-bit images expand to 8 bits.
inline RawImage read_png(const std::filesystem::path& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw FormatError(path.string() + " is not a PNG file");

  RawImage img;
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                           detail::png_error_longjmp,
                                           detail::png_warning_silent);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed to decode " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  img.rows = png_get_image_height(png, info);
  img.cols = png_get_image_width(png, info);
  img.bit_depth = png_get_bit_depth(png, info);
  img.channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  buffer.resize(img.rows * stride);
  rows.resize(img.rows);
  for (std::size_t r = 0; r < img.rows; ++r) rows[r] = buffer.data() + r * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (img.channels != 1 && img.channels != 3)
    throw IoError(path.string() + ": unsupported channel count");
  const std::size_t n = img.rows * img.cols * img.channels;
  img.samples.resize(n);
  for (std::size_t r = 0; r < img.rows; ++r) {
    const png_byte* row = buffer.data() + r * stride;
    for (std::size_t k = 0; k < img.cols * img.channels; ++k) {
      img.samples[r * img.cols * img.channels + k] =
          img.bit_depth == 16
              ? static_cast<std::uint16_t>((row[2 * k] << 8) | row[2 * k + 1])
              : row[k];
    }
  }
  return img;
}

}  // namespace lfdcu::io
