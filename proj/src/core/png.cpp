// Copyright 2026 The melfix Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "melfix/png.hpp"

#include <png.h>

#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>

#include "melfix/error.hpp"

namespace melfix {
namespace {

// libpng reports failures by longjmp; the callbacks below keep only plain
// data between setjmp and the jump.
struct PngIo {
  const unsigned char* in = nullptr;
  std::size_t in_size = 0;
  std::size_t in_pos = 0;
  std::string* out = nullptr;
  bool alloc_failed = false;
  char message[256] = {};
};

void OnError(png_structp png, png_const_charp msg) {
  auto* io = static_cast<PngIo*>(png_get_error_ptr(png));
  std::snprintf(io->message, sizeof io->message, "%s", msg);
  png_longjmp(png, 1);
}

void OnWarning(png_structp, png_const_charp) {}

void OnRead(png_structp png, png_bytep data, png_size_t length) {
  auto* io = static_cast<PngIo*>(png_get_io_ptr(png));
  if (length > io->in_size - io->in_pos) png_error(png, "truncated PNG data");
  std::memcpy(data, io->in + io->in_pos, length);
  io->in_pos += length;
}

void OnWrite(png_structp png, png_bytep data, png_size_t length) {
  auto* io = static_cast<PngIo*>(png_get_io_ptr(png));
  try {
    io->out->append(reinterpret_cast<const char*>(data), length);
  } catch (...) {
    io->alloc_failed = true;
    png_error(png, "out of memory");
  }
}

void OnFlush(png_structp) {}

std::string EncodeRaw(int width, int height, int depth, int color_type,
                      const std::vector<uint8_t>& rows, std::size_t stride) {
  Require(width > 0 && height > 0, ErrorCode::kInvalidArgument, "PNG dimensions must be positive");
  std::vector<png_bytep> row_ptrs(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    row_ptrs[static_cast<std::size_t>(y)] = const_cast<png_bytep>(rows.data() + y * stride);
  }
  // Everything the callbacks touch lives on the heap, so nothing automatic
  // changes between setjmp and a possible longjmp.
  auto out = std::make_unique<std::string>();
  out->reserve(rows.size() / 2 + 1024);
  auto io_owner = std::make_unique<PngIo>();
  PngIo& io = *io_owner;
  io.out = out.get();

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &io, OnError, OnWarning);
  Require(png != nullptr, ErrorCode::kInternal, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    Fail(ErrorCode::kInternal, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    Fail(ErrorCode::kInternal, std::string("PNG encoding failed: ") + io.message);
  }
  png_set_write_fn(png, &io, OnWrite, OnFlush);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_NONE);
  png_set_compression_level(png, 6);
  png_set_rows(png, info, row_ptrs.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
  return std::move(*out);
}

}  // namespace

std::string EncodePngGray16(const GrayImage& image) {
  Require(image.pixels.size() == static_cast<std::size_t>(image.width) * image.height,
          ErrorCode::kShapeMismatch, "pixel count does not match image dimensions");
  const std::size_t stride = static_cast<std::size_t>(image.width) * 2;
  std::vector<uint8_t> rows(stride * static_cast<std::size_t>(image.height));
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    rows[2 * i] = static_cast<uint8_t>(image.pixels[i] >> 8);
    rows[2 * i + 1] = static_cast<uint8_t>(image.pixels[i] & 0xff);
  }
  return EncodeRaw(image.width, image.height, 16, 0, rows, stride);
}

std::string EncodePngRgb8(const RgbImage& image) {
  Require(image.rgb.size() == static_cast<std::size_t>(image.width) * image.height * 3,
          ErrorCode::kShapeMismatch, "RGB byte count does not match image dimensions");
  return EncodeRaw(image.width, image.height, 8, 2, image.rgb,
                   static_cast<std::size_t>(image.width) * 3);
}

PngRaster DecodePng(const std::string& bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  Require(bytes.size() >= 8 && png_sig_cmp(p, 0, 8) == 0, ErrorCode::kMalformedFile,
          "not a PNG file");
  auto io_owner = std::make_unique<PngIo>();
  PngIo& io = *io_owner;
  io.in = p;
  io.in_size = bytes.size();

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &io, OnError, OnWarning);
  Require(png != nullptr, ErrorCode::kInternal, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    Fail(ErrorCode::kInternal, "png_create_info_struct failed");
  }
  struct State {
    PngRaster raster;
    std::vector<png_bytep> row_ptrs;
  };
  auto state = std::make_unique<State>();
  PngRaster& raster = state->raster;
  std::vector<png_bytep>& row_ptrs = state->row_ptrs;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    Fail(ErrorCode::kMalformedFile, std::string("corrupt PNG: ") + io.message);
  }
  png_set_read_fn(png, &io, OnRead);
  png_read_info(png, info);
  raster.width = static_cast<int>(png_get_image_width(png, info));
  raster.height = static_cast<int>(png_get_image_height(png, info));
  raster.bit_depth = png_get_bit_depth(png, info);
  raster.color_type = png_get_color_type(png, info);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  raster.stride = png_get_rowbytes(png, info);
  raster.rows.resize(raster.stride * static_cast<std::size_t>(raster.height));
  row_ptrs.resize(static_cast<std::size_t>(raster.height));
  for (std::size_t y = 0; y < row_ptrs.size(); ++y) {
    row_ptrs[y] = raster.rows.data() + y * raster.stride;
  }
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return std::move(raster);
}

GrayImage DecodePngGray16(const std::string& bytes) {
  const PngRaster raster = DecodePng(bytes);
  Require(raster.color_type == 0, ErrorCode::kUnsupportedColorType,
          "expected single-channel grayscale PNG, got color type " +
              std::to_string(raster.color_type));
  Require(raster.bit_depth == 16, ErrorCode::kUnsupportedDepth,
          "expected 16-bit grayscale PNG, got depth " + std::to_string(raster.bit_depth));
  GrayImage image;
  image.width = raster.width;
  image.height = raster.height;
  image.pixels.resize(static_cast<std::size_t>(raster.width) * raster.height);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    image.pixels[i] = static_cast<uint16_t>((raster.rows[2 * i] << 8) | raster.rows[2 * i + 1]);
  }
  return image;
}

RgbImage DecodePngRgb8(const std::string& bytes) {
  PngRaster raster = DecodePng(bytes);
  Require(raster.color_type == 2, ErrorCode::kUnsupportedColorType, "expected RGB PNG");
  Require(raster.bit_depth == 8, ErrorCode::kUnsupportedDepth, "expected 8-bit RGB PNG");
  return RgbImage{raster.width, raster.height, std::move(raster.rows)};
}

std::string ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(static_cast<bool>(in), ErrorCode::kFileNotFound, "cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void WriteFileBytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(static_cast<bool>(out), ErrorCode::kIoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  Require(static_cast<bool>(out), ErrorCode::kIoError, "short write to " + path.string());
}

void WritePng(const GrayImage& image, const std::filesystem::path& path) {
  WriteFileBytes(path, EncodePngGray16(image));
}

GrayImage ReadPng(const std::filesystem::path& path) {
  try {
    return DecodePngGray16(ReadFileBytes(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kFileNotFound) throw;
    throw Error(e.code(), std::string(e.what()) + " (" + path.string() + ")");
  }
}

void WritePngRgb(const RgbImage& image, const std::filesystem::path& path) {
  WriteFileBytes(path, EncodePngRgb8(image));
}

RgbImage ReadPngRgb(const std::filesystem::path& path) {
  return DecodePngRgb8(ReadFileBytes(path));
}

}  // namespace melfix
