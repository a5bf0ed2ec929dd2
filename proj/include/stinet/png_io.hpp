#pragma once

#include <png.h>

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "stinet/image.hpp"

namespace stinet {

// 8-bit RGB PNG writer; frames are quantized with round-half-even.
inline void write_png(const std::string& path, const Image& img) {
  STINET_CHECK(img.c == 3 || img.c == 1, "write_png: 1 or 3 channels");
  FILE* fp = std::fopen(path.c_str(), "wb");
  STINET_CHECK(fp, "write_png: cannot open ", path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    fail("write_png: libpng failure for ", path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, png_uint_32(img.w), png_uint_32(img.h), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<uint8_t> row(size_t(img.w) * 3);
  const int64_t plane = img.h * img.w;
  for (int64_t y = 0; y < img.h; ++y) {
    for (int64_t x = 0; x < img.w; ++x) {
      for (int64_t ch = 0; ch < 3; ++ch) {
        const int64_t src = img.c == 3 ? ch : 0;
        row[size_t(x) * 3 + size_t(ch)] = quantize8(img.data[src * plane + y * img.w + x]);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

// Reads any libpng-supported PNG as a 3-channel float image in [0,1].
inline Image read_png(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  STINET_CHECK(fp, "read_png: cannot open ", path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    fail("read_png: libpng failure for ", path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  const int64_t w = png_get_image_width(png, info);
  const int64_t h = png_get_image_height(png, info);
  STINET_CHECK(png_get_channels(png, info) == 3, "read_png: expected RGB after expansion");
  std::vector<uint8_t> row(size_t(w) * 3);
  Image img(3, h, w);
  const int64_t plane = h * w;
  for (int64_t y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int64_t x = 0; x < w; ++x)
      for (int64_t ch = 0; ch < 3; ++ch)
        img.data[ch * plane + y * w + x] = dequantize8(row[size_t(x) * 3 + size_t(ch)]);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return img;
}

}  // namespace stinet
