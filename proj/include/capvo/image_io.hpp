#pragma once

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "capvo/errors.hpp"
#include "capvo/tensor.hpp"

// PNG and raw-float image I/O. RGB frames are 8-bit PNG; depth sidecars are
// raw little-endian float32 (.f32) with dimensions implied by the dataset
// manifest. PNG writes use fixed settings so identical pixels give identical
// bytes.

namespace capvo {

namespace detail {

struct PngCloser {
  std::FILE* f = nullptr;
  ~PngCloser() {
    if (f) std::fclose(f);
  }
};

}  // namespace detail

// Quantize [0,1] float channels to 8 bits and write RGB PNG.
template <typename T>
void write_png_rgb8(const std::string& path, const Tensor<T>& image) {
  if (image.rank() != 3 || image.dim(0) != 3)
    throw DimensionError("write_png_rgb8: image must be [3,H,W]");
  const std::size_t h = image.dim(1), w = image.dim(2);

  detail::PngCloser file{std::fopen(path.c_str(), "wb")};
  if (!file.f) throw IoError("cannot open for write: " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png write failed: " + path);
  }
  png_init_io(png, file.f);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w),
               static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<png_byte> row(w * 3);
  const std::size_t hw = h * w;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double v = static_cast<double>(image[c * hw + y * w + x]);
        if (v < 0.0) v = 0.0;
        if (v > 1.0) v = 1.0;
        row[x * 3 + c] = static_cast<png_byte>(v * 255.0 + 0.5);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
}

// Read an 8-bit RGB PNG back to [0,1] floats (values are k/255 exactly).
inline Tensor<float> read_png_rgb8(const std::string& path) {
  detail::PngCloser file{std::fopen(path.c_str(), "rb")};
  if (!file.f) throw IoError("cannot open: " + path);
  png_byte header[8];
  if (std::fread(header, 1, 8, file.f) != 8 || png_sig_cmp(header, 0, 8))
    throw ValidationError("not a png file: " + path);
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png read failed: " + path);
  }
  png_init_io(png, file.f);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const std::size_t w = png_get_image_width(png, info);
  const std::size_t h = png_get_image_height(png, info);
  // normalize any input to 8-bit RGB
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
      png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  if (png_get_rowbytes(png, info) != w * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ValidationError("unexpected png layout: " + path);
  }

  std::vector<png_byte> rows(h * w * 3);
  std::vector<png_bytep> row_ptrs(h);
  for (std::size_t y = 0; y < h; ++y) row_ptrs[y] = rows.data() + y * w * 3;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Tensor<float> out({3, h, w});
  const std::size_t hw = h * w;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        out[c * hw + y * w + x] =
            static_cast<float>(rows[(y * w + x) * 3 + c]) / 255.0f;
  return out;
}

// Min-max scaled 16-bit grayscale PNG, for visualizing depth maps.
template <typename T>
void write_png_gray16(const std::string& path, const Tensor<T>& image) {
  if (image.rank() != 2)
    throw DimensionError("write_png_gray16: image must be [H,W]");
  const std::size_t h = image.dim(0), w = image.dim(1);
  double lo = image[0], hi = image[0];
  for (std::size_t i = 0; i < image.size(); ++i) {
    lo = std::min(lo, static_cast<double>(image[i]));
    hi = std::max(hi, static_cast<double>(image[i]));
  }
  const double scale = (hi > lo) ? 65535.0 / (hi - lo) : 0.0;

  detail::PngCloser file{std::fopen(path.c_str(), "wb")};
  if (!file.f) throw IoError("cannot open for write: " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png write failed: " + path);
  }
  png_init_io(png, file.f);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w),
               static_cast<png_uint_32>(h), 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(w * 2);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double v = (static_cast<double>(image(y, x)) - lo) * scale;
      const auto u = static_cast<std::uint16_t>(v + 0.5);
      row[x * 2] = static_cast<png_byte>(u >> 8);  // png is big-endian
      row[x * 2 + 1] = static_cast<png_byte>(u & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
}

// Raw float32 sidecar, row-major little-endian.
inline void write_f32(const std::string& path, const Tensor<float>& image) {
  if (image.rank() != 2) throw DimensionError("write_f32: image must be [H,W]");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for write: " + path);
  os.write(reinterpret_cast<const char*>(image.data()),
           static_cast<std::streamsize>(image.size() * sizeof(float)));
  if (!os) throw IoError("write failed: " + path);
}

inline Tensor<float> read_f32(const std::string& path, std::size_t h,
                              std::size_t w) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  Tensor<float> out({h, w});
  if (!is.read(reinterpret_cast<char*>(out.data()),
               static_cast<std::streamsize>(out.size() * sizeof(float))))
    throw IoError("short read (expected " + std::to_string(h * w * 4) +
                  " bytes): " + path);
  char extra;
  if (is.read(&extra, 1))
    throw ValidationError("file larger than expected: " + path);
  return out;
}

}  // namespace capvo
