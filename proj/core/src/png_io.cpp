#include "maskprobe/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "maskprobe/errors.hpp"

namespace maskprobe {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint16_t quantize(double v, int levels) {
  v = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint16_t>(std::lround(v * levels));
}

void write_png(const std::string& path, int height, int width, int channels,
               int bit_depth, const std::vector<double>& values) {
  if (static_cast<std::size_t>(height) * width * channels != values.size())
    throw DimensionError("png write: value count does not match dimensions");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open for writing: " + path);

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
    throw IoError("libpng error while writing " + path);
  }
  png_init_io(png, fp.get());
  const int color_type =
      channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, width, height, bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const int levels = bit_depth == 16 ? 65535 : 255;
  if (bit_depth == 16) {
    std::vector<png_byte> row(static_cast<std::size_t>(width) * channels * 2);
    for (int r = 0; r < height; ++r) {
      for (int i = 0; i < width * channels; ++i) {
        const std::uint16_t q =
            quantize(values[static_cast<std::size_t>(r) * width * channels + i],
                     levels);
        row[2 * i] = static_cast<png_byte>(q >> 8);  // network byte order
        row[2 * i + 1] = static_cast<png_byte>(q & 0xff);
      }
      png_write_row(png, row.data());
    }
  } else {
    std::vector<png_byte> row(static_cast<std::size_t>(width) * channels);
    for (int r = 0; r < height; ++r) {
      for (int i = 0; i < width * channels; ++i)
        row[i] = static_cast<png_byte>(quantize(
            values[static_cast<std::size_t>(r) * width * channels + i],
            levels));
      png_write_row(png, row.data());
    }
  }
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png_gray8(const std::string& path, int height, int width,
                     const std::vector<double>& values) {
  write_png(path, height, width, 1, 8, values);
}

void write_png_gray16(const std::string& path, int height, int width,
                      const std::vector<double>& values) {
  write_png(path, height, width, 1, 16, values);
}

void write_png_rgb8(const std::string& path, int height, int width,
                    const std::vector<double>& rgb) {
  write_png(path, height, width, 3, 8, rgb);
}

PngImage read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open: " + path);

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
    throw IoError("libpng error while reading " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  PngImage out;
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.bit_depth = png_get_bit_depth(png, info);
  int color_type = png_get_color_type(png, info);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && out.bit_depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  color_type = png_get_color_type(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  out.channels = (color_type == PNG_COLOR_TYPE_GRAY) ? 1 : 3;

  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<png_byte> raw(static_cast<std::size_t>(out.height) * rowbytes);
  std::vector<png_bytep> rows(out.height);
  for (int r = 0; r < out.height; ++r)
    rows[r] = raw.data() + static_cast<std::size_t>(r) * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  out.pixels.resize(static_cast<std::size_t>(out.height) * out.width *
                    out.channels);
  std::size_t i = 0;
  for (int r = 0; r < out.height; ++r) {
    const png_byte* row = rows[r];
    for (int k = 0; k < out.width * out.channels; ++k) {
      if (out.bit_depth == 16)
        out.pixels[i++] = static_cast<std::uint16_t>((row[2 * k] << 8) |
                                                     row[2 * k + 1]);
      else
        out.pixels[i++] = row[k];
    }
  }
  return out;
}

}  // namespace maskprobe
