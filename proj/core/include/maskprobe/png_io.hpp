#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace maskprobe {

// Decoded PNG, value-expanded to 16-bit regardless of file depth.
struct PngImage {
  int height = 0;
  int width = 0;
  int channels = 0;   // 1 (gray) or 3 (rgb)
  int bit_depth = 0;  // 8 or 16 as stored in the file
  std::vector<std::uint16_t> pixels;  // interleaved, row-major
};

// Grayscale writers take values in [0,1] and quantize to the stated depth.
void write_png_gray8(const std::string& path, int height, int width,
                     const std::vector<double>& values);
void write_png_gray16(const std::string& path, int height, int width,
                      const std::vector<double>& values);
// RGB writer takes interleaved [0,1] triples.
void write_png_rgb8(const std::string& path, int height, int width,
                    const std::vector<double>& rgb);

PngImage read_png(const std::string& path);

}  // namespace maskprobe
