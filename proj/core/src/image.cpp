#include "maskprobe/image.hpp"

#include <cmath>
#include <string>

#include "maskprobe/errors.hpp"

namespace maskprobe {

namespace {
void check_dims(int h, int w) {
  if (h < kMinGridSize || w < kMinGridSize)
    throw DimensionError("grid too small: " + std::to_string(h) + "x" +
                         std::to_string(w) + " (minimum " +
                         std::to_string(kMinGridSize) + ")");
}
}  // namespace

Image::Image(int h, int w, int c, double fill)
    : height(h), width(w), channels(c) {
  check_dims(h, w);
  if (c != 1 && c != 3)
    throw DimensionError("image channels must be 1 or 3, got " +
                         std::to_string(c));
  data.assign(static_cast<std::size_t>(h) * w * c, fill);
}

DepthMap::DepthMap(int h, int w, double fill) : height(h), width(w) {
  check_dims(h, w);
  data.assign(static_cast<std::size_t>(h) * w, fill);
}

void DepthMap::validate_ground_truth() const {
  for (double v : data)
    if (!(v > 0.0) || !std::isfinite(v))
      throw DomainError("ground-truth depth must be strictly positive");
}

void DepthMap::validate_finite() const {
  for (double v : data)
    if (!std::isfinite(v))
      throw DomainError("predicted depth must be finite");
}

Mask::Mask(int h, int w, double fill) : height(h), width(w) {
  check_dims(h, w);
  data.assign(static_cast<std::size_t>(h) * w, fill);
}

void Mask::validate() const {
  for (double v : data) {
    if (!(v >= 0.0 && v <= 1.0))
      throw DomainError("mask values must lie in [0,1]");
    if (binary && v != 0.0 && v != 1.0)
      throw DomainError("binary mask values must be 0 or 1");
  }
}

}  // namespace maskprobe
