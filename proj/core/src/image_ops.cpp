#include "maskprobe/image_ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "maskprobe/errors.hpp"

namespace maskprobe {

Image normalize_zscore(const Image& raw, const ChannelStats& stats) {
  if (static_cast<int>(stats.mean.size()) != raw.channels ||
      static_cast<int>(stats.stddev.size()) != raw.channels)
    throw DimensionError("normalization stats do not match channel count");
  for (double s : stats.stddev)
    if (!(s > 0.0))
      throw ParameterError("invalid statistics: std must be positive");

  Image out = raw;
  out.normalized = true;
  for (int ch = 0; ch < raw.channels; ++ch) {
    const double m = stats.mean[ch];
    const double inv = 1.0 / stats.stddev[ch];
    for (int r = 0; r < raw.height; ++r)
      for (int c = 0; c < raw.width; ++c)
        out.at(r, c, ch) = (raw.at(r, c, ch) - m) * inv;
  }
  return out;
}

Image denormalize_zscore(const Image& normalized, const ChannelStats& stats) {
  if (static_cast<int>(stats.mean.size()) != normalized.channels ||
      static_cast<int>(stats.stddev.size()) != normalized.channels)
    throw DimensionError("normalization stats do not match channel count");
  Image out = normalized;
  out.normalized = false;
  for (int ch = 0; ch < out.channels; ++ch) {
    const double m = stats.mean[ch];
    const double s = stats.stddev[ch];
    for (int r = 0; r < out.height; ++r)
      for (int c = 0; c < out.width; ++c)
        out.at(r, c, ch) = normalized.at(r, c, ch) * s + m;
  }
  return out;
}

ChannelStats compute_channel_stats(const std::vector<Image>& images) {
  if (images.empty()) throw ParameterError("channel stats of empty set");
  const int channels = images.front().channels;
  ChannelStats stats;
  stats.mean.assign(channels, 0.0);
  stats.stddev.assign(channels, 0.0);
  std::vector<double> sq(channels, 0.0);
  std::size_t n = 0;
  for (const Image& img : images) {
    if (img.channels != channels)
      throw DimensionError("mixed channel counts in stats computation");
    for (int ch = 0; ch < channels; ++ch)
      for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) {
          const double v = img.at(r, c, ch);
          stats.mean[ch] += v;
          sq[ch] += v * v;
        }
    n += img.pixel_count();
  }
  for (int ch = 0; ch < channels; ++ch) {
    stats.mean[ch] /= static_cast<double>(n);
    const double var = sq[ch] / static_cast<double>(n) -
                       stats.mean[ch] * stats.mean[ch];
    stats.stddev[ch] = std::sqrt(std::max(var, 0.0));
  }
  return stats;
}

Image apply_mask(const Image& image, const Mask& mask) {
  if (image.height != mask.height || image.width != mask.width)
    throw DimensionError("apply_mask: image " + std::to_string(image.height) +
                         "x" + std::to_string(image.width) + " vs mask " +
                         std::to_string(mask.height) + "x" +
                         std::to_string(mask.width));
  Image out = image;
  for (int ch = 0; ch < image.channels; ++ch)
    for (int r = 0; r < image.height; ++r)
      for (int c = 0; c < image.width; ++c)
        out.at(r, c, ch) = image.at(r, c, ch) * mask.at(r, c);
  return out;
}

Mask binarize(const Mask& mask, double eps) {
  if (!(eps >= 0.0 && eps <= 1.0))
    throw ParameterError("binarize threshold must lie in [0,1], got " +
                         std::to_string(eps));
  Mask out = mask;
  out.binary = true;
  for (double& v : out.data) v = (v >= eps) ? 1.0 : 0.0;
  return out;
}

SparsenessReport sparseness(const Mask& mask) {
  SparsenessReport rep;
  rep.pixel_count = mask.pixel_count();
  std::size_t nonzero = 0;
  for (double v : mask.data)
    if (v > 0.0) ++nonzero;
  rep.fraction_nonzero =
      static_cast<double>(nonzero) / static_cast<double>(rep.pixel_count);
  return rep;
}

std::vector<double> luminance(const Image& image) {
  std::vector<double> lum(image.pixel_count());
  if (image.channels == 1) {
    lum.assign(image.data.begin(), image.data.end());
    return lum;
  }
  for (int r = 0; r < image.height; ++r)
    for (int c = 0; c < image.width; ++c)
      lum[static_cast<std::size_t>(r) * image.width + c] =
          0.299 * image.at(r, c, 0) + 0.587 * image.at(r, c, 1) +
          0.114 * image.at(r, c, 2);
  return lum;
}

Mask edge_map(const Image& image) {
  const int h = image.height, w = image.width;
  const std::vector<double> lum = luminance(image);
  auto at = [&](int r, int c) {
    r = std::clamp(r, 0, h - 1);  // replicate padding
    c = std::clamp(c, 0, w - 1);
    return lum[static_cast<std::size_t>(r) * w + c];
  };
  Mask out(h, w);
  double maxmag = 0.0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double gx = (at(r - 1, c + 1) + 2.0 * at(r, c + 1) + at(r + 1, c + 1)) -
                        (at(r - 1, c - 1) + 2.0 * at(r, c - 1) + at(r + 1, c - 1));
      const double gy = (at(r + 1, c - 1) + 2.0 * at(r + 1, c) + at(r + 1, c + 1)) -
                        (at(r - 1, c - 1) + 2.0 * at(r - 1, c) + at(r - 1, c + 1));
      const double mag = std::sqrt(gx * gx + gy * gy);
      out.at(r, c) = mag;
      maxmag = std::max(maxmag, mag);
    }
  }
  if (maxmag > 0.0) {
    const double inv = 1.0 / maxmag;
    for (double& v : out.data) v *= inv;
  }
  return out;
}

double mask_total_variation(const Mask& mask) {
  const int h = mask.height, w = mask.width;
  double acc = 0.0;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const double v = mask.at(r, c);
      acc += std::abs((c + 1 < w ? mask.at(r, c + 1) : v) - v);
      acc += std::abs((r + 1 < h ? mask.at(r + 1, c) : v) - v);
    }
  return acc / static_cast<double>(mask.pixel_count());
}

}  // namespace maskprobe
