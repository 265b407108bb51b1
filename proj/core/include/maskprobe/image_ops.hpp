#pragma once

#include "maskprobe/image.hpp"

namespace maskprobe {

// Default binarization threshold for turning continuous relevance masks
// into binary ones.
inline constexpr double kDefaultBinarizeEps = 0.025;

// out[p,c] = (raw[p,c] - mean[c]) / std[c]. Throws ParameterError when a
// std component is zero or negative, DimensionError when the stats do
// not cover every channel.
Image normalize_zscore(const Image& raw, const ChannelStats& stats);

// Inverse affine map of normalize_zscore.
Image denormalize_zscore(const Image& normalized, const ChannelStats& stats);

// Per-channel mean/std over a collection of images (population std).
ChannelStats compute_channel_stats(const std::vector<Image>& images);

// out[p,c] = I[p,c] * M[p]; one mask value is shared across channels.
Image apply_mask(const Image& image, const Mask& mask);

// out[p] = 1 if M[p] >= eps else 0. eps must be in [0,1].
Mask binarize(const Mask& mask, double eps = kDefaultBinarizeEps);

// Fraction of entries strictly greater than zero.
SparsenessReport sparseness(const Mask& mask);

// Sobel 3x3 gradient magnitude on luminance (0.299 R + 0.587 G + 0.114 B),
// replicate padding, rescaled to [0,1] by its maximum. A constant image
// yields the all-zeros map.
Mask edge_map(const Image& image);

// Luminance plane of an image (identity for single-channel input).
std::vector<double> luminance(const Image& image);

// Mean absolute forward difference of a mask along x and y; a roughness
// statistic used when comparing mask variants.
double mask_total_variation(const Mask& mask);

}  // namespace maskprobe
