#pragma once

#include <string>

#include "maskprobe/image.hpp"

namespace maskprobe {

// Exact-round-trip serialization: a raw little-endian float32 blob at
// `path` plus a JSON sidecar at `path + ".json"` of the form
//   {"shape": [H,W,C], "dtype": "f32", "kind": "image|depth|mask"}.
// Blob layout is row-major over [H,W,C] (interleaved channels).
void save_image_blob(const std::string& path, const Image& image);
void save_depth_blob(const std::string& path, const DepthMap& depth);
void save_mask_blob(const std::string& path, const Mask& mask);

Image load_image_blob(const std::string& path);
DepthMap load_depth_blob(const std::string& path);
Mask load_mask_blob(const std::string& path);

}  // namespace maskprobe
