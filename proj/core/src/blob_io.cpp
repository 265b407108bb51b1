#include "maskprobe/blob_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <vector>

#include "maskprobe/errors.hpp"

namespace maskprobe {

namespace {

static_assert(std::endian::native == std::endian::little,
              "blob serialization assumes a little-endian host");

void write_blob(const std::string& path, const std::vector<float>& buf,
                int h, int w, int c, const char* kind,
                const char* flag_key = nullptr, bool flag_value = false) {
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write blob: " + path);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!out) throw IoError("short write: " + path);
  }
  nlohmann::json side;
  side["shape"] = {h, w, c};
  side["dtype"] = "f32";
  side["kind"] = kind;
  if (flag_key) side[flag_key] = flag_value;
  std::ofstream js(path + ".json", std::ios::trunc);
  if (!js) throw IoError("cannot write sidecar: " + path + ".json");
  js << side.dump() << "\n";
}

struct BlobData {
  std::vector<float> values;
  int h = 0, w = 0, c = 0;
  std::string kind;
  bool flag = false;  // "normalized" for images, "binary" for masks
};

BlobData read_blob(const std::string& path, const char* expected_kind) {
  std::ifstream js(path + ".json");
  if (!js) throw IoError("missing sidecar: " + path + ".json");
  nlohmann::json side;
  try {
    js >> side;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad sidecar " + path + ".json: " + e.what());
  }
  BlobData blob;
  if (!side.contains("shape") || side["shape"].size() != 3)
    throw IoError("sidecar shape must be [H,W,C]: " + path);
  blob.h = side["shape"][0];
  blob.w = side["shape"][1];
  blob.c = side["shape"][2];
  blob.kind = side.value("kind", "");
  blob.flag = side.value("normalized", false) || side.value("binary", false);
  if (side.value("dtype", "") != "f32")
    throw IoError("unsupported blob dtype in " + path);
  if (blob.kind != expected_kind)
    throw IoError("blob kind is '" + blob.kind + "', expected '" +
                  expected_kind + "': " + path);

  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open blob: " + path);
  const std::size_t n =
      static_cast<std::size_t>(blob.h) * blob.w * blob.c;
  blob.values.resize(n);
  in.read(reinterpret_cast<char*>(blob.values.data()),
          static_cast<std::streamsize>(n * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != n * sizeof(float))
    throw IoError("blob truncated: " + path);
  return blob;
}

}  // namespace

void save_image_blob(const std::string& path, const Image& image) {
  std::vector<float> buf(image.data.size());
  std::size_t i = 0;
  for (int r = 0; r < image.height; ++r)
    for (int c = 0; c < image.width; ++c)
      for (int ch = 0; ch < image.channels; ++ch)
        buf[i++] = static_cast<float>(image.at(r, c, ch));
  write_blob(path, buf, image.height, image.width, image.channels, "image",
             "normalized", image.normalized);
}

void save_depth_blob(const std::string& path, const DepthMap& depth) {
  std::vector<float> buf(depth.data.begin(), depth.data.end());
  write_blob(path, buf, depth.height, depth.width, 1, "depth");
}

void save_mask_blob(const std::string& path, const Mask& mask) {
  std::vector<float> buf(mask.data.begin(), mask.data.end());
  write_blob(path, buf, mask.height, mask.width, 1, "mask", "binary",
             mask.binary);
}

Image load_image_blob(const std::string& path) {
  BlobData blob = read_blob(path, "image");
  Image img(blob.h, blob.w, blob.c);
  img.normalized = blob.flag;
  std::size_t i = 0;
  for (int r = 0; r < blob.h; ++r)
    for (int c = 0; c < blob.w; ++c)
      for (int ch = 0; ch < blob.c; ++ch)
        img.at(r, c, ch) = blob.values[i++];
  return img;
}

DepthMap load_depth_blob(const std::string& path) {
  BlobData blob = read_blob(path, "depth");
  if (blob.c != 1) throw IoError("depth blob must have one channel: " + path);
  DepthMap d(blob.h, blob.w);
  d.data.assign(blob.values.begin(), blob.values.end());
  return d;
}

Mask load_mask_blob(const std::string& path) {
  BlobData blob = read_blob(path, "mask");
  if (blob.c != 1) throw IoError("mask blob must have one channel: " + path);
  Mask m(blob.h, blob.w);
  m.binary = blob.flag;
  m.data.assign(blob.values.begin(), blob.values.end());
  return m;
}

}  // namespace maskprobe
