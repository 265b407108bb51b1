#include "maskprobe/models.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "maskprobe/errors.hpp"

namespace maskprobe::models {

using nn::Conv2dBlock;
using nn::NodePtr;
using nn::Shape;

namespace {

constexpr char kCheckpointMagic[8] = {'M', 'P', 'C', 'K', 'P', 'T', '1', '\n'};
constexpr double kInitialDepthGuess = 5.0;

double softplus_inverse(double y) { return std::log(std::expm1(y)); }

void check_divisible(const Shape& s, int factor, const std::string& arch) {
  if (s.h % factor != 0 || s.w % factor != 0) {
    throw DimensionError(arch + ": input size " + std::to_string(s.h) + "x" +
                         std::to_string(s.w) + " must be divisible by " +
                         std::to_string(factor));
  }
}

// 4-scale encoder-decoder with skip connections and a softplus head.
class DepthNetEd4 final : public DepthNet {
 public:
  explicit DepthNetEd4(const ModelConfig& cfg) : DepthNet(cfg) {
    Rng rng(cfg.seed);
    const int w = cfg.base_width;
    enc0_ = Conv2dBlock(*this, "enc0", cfg.in_channels, w, 3, 1, rng);
    down1_ = Conv2dBlock(*this, "down1", w, 2 * w, 3, 2, rng);
    down2_ = Conv2dBlock(*this, "down2", 2 * w, 4 * w, 3, 2, rng);
    down3_ = Conv2dBlock(*this, "down3", 4 * w, 8 * w, 3, 2, rng);
    mid_ = Conv2dBlock(*this, "mid", 8 * w, 8 * w, 3, 1, rng);
    up3_ = Conv2dBlock(*this, "up3", 8 * w + 4 * w, 4 * w, 3, 1, rng);
    up2_ = Conv2dBlock(*this, "up2", 4 * w + 2 * w, 2 * w, 3, 1, rng);
    up1_ = Conv2dBlock(*this, "up1", 2 * w + w, w, 3, 1, rng);
    head_ = Conv2dBlock(*this, "head", w, 1, 3, 1, rng);
    head_.bias()->value[0] = softplus_inverse(kInitialDepthGuess);
  }

  NodePtr forward(const NodePtr& x) override {
    check_divisible(x->shape, 8, arch_);
    auto e0 = nn::relu(enc0_(x));
    auto e1 = nn::relu(down1_(e0));
    auto e2 = nn::relu(down2_(e1));
    auto e3 = nn::relu(down3_(e2));
    auto m = nn::relu(mid_(e3));
    auto d2 = nn::relu(up3_(nn::concat_c(nn::upsample2x(m), e2)));
    auto d1 = nn::relu(up2_(nn::concat_c(nn::upsample2x(d2), e1)));
    auto d0 = nn::relu(up1_(nn::concat_c(nn::upsample2x(d1), e0)));
    return nn::softplus(head_(d0));
  }

 private:
  Conv2dBlock enc0_, down1_, down2_, down3_, mid_, up3_, up2_, up1_, head_;
};

// 2-scale variant for fast tests.
class DepthNetEd2 final : public DepthNet {
 public:
  explicit DepthNetEd2(const ModelConfig& cfg) : DepthNet(cfg) {
    Rng rng(cfg.seed);
    const int w = cfg.base_width;
    enc0_ = Conv2dBlock(*this, "enc0", cfg.in_channels, w, 3, 1, rng);
    down1_ = Conv2dBlock(*this, "down1", w, 2 * w, 3, 2, rng);
    mid_ = Conv2dBlock(*this, "mid", 2 * w, 2 * w, 3, 1, rng);
    up1_ = Conv2dBlock(*this, "up1", 2 * w + w, w, 3, 1, rng);
    head_ = Conv2dBlock(*this, "head", w, 1, 3, 1, rng);
    head_.bias()->value[0] = softplus_inverse(kInitialDepthGuess);
  }

  NodePtr forward(const NodePtr& x) override {
    check_divisible(x->shape, 2, arch_);
    auto e0 = nn::relu(enc0_(x));
    auto e1 = nn::relu(down1_(e0));
    auto m = nn::relu(mid_(e1));
    auto d0 = nn::relu(up1_(nn::concat_c(nn::upsample2x(m), e0)));
    return nn::softplus(head_(d0));
  }

 private:
  Conv2dBlock enc0_, down1_, mid_, up1_, head_;
};

// Stride-2 x3 encoder, three 2x upsampling blocks, 3x3 head + sigmoid.
class MaskNetEd3 final : public MaskNet {
 public:
  explicit MaskNetEd3(const ModelConfig& cfg) : MaskNet(cfg) {
    Rng rng(cfg.seed);
    const int w = cfg.base_width;
    enc0_ = Conv2dBlock(*this, "enc0", cfg.in_channels, w, 3, 1, rng);
    enc1_ = Conv2dBlock(*this, "enc1", w, 2 * w, 3, 2, rng);
    enc2_ = Conv2dBlock(*this, "enc2", 2 * w, 4 * w, 3, 2, rng);
    enc3_ = Conv2dBlock(*this, "enc3", 4 * w, 4 * w, 3, 2, rng);
    dec3_ = Conv2dBlock(*this, "dec3", 4 * w, 2 * w, 3, 1, rng);
    dec2_ = Conv2dBlock(*this, "dec2", 2 * w, w, 3, 1, rng);
    dec1_ = Conv2dBlock(*this, "dec1", w, w, 3, 1, rng);
    head_ = Conv2dBlock(*this, "head", w, 1, 3, 1, rng);
  }

  NodePtr forward(const NodePtr& x) override {
    check_divisible(x->shape, 8, arch_);
    auto e0 = nn::relu(enc0_(x));
    auto e1 = nn::relu(enc1_(e0));
    auto e2 = nn::relu(enc2_(e1));
    auto e3 = nn::relu(enc3_(e2));
    auto d2 = nn::relu(dec3_(nn::upsample2x(e3)));
    auto d1 = nn::relu(dec2_(nn::upsample2x(d2)));
    auto d0 = nn::relu(dec1_(nn::upsample2x(d1)));
    return nn::sigmoid(head_(d0));
  }

 private:
  Conv2dBlock enc0_, enc1_, enc2_, enc3_, dec3_, dec2_, dec1_, head_;
};

// Single-downsample variant for fast tests.
class MaskNetEd1 final : public MaskNet {
 public:
  explicit MaskNetEd1(const ModelConfig& cfg) : MaskNet(cfg) {
    Rng rng(cfg.seed);
    const int w = cfg.base_width;
    enc0_ = Conv2dBlock(*this, "enc0", cfg.in_channels, w, 3, 1, rng);
    enc1_ = Conv2dBlock(*this, "enc1", w, 2 * w, 3, 2, rng);
    dec1_ = Conv2dBlock(*this, "dec1", 2 * w, w, 3, 1, rng);
    head_ = Conv2dBlock(*this, "head", w, 1, 3, 1, rng);
  }

  NodePtr forward(const NodePtr& x) override {
    check_divisible(x->shape, 2, arch_);
    auto e0 = nn::relu(enc0_(x));
    auto e1 = nn::relu(enc1_(e0));
    auto d0 = nn::relu(dec1_(nn::upsample2x(e1)));
    return nn::sigmoid(head_(d0));
  }

 private:
  Conv2dBlock enc0_, enc1_, dec1_, head_;
};

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) {
    if (!out.empty()) out += ", ";
    out += s;
  }
  return out;
}

}  // namespace

void ModelConfig::validate() const {
  if (architecture.empty()) throw ConfigError("model: architecture not set");
  if (in_channels != 1 && in_channels != 3) {
    throw ConfigError("model: in_channels must be 1 or 3");
  }
  if (base_width < 1 || base_width > 256) {
    throw ConfigError("model: base_width out of range [1,256]");
  }
}

DepthMap DepthNet::predict(const Image& image) {
  nn::NoGradGuard guard;
  auto out = forward(nn::image_node(image));
  DepthMap d = nn::depth_from_node(*out);
  d.validate_finite();
  return d;
}

Mask MaskNet::predict(const Image& image) {
  nn::NoGradGuard guard;
  auto out = forward(nn::image_node(image));
  Mask m = nn::mask_from_node(*out);
  m.validate();
  return m;
}

std::vector<std::string> depth_architectures() {
  return {"depth-ed4", "depth-ed2"};
}

std::vector<std::string> mask_architectures() {
  return {"mask-ed3", "mask-ed1"};
}

std::unique_ptr<DepthNet> build_depth_net(const ModelConfig& config) {
  config.validate();
  if (config.architecture == "depth-ed4") {
    return std::make_unique<DepthNetEd4>(config);
  }
  if (config.architecture == "depth-ed2") {
    return std::make_unique<DepthNetEd2>(config);
  }
  throw ConfigError("unknown depth architecture '" + config.architecture +
                    "' (known: " + join(depth_architectures()) + ")");
}

std::unique_ptr<MaskNet> build_mask_net(const ModelConfig& config) {
  config.validate();
  if (config.architecture == "mask-ed3") {
    return std::make_unique<MaskNetEd3>(config);
  }
  if (config.architecture == "mask-ed1") {
    return std::make_unique<MaskNetEd1>(config);
  }
  throw ConfigError("unknown mask architecture '" + config.architecture +
                    "' (known: " + join(mask_architectures()) + ")");
}

namespace {

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"architecture", c.architecture},
          {"in_channels", c.in_channels},
          {"base_width", c.base_width},
          {"seed", c.seed}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.architecture = j.at("architecture").get<std::string>();
  c.in_channels = j.at("in_channels").get<int>();
  c.base_width = j.at("base_width").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

nlohmann::json read_manifest(std::ifstream& in, const std::string& path) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw IoError("not a checkpoint file: " + path);
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len == 0 || len > (1u << 20)) {
    throw IoError("corrupt checkpoint manifest length: " + path);
  }
  std::string buf(len, '\0');
  in.read(buf.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError("truncated checkpoint manifest: " + path);
  try {
    return nlohmann::json::parse(buf);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad checkpoint manifest in " + path + ": " + e.what());
  }
}

void fill_params(nn::Network& net, const nlohmann::json& manifest,
                 std::ifstream& in, const std::string& path) {
  const auto& plist = manifest.at("params");
  auto& params = net.parameters();
  if (plist.size() != params.size()) {
    throw IoError("checkpoint " + path + " has " +
                  std::to_string(plist.size()) + " params, model expects " +
                  std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& pj = plist[i];
    const std::string name = pj.at("name").get<std::string>();
    if (name != params[i].name) {
      throw IoError("checkpoint param '" + name + "' does not match model '" +
                    params[i].name + "'");
    }
    const auto shape = pj.at("shape").get<std::vector<int>>();
    const Shape& s = params[i].node->shape;
    if (shape.size() != 4 || shape[0] != s.b || shape[1] != s.c ||
        shape[2] != s.h || shape[3] != s.w) {
      throw IoError("checkpoint shape mismatch for param '" + name + "'");
    }
    auto& v = params[i].node->value;
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!in) throw IoError("truncated checkpoint blob: " + path);
  }
  const std::string stored = manifest.at("digest").get<std::string>();
  const std::string live = net.digest();
  if (stored != live) {
    throw IoError("checkpoint digest mismatch for " + path + ": stored " +
                  stored + ", recomputed " + live);
  }
}

}  // namespace

void save_checkpoint(const nn::Network& net, const ModelConfig& config,
                     const std::string& path, int epoch) {
  nlohmann::json manifest;
  manifest["architecture"] = net.architecture();
  manifest["epoch"] = epoch;
  manifest["digest"] = net.digest();
  manifest["config"] = config_to_json(config);
  nlohmann::json plist = nlohmann::json::array();
  for (const auto& p : net.parameters()) {
    const Shape& s = p.node->shape;
    plist.push_back({{"name", p.name},
                     {"shape", {s.b, s.c, s.h, s.w}},
                     {"count", p.node->value.size()}});
  }
  manifest["params"] = std::move(plist);
  manifest["format"] = "f64le";

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::string mstr = manifest.dump();
  const std::uint64_t len = mstr.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(mstr.data(), static_cast<std::streamsize>(mstr.size()));
  for (const auto& p : net.parameters()) {
    out.write(reinterpret_cast<const char*>(p.node->value.data()),
              static_cast<std::streamsize>(p.node->value.size() *
                                           sizeof(double)));
  }
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

CheckpointInfo read_checkpoint_info(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  const nlohmann::json manifest = read_manifest(in, path);
  CheckpointInfo info;
  info.architecture = manifest.at("architecture").get<std::string>();
  info.epoch = manifest.at("epoch").get<int>();
  info.digest = manifest.at("digest").get<std::string>();
  info.config = config_from_json(manifest.at("config"));
  return info;
}

std::unique_ptr<DepthNet> load_depth_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  const nlohmann::json manifest = read_manifest(in, path);
  auto net = build_depth_net(config_from_json(manifest.at("config")));
  fill_params(*net, manifest, in, path);
  return net;
}

std::unique_ptr<MaskNet> load_mask_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  const nlohmann::json manifest = read_manifest(in, path);
  auto net = build_mask_net(config_from_json(manifest.at("config")));
  fill_params(*net, manifest, in, path);
  return net;
}

}  // namespace maskprobe::models
