#include "maskprobe/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "maskprobe/blob_io.hpp"
#include "maskprobe/digest.hpp"
#include "maskprobe/errors.hpp"
#include "maskprobe/rng.hpp"

namespace maskprobe::synthgen {

namespace fs = std::filesystem;

namespace {

constexpr double kEps = 1e-12;

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

Vec3 rotate_x(const Vec3& v, double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {v.x, v.y * c - v.z * s, v.y * s + v.z * c};
}

Vec3 rotate_y(const Vec3& v, double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {v.x * c + v.z * s, v.y, -v.x * s + v.z * c};
}

// Camera-to-world direction: yaw about y after pitch about x.
Vec3 cam_to_world(const Vec3& d, const Scene& s) {
  return rotate_y(rotate_x(d, s.pitch), s.yaw);
}

Vec3 world_to_cam(const Vec3& d, const Scene& s) {
  return rotate_x(rotate_y(d, -s.yaw), -s.pitch);
}

double dot(const Vec3& a, const Vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

Vec3 normalize(const Vec3& v) {
  const double n = std::sqrt(dot(v, v));
  return {v.x / n, v.y / n, v.z / n};
}

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  int surface = -1;  // 0 floor, 1 ceiling, 2 left, 3 right, 4 back, 5+i box i
  Vec3 normal;
  const SurfaceDesc* desc = nullptr;
};

// Axis-aligned plane coord = value; returns entry distance or infinity.
double plane_t(double value, double origin_component, double dir_component) {
  if (std::fabs(dir_component) < kEps)
    return std::numeric_limits<double>::infinity();
  const double t = (value - origin_component) / dir_component;
  return t > 0.0 ? t : std::numeric_limits<double>::infinity();
}

void consider(Hit& best, double t, double near, double far, int surface,
              const Vec3& normal, const SurfaceDesc& desc) {
  if (t >= near && t <= far && t < best.t) {
    best.t = t;
    best.surface = surface;
    best.normal = normal;
    best.desc = &desc;
  }
}

// Slab intersection; writes the entry-face normal.
bool box_hit(const Box& b, const Vec3& d, double& t_entry, Vec3& normal) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  int axis = -1;
  double sign = 0.0;
  const double center[3] = {b.cx, b.cy, b.cz};
  const double half[3] = {b.hx, b.hy, b.hz};
  const double dir[3] = {d.x, d.y, d.z};
  for (int a = 0; a < 3; ++a) {
    if (std::fabs(dir[a]) < kEps) {
      if (std::fabs(-center[a]) > half[a]) return false;  // origin outside slab
      continue;
    }
    double ta = (center[a] - half[a]) / dir[a];
    double tb = (center[a] + half[a]) / dir[a];
    double s = -1.0;
    if (ta > tb) {
      std::swap(ta, tb);
      s = 1.0;
    }
    if (ta > t0) {
      t0 = ta;
      axis = a;
      sign = s;
    }
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  if (axis < 0 || t0 <= 0.0) return false;  // camera inside or behind
  t_entry = t0;
  normal = Vec3{};
  if (axis == 0) normal.x = sign;
  if (axis == 1) normal.y = sign;
  if (axis == 2) normal.z = sign;
  return true;
}

double texture_factor(const SurfaceDesc& s, const Vec3& p) {
  auto cell = [&](double v) {
    return static_cast<long long>(std::floor(v / s.texture_scale));
  };
  switch (s.texture_id) {
    case 1: {  // checker
      const long long parity = (cell(p.x) + cell(p.y) + cell(p.z)) & 1;
      return parity ? 0.55 : 1.0;
    }
    case 2: {  // stripes
      const long long parity = cell(p.x + p.z) & 1;
      return parity ? 0.7 : 1.0;
    }
    default:
      return 1.0;
  }
}

Hit trace(const Scene& s, const Vec3& dw) {
  Hit best;
  if (s.has_floor) {
    consider(best, plane_t(s.floor_y, 0.0, dw.y), s.near, s.far, 0,
             Vec3{0, -1, 0}, s.floor_s);
  }
  if (s.has_ceiling) {
    consider(best, plane_t(s.ceiling_y, 0.0, dw.y), s.near, s.far, 1,
             Vec3{0, 1, 0}, s.ceiling_s);
  }
  if (s.has_left) {
    consider(best, plane_t(s.left_x, 0.0, dw.x), s.near, s.far, 2,
             Vec3{1, 0, 0}, s.left_s);
  }
  if (s.has_right) {
    consider(best, plane_t(s.right_x, 0.0, dw.x), s.near, s.far, 3,
             Vec3{-1, 0, 0}, s.right_s);
  }
  consider(best, plane_t(s.back_z, 0.0, dw.z), s.near, s.far, 4,
           Vec3{0, 0, -1}, s.back_s);
  for (std::size_t i = 0; i < s.boxes.size(); ++i) {
    double t = 0;
    Vec3 n;
    if (box_hit(s.boxes[i], dw, t, n)) {
      consider(best, t, s.near, s.far, 5 + static_cast<int>(i), n,
               s.boxes[i].surface);
    }
  }
  return best;
}

SurfaceDesc random_surface(Rng& rng, int texture_id, double scale) {
  SurfaceDesc d;
  for (double& a : d.albedo) a = 0.45 + 0.5 * rng.uniform();
  d.texture_id = texture_id;
  d.texture_scale = scale;
  return d;
}

void add_box(Scene& s, Rng& rng, double max_half_x) {
  Box b;
  b.hx = 0.25 + 0.45 * rng.uniform();
  b.hy = 0.25 + 0.45 * rng.uniform();
  b.hz = 0.25 + 0.45 * rng.uniform();
  const double zlo = 3.0, zhi = std::min(s.back_z - 1.5, 10.0);
  b.cz = zlo + (zhi - zlo) * rng.uniform();
  const double span = std::max(0.1, max_half_x - b.hx - 0.1);
  b.cx = (rng.uniform() * 2.0 - 1.0) * span;
  b.cy = s.floor_y - b.hy;  // resting on the floor
  b.surface = random_surface(rng, rng.uniform_int(3), 0.3);
  s.boxes.push_back(b);
}

std::string sample_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%04d", i);
  return buf;
}

nlohmann::json config_to_json(const DatasetConfig& c) {
  nlohmann::json j;
  j["n_samples"] = c.n_samples;
  j["seed"] = c.seed;
  j["train_ratio"] = c.train_ratio;
  j["val_ratio"] = c.val_ratio;
  j["test_ratio"] = c.test_ratio;
  j["height"] = c.height;
  j["width"] = c.width;
  j["difficulty"] = c.difficulty;
  return j;
}

DatasetConfig config_from_json(const nlohmann::json& j) {
  DatasetConfig c;
  c.n_samples = j.at("n_samples").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.train_ratio = j.at("train_ratio").get<double>();
  c.val_ratio = j.at("val_ratio").get<double>();
  c.test_ratio = j.at("test_ratio").get<double>();
  c.height = j.at("height").get<int>();
  c.width = j.at("width").get<int>();
  c.difficulty = j.at("difficulty").get<std::string>();
  return c;
}

nlohmann::json cues_to_json(const CueAnnotations& c) {
  nlohmann::json j;
  j["edges"] = c.edges;
  j["object_interior"] = c.object_interior;
  j["vanishing_region"] = c.vanishing_region;
  j["vanish_row"] = c.vanish_row;
  j["vanish_col"] = c.vanish_col;
  return j;
}

CueAnnotations cues_from_json(const nlohmann::json& j) {
  CueAnnotations c;
  c.edges = j.at("edges").get<std::vector<std::uint32_t>>();
  c.object_interior =
      j.at("object_interior").get<std::vector<std::uint32_t>>();
  c.vanishing_region =
      j.at("vanishing_region").get<std::vector<std::uint32_t>>();
  c.vanish_row = j.at("vanish_row").get<double>();
  c.vanish_col = j.at("vanish_col").get<double>();
  return c;
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("failed writing: " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::string s((std::istreambuf_iterator<char>(in)),
                std::istreambuf_iterator<char>());
  return s;
}

}  // namespace

Scene generate_scene(std::uint64_t seed, const std::string& difficulty) {
  if (difficulty != "planes" && difficulty != "corridor" &&
      difficulty != "cluttered") {
    throw ParameterError("unknown difficulty '" + difficulty +
                         "' (known: planes, corridor, cluttered)");
  }
  Rng rng(derive_seed(seed, "scene/" + difficulty));
  Scene s;
  s.difficulty = difficulty;
  s.seed = seed;

  s.has_floor = true;
  s.floor_y = 1.2 + 0.8 * rng.uniform();
  s.floor_s = random_surface(rng, 1, 0.8);
  s.back_z = 8.0 + 6.0 * rng.uniform();
  s.back_s = random_surface(rng, rng.uniform() < 0.5 ? 1 : 0, 1.0);
  s.far = s.back_z * 1.25 + 1.0;

  if (difficulty == "planes") {
    if (rng.uniform() < 0.5) {
      s.has_ceiling = true;
      s.ceiling_y = -(1.8 + 0.8 * rng.uniform());
      s.ceiling_s = random_surface(rng, 0, 1.0);
    }
    if (rng.uniform() < 0.5) {
      const bool left = rng.uniform() < 0.5;
      const double x = 2.2 + 1.2 * rng.uniform();
      if (left) {
        s.has_left = true;
        s.left_x = -x;
        s.left_s = random_surface(rng, 2, 0.7);
      } else {
        s.has_right = true;
        s.right_x = x;
        s.right_s = random_surface(rng, 2, 0.7);
      }
    }
  } else if (difficulty == "corridor") {
    s.has_ceiling = true;
    s.ceiling_y = -(1.6 + 0.6 * rng.uniform());
    s.ceiling_s = random_surface(rng, 0, 1.0);
    s.has_left = true;
    s.left_x = -(1.4 + 0.8 * rng.uniform());
    s.left_s = random_surface(rng, 2, 0.7);
    s.has_right = true;
    s.right_x = 1.4 + 0.8 * rng.uniform();
    s.right_s = random_surface(rng, 2, 0.7);
    s.yaw = (rng.uniform() - 0.5) * 0.2;
    s.pitch = (rng.uniform() - 0.5) * 0.16;
    s.has_vanishing_point = true;
    const int nboxes = static_cast<int>(rng.uniform_int(3));  // 0..2
    const double lane = std::min(-s.left_x, s.right_x);
    for (int i = 0; i < nboxes; ++i) add_box(s, rng, lane);
  } else {  // cluttered
    if (rng.uniform() < 0.3) {
      s.has_ceiling = true;
      s.ceiling_y = -(1.8 + 0.8 * rng.uniform());
      s.ceiling_s = random_surface(rng, 0, 1.0);
    }
    if (rng.uniform() < 0.3) {
      s.has_left = true;
      s.left_x = -(2.2 + 1.2 * rng.uniform());
      s.left_s = random_surface(rng, 2, 0.7);
    }
    const int nboxes = 3 + static_cast<int>(rng.uniform_int(6));  // 3..8
    for (int i = 0; i < nboxes; ++i) add_box(s, rng, 3.5);
  }
  return s;
}

Sample render(const Scene& scene, int height, int width) {
  if (height < 16 || width < 16) {
    throw ParameterError("render: image size must be at least 16x16");
  }
  if (!(scene.focal_rel > 0.05) || std::fabs(scene.yaw) > 0.5 ||
      std::fabs(scene.pitch) > 0.5 || !(scene.near > 0.0) ||
      !(scene.far > scene.near)) {
    throw GeometryError("render: degenerate camera");
  }

  const double f = scene.focal_rel * width;
  const Vec3 to_light = normalize(Vec3{-0.35, -0.85, -0.4});

  Sample sample;
  sample.scene = scene;
  sample.image = Image(height, width, 3);
  sample.depth = DepthMap(height, width);
  std::vector<int> surface(static_cast<std::size_t>(height) * width, -1);

  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const Vec3 d_cam{(c + 0.5 - width / 2.0) / f,
                       (r + 0.5 - height / 2.0) / f, 1.0};
      const Vec3 dw = cam_to_world(d_cam, scene);
      const Hit hit = trace(scene, dw);
      if (hit.surface < 0) {
        throw GeometryError("render: ray escaped the scene at pixel (" +
                            std::to_string(r) + "," + std::to_string(c) + ")");
      }
      // With d_cam.z == 1 the ray parameter is the camera-frame depth.
      sample.depth.at(r, c) = hit.t;
      surface[static_cast<std::size_t>(r) * width + c] = hit.surface;

      const Vec3 p{hit.t * dw.x, hit.t * dw.y, hit.t * dw.z};
      const double diffuse = std::max(0.0, dot(hit.normal, to_light));
      const double shade = 0.25 + 0.75 * diffuse;
      const double tex = texture_factor(*hit.desc, p);
      for (int ch = 0; ch < 3; ++ch) {
        sample.image.at(r, c, ch) = hit.desc->albedo[ch] * shade * tex;
      }
    }
  }
  sample.depth.validate_ground_truth();

  // Cue annotations from the surface-id and depth buffers.
  auto idx = [&](int r, int c) {
    return static_cast<std::size_t>(r) * width + c;
  };
  std::vector<bool> is_edge(surface.size(), false);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const double d0 = sample.depth.at(r, c);
      const int s0 = surface[idx(r, c)];
      auto check = [&](int rr, int cc) {
        if (rr < 0 || rr >= height || cc < 0 || cc >= width) return false;
        if (surface[idx(rr, cc)] != s0) return true;
        const double d1 = sample.depth.at(rr, cc);
        return std::fabs(d1 - d0) > 0.12 * std::min(d0, d1);
      };
      if (check(r - 1, c) || check(r + 1, c) || check(r, c - 1) ||
          check(r, c + 1)) {
        is_edge[idx(r, c)] = true;
      }
    }
  }
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const std::size_t i = idx(r, c);
      if (is_edge[i]) {
        sample.cues.edges.push_back(static_cast<std::uint32_t>(i));
      } else if (surface[i] >= 5) {
        sample.cues.object_interior.push_back(static_cast<std::uint32_t>(i));
      }
    }
  }

  if (scene.has_vanishing_point) {
    // Pixel where the corridor axis (+z in world) projects.
    const Vec3 dc = world_to_cam(Vec3{0, 0, 1}, scene);
    const double vc = width / 2.0 + f * dc.x / dc.z - 0.5;
    const double vr = height / 2.0 + f * dc.y / dc.z - 0.5;
    sample.cues.vanish_col = vc;
    sample.cues.vanish_row = vr;
    const double radius = std::max(2.0, std::min(height, width) / 8.0);
    for (int r = 0; r < height; ++r) {
      for (int c = 0; c < width; ++c) {
        const double dr = r - vr, dcc = c - vc;
        if (dr * dr + dcc * dcc <= radius * radius) {
          sample.cues.vanishing_region.push_back(
              static_cast<std::uint32_t>(idx(r, c)));
        }
      }
    }
  }
  return sample;
}

void DatasetConfig::validate() const {
  if (n_samples < 1) throw ConfigError("dataset: n_samples must be >= 1");
  const double sum = train_ratio + val_ratio + test_ratio;
  if (train_ratio < 0 || val_ratio < 0 || test_ratio < 0 ||
      std::fabs(sum - 1.0) > 1e-9) {
    throw ConfigError("dataset: split ratios must be non-negative and sum to 1");
  }
  if (height < 16 || width < 16) {
    throw ConfigError("dataset: image size must be at least 16x16");
  }
  if (difficulty != "planes" && difficulty != "corridor" &&
      difficulty != "cluttered") {
    throw ConfigError("dataset: unknown difficulty '" + difficulty + "'");
  }
  if (out_dir.empty()) throw ConfigError("dataset: out_dir not set");
}

std::string dataset_config_hash(const DatasetConfig& config) {
  return sha256_hex(config_to_json(config).dump());
}

void build_dataset(const DatasetConfig& config) {
  config.validate();
  const fs::path root(config.out_dir);
  std::error_code ec;
  fs::create_directories(root / "samples", ec);
  fs::create_directories(root / "cues", ec);
  if (ec) throw IoError("cannot create dataset directories under " +
                        root.string() + ": " + ec.message());

  const int n = config.n_samples;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(derive_seed(config.seed, "split"));
  split_rng.shuffle(order);
  const int n_train = static_cast<int>(std::llround(n * config.train_ratio));
  const int n_val = std::min(
      n - n_train, static_cast<int>(std::llround(n * config.val_ratio)));

  nlohmann::json splits;
  splits["train"] = nlohmann::json::array();
  splits["val"] = nlohmann::json::array();
  splits["test"] = nlohmann::json::array();
  for (int k = 0; k < n; ++k) {
    const std::string id = sample_id(order[k]);
    if (k < n_train) {
      splits["train"].push_back(id);
    } else if (k < n_train + n_val) {
      splits["val"].push_back(id);
    } else {
      splits["test"].push_back(id);
    }
  }

  for (int i = 0; i < n; ++i) {
    const std::uint64_t sample_seed =
        derive_seed(config.seed, "sample/" + std::to_string(i));
    const Scene scene = generate_scene(sample_seed, config.difficulty);
    const Sample sample = render(scene, config.height, config.width);
    const std::string id = sample_id(i);
    save_image_blob((root / "samples" / (id + ".img.bin")).string(),
                    sample.image);
    save_depth_blob((root / "samples" / (id + ".depth.bin")).string(),
                    sample.depth);
    write_text_file(root / "cues" / (id + ".json"),
                    cues_to_json(sample.cues).dump(2) + "\n");
  }

  nlohmann::json manifest;
  manifest["seed"] = config.seed;
  manifest["config"] = config_to_json(config);
  manifest["config_hash"] = dataset_config_hash(config);
  manifest["splits"] = std::move(splits);
  write_text_file(root / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const std::string& dir, bool normalize) {
  const fs::path root(dir);
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(root / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad dataset manifest in " + dir + ": " + e.what());
  }

  Dataset ds;
  ds.config = config_from_json(manifest.at("config"));
  ds.config.out_dir = dir;

  std::vector<std::string> ids;
  for (int i = 0; i < ds.config.n_samples; ++i) ids.push_back(sample_id(i));
  ds.entries.reserve(ids.size());
  for (const std::string& id : ids) {
    DatasetEntry e;
    e.id = id;
    e.image = load_image_blob((root / "samples" / (id + ".img.bin")).string());
    e.depth =
        load_depth_blob((root / "samples" / (id + ".depth.bin")).string());
    e.depth.validate_ground_truth();
    try {
      e.cues = cues_from_json(
          nlohmann::json::parse(read_text_file(root / "cues" / (id + ".json"))));
    } catch (const nlohmann::json::exception& err) {
      throw IoError("bad cue file for sample " + id + ": " + err.what());
    }
    ds.entries.push_back(std::move(e));
  }

  auto resolve = [&](const char* split, std::vector<std::size_t>& out) {
    for (const auto& id : manifest.at("splits").at(split)) {
      const std::string sid = id.get<std::string>();
      bool found = false;
      for (std::size_t i = 0; i < ds.entries.size(); ++i) {
        if (ds.entries[i].id == sid) {
          out.push_back(i);
          found = true;
          break;
        }
      }
      if (!found) throw IoError("split references unknown sample " + sid);
    }
  };
  resolve("train", ds.train);
  resolve("val", ds.val);
  resolve("test", ds.test);

  if (normalize) {
    std::vector<Image> train_images;
    train_images.reserve(ds.train.size());
    for (std::size_t i : ds.train) train_images.push_back(ds.entries[i].image);
    if (train_images.empty()) {
      throw IoError("dataset has an empty train split; cannot normalize");
    }
    ds.stats = compute_channel_stats(train_images);
    for (auto& e : ds.entries) e.image = normalize_zscore(e.image, ds.stats);
  }
  return ds;
}

}  // namespace maskprobe::synthgen
