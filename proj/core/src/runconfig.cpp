#include "maskprobe/runconfig.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>

#include "maskprobe/digest.hpp"
#include "maskprobe/errors.hpp"
#include "maskprobe/toml_lite.hpp"

namespace maskprobe::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

int as_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) {
    throw ConfigError("config key '" + key + "': expected an integer");
  }
  return v.get<int>();
}

std::uint64_t as_u64(const json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw ConfigError("config key '" + key +
                      "': expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

double as_double(const json& v, const std::string& key) {
  if (!v.is_number()) {
    throw ConfigError("config key '" + key + "': expected a number");
  }
  return v.get<double>();
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) {
    throw ConfigError("config key '" + key + "': expected a string");
  }
  return v.get<std::string>();
}

std::vector<double> as_double_array(const json& v, const std::string& key) {
  if (!v.is_array() || v.empty()) {
    throw ConfigError("config key '" + key + "': expected a non-empty array");
  }
  std::vector<double> out;
  for (const auto& e : v) out.push_back(as_double(e, key));
  return out;
}

std::vector<std::uint64_t> as_u64_array(const json& v,
                                        const std::string& key) {
  if (!v.is_array() || v.empty()) {
    throw ConfigError("config key '" + key + "': expected a non-empty array");
  }
  std::vector<std::uint64_t> out;
  for (const auto& e : v) out.push_back(as_u64(e, key));
  return out;
}

using Setter = std::function<void(RunConfig&, const json&, const std::string&)>;

const std::map<std::string, Setter>& schema() {
  static const std::map<std::string, Setter> s = {
      {"dataset.n_samples",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.dataset.n_samples = as_int(v, k);
       }},
      {"dataset.seed",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.dataset.seed = as_u64(v, k);
       }},
      {"dataset.train_ratio",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.dataset.train_ratio = as_double(v, k);
       }},
      {"dataset.val_ratio",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.dataset.val_ratio = as_double(v, k);
       }},
      {"dataset.test_ratio",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.dataset.test_ratio = as_double(v, k);
       }},
      {"dataset.height",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.dataset.height = as_int(v, k);
       }},
      {"dataset.width",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.dataset.width = as_int(v, k);
       }},
      {"dataset.difficulty",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.dataset.difficulty = as_string(v, k);
       }},
      {"dataset.dir",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.dataset.out_dir = as_string(v, k);
       }},
      {"model.depth_architecture",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.depth_architecture = as_string(v, k);
       }},
      {"model.mask_architecture",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.mask_architecture = as_string(v, k);
       }},
      {"model.base_width",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.base_width = as_int(v, k);
       }},
      {"objective.lambda",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.lambda = as_double(v, k);
       }},
      {"objective.variant",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.variant = as_string(v, k);
       }},
      {"objective.binarize_eps",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.binarize_eps = as_double(v, k);
       }},
      {"train.lr",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.lr = as_double(v, k);
       }},
      {"train.weight_decay",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.weight_decay = as_double(v, k);
       }},
      {"train.epochs",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.epochs = as_int(v, k);
       }},
      {"train.batch_size",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.batch_size = as_int(v, k);
       }},
      {"train.seed",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.seed = as_u64(v, k);
       }},
      {"depth_train.combo",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.depth_combo = as_string(v, k);
       }},
      {"depth_train.lr",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.depth_lr = as_double(v, k);
       }},
      {"depth_train.epochs",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.depth_epochs = as_int(v, k);
       }},
      {"sweep.lambdas",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.sweep_lambdas = as_double_array(v, k);
       }},
      {"sweep.seeds",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.sweep_seeds = as_u64_array(v, k);
       }},
      {"edge.thresholds",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.edge_thresholds = as_double_array(v, k);
       }},
      {"direct.steps",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.direct_steps = as_int(v, k);
       }},
      {"direct.lr",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.direct_lr = as_double(v, k);
       }},
      {"direct.sample",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.direct_sample = as_string(v, k);
       }},
      {"visualize.input",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.visualize_input = as_string(v, k);
       }},
      {"visualize.colormap",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.colormap = as_string(v, k);
       }},
      {"paths.out_dir",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.out_dir = as_string(v, k);
       }},
      {"paths.target_checkpoint",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.target_checkpoint = as_string(v, k);
       }},
      {"paths.mask_checkpoint",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.mask_checkpoint = as_string(v, k);
       }},
      {"paths.sweep_csv",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.sweep_csv = as_string(v, k);
       }},
  };
  return s;
}

void flatten(const json& node, const std::string& prefix,
             std::vector<std::pair<std::string, const json*>>& out) {
  if (node.is_object()) {
    for (auto it = node.begin(); it != node.end(); ++it) {
      const std::string key =
          prefix.empty() ? it.key() : prefix + "." + it.key();
      flatten(it.value(), key, out);
    }
  } else {
    out.emplace_back(prefix, &node);
  }
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config root must be a table");
  RunConfig cfg;
  std::vector<std::pair<std::string, const json*>> leaves;
  flatten(j, "", leaves);
  for (const auto& [key, value] : leaves) {
    const auto it = schema().find(key);
    if (it == schema().end()) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    it->second(cfg, *value, key);
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::string& toml_path) {
  return from_json(toml::parse_file(toml_path));
}

json RunConfig::to_json() const {
  json j;
  j["dataset"] = {{"n_samples", dataset.n_samples},
                  {"seed", dataset.seed},
                  {"train_ratio", dataset.train_ratio},
                  {"val_ratio", dataset.val_ratio},
                  {"test_ratio", dataset.test_ratio},
                  {"height", dataset.height},
                  {"width", dataset.width},
                  {"difficulty", dataset.difficulty},
                  {"dir", dataset.out_dir}};
  j["model"] = {{"depth_architecture", depth_architecture},
                {"mask_architecture", mask_architecture},
                {"base_width", base_width}};
  j["objective"] = {{"lambda", lambda},
                    {"variant", variant},
                    {"binarize_eps", binarize_eps}};
  j["train"] = {{"lr", lr},
                {"weight_decay", weight_decay},
                {"epochs", epochs},
                {"batch_size", batch_size},
                {"seed", seed}};
  j["depth_train"] = {
      {"combo", depth_combo}, {"lr", depth_lr}, {"epochs", depth_epochs}};
  j["sweep"] = {{"lambdas", sweep_lambdas}, {"seeds", sweep_seeds}};
  j["edge"] = {{"thresholds", edge_thresholds}};
  j["direct"] = {
      {"steps", direct_steps}, {"lr", direct_lr}, {"sample", direct_sample}};
  j["visualize"] = {{"input", visualize_input}, {"colormap", colormap}};
  j["paths"] = {{"out_dir", out_dir},
                {"target_checkpoint", target_checkpoint},
                {"mask_checkpoint", mask_checkpoint},
                {"sweep_csv", sweep_csv}};
  return j;
}

std::string RunConfig::hash() const { return sha256_hex(to_json().dump()); }

void RunConfig::validate() const {
  dataset.validate();
  optimize::variant_from_name(variant);
  optimize::combo_from_name(depth_combo);
  if (!std::isfinite(lambda) || lambda < 0.0) {
    throw ConfigError("objective.lambda must be finite and >= 0");
  }
  if (binarize_eps < 0.0 || binarize_eps > 1.0) {
    throw ConfigError("objective.binarize_eps must lie in [0,1]");
  }
  if (!(lr > 0.0) || !(depth_lr > 0.0) || !(direct_lr > 0.0)) {
    throw ConfigError("learning rates must be positive");
  }
  if (weight_decay < 0.0) {
    throw ConfigError("train.weight_decay must be >= 0");
  }
  if (epochs < 1 || depth_epochs < 1 || direct_steps < 1) {
    throw ConfigError("epoch and step counts must be >= 1");
  }
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (base_width < 1) throw ConfigError("model.base_width must be >= 1");
  for (double l : sweep_lambdas) {
    if (!std::isfinite(l) || l < 0.0) {
      throw ConfigError("sweep.lambdas entries must be finite and >= 0");
    }
  }
  if (sweep_seeds.empty()) throw ConfigError("sweep.seeds must be non-empty");
  for (double t : edge_thresholds) {
    if (!(t >= 0.0) || !(t <= 1.0)) {
      throw ConfigError("edge.thresholds entries must lie in [0,1]");
    }
  }
  if (colormap != "gray" && colormap != "heat") {
    throw ConfigError("visualize.colormap must be 'gray' or 'heat'");
  }
  if (out_dir.empty()) throw ConfigError("paths.out_dir must be non-empty");
}

std::string make_run_id(const std::string& verb, const RunConfig& config,
                        const std::map<std::string, std::string>& inputs) {
  Sha256 h;
  h.update(verb);
  h.update("\n");
  h.update(config.to_json().dump());
  h.update("\n");
  for (const auto& [name, digest] : inputs) {
    h.update(name);
    h.update("=");
    h.update(digest);
    h.update("\n");
  }
  return h.hex_digest().substr(0, 12);
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string RunManifest::to_json_string() const {
  json j;
  j["run_id"] = run_id;
  j["verb"] = verb;
  j["config_hash"] = config_hash;
  j["library_version"] = library_version;
  j["input_digests"] = input_digests;
  json arts = json::array();
  for (const auto& a : artifacts) {
    arts.push_back({{"path", a.path}, {"digest", a.digest}});
  }
  j["artifacts"] = std::move(arts);
  j["created_utc"] = created_utc;
  j["wall_seconds"] = wall_seconds;
  j["config"] = config;
  return j.dump(2);
}

RunManifest RunManifest::from_json_string(const std::string& text) {
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw IoError("manifest is not valid JSON");
  RunManifest m;
  m.run_id = j.at("run_id").get<std::string>();
  m.verb = j.at("verb").get<std::string>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.library_version = j.at("library_version").get<std::string>();
  m.input_digests =
      j.at("input_digests").get<std::map<std::string, std::string>>();
  for (const auto& a : j.at("artifacts")) {
    m.artifacts.push_back({a.at("path").get<std::string>(),
                           a.at("digest").get<std::string>()});
  }
  m.created_utc = j.at("created_utc").get<std::string>();
  m.wall_seconds = j.at("wall_seconds").get<double>();
  m.config = j.at("config");
  return m;
}

void write_run_manifest(const std::string& run_dir, RunManifest manifest) {
  for (auto& a : manifest.artifacts) {
    if (a.digest.empty()) {
      a.digest = sha256_file_hex((fs::path(run_dir) / a.path).string());
    }
  }
  const std::string path = (fs::path(run_dir) / "manifest.json").string();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest: " + path);
  out << manifest.to_json_string() << '\n';
  if (!out) throw IoError("failed writing manifest: " + path);
}

bool read_run_manifest(const std::string& run_dir, RunManifest& out) {
  const std::string path = (fs::path(run_dir) / "manifest.json").string();
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  out = RunManifest::from_json_string(text);
  return true;
}

LockFile::LockFile(const std::string& dir) {
  path_ = (fs::path(dir) / ".lock").string();
  fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd_ < 0) {
    if (errno == EEXIST) {
      throw IoError("run directory is locked by another process: " + path_);
    }
    throw IoError("cannot create lock file " + path_ + ": " +
                  std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  if (::write(fd_, pid.data(), pid.size()) < 0) {
    // The pid note is best-effort; the lock itself is the O_EXCL create.
  }
}

LockFile::~LockFile() {
  if (fd_ >= 0) {
    ::close(fd_);
    ::unlink(path_.c_str());
  }
}

}  // namespace maskprobe::cli
