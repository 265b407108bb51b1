#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "maskprobe/analysis.hpp"
#include "maskprobe/blob_io.hpp"
#include "maskprobe/digest.hpp"
#include "maskprobe/errors.hpp"
#include "maskprobe/image_ops.hpp"
#include "maskprobe/models.hpp"
#include "maskprobe/optimize.hpp"
#include "maskprobe/rng.hpp"
#include "maskprobe/runconfig.hpp"
#include "maskprobe/selfcheck.hpp"
#include "maskprobe/synthgen.hpp"
#include "maskprobe/text.hpp"

namespace fs = std::filesystem;
namespace mp = maskprobe;
namespace models = maskprobe::models;

namespace {

void note(const std::string& msg) { std::cerr << msg << "\n"; }
void emit_path(const std::string& path) { std::cout << path << "\n"; }

// Every flag the subcommands can set; each handler copies only the
// flags that were actually passed onto the loaded config.
struct Flags {
  std::string config_path;
  bool resume = false;

  std::uint64_t seed = 0;
  int n = 0;
  std::string out;
  std::string data;
  int height = 0;
  int width = 0;
  std::string difficulty;

  std::string arch;
  int base_width = 0;

  double lambda = 0.0;
  std::string variant;
  double eps = 0.0;

  double lr = 0.0;
  double wd = 0.0;
  int epochs = 0;
  int batch = 0;

  std::string combo;
  int depth_epochs = 0;

  std::vector<double> lambdas;
  std::vector<std::uint64_t> seeds;
  std::vector<double> thresholds;

  int steps = 0;
  std::string input;
  std::string colormap;

  std::string target;
  std::string mask;
  std::string sweep_csv;
};

mp::cli::RunConfig base_config(const Flags& f) {
  mp::cli::RunConfig cfg =
      f.config_path.empty() ? mp::cli::RunConfig{}
                            : mp::cli::RunConfig::load(f.config_path);
  if (const char* env = std::getenv("MASKPROBE_SEED")) {
    const std::string_view sv(env);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v);
    if (ec != std::errc() || ptr != sv.data() + sv.size()) {
      throw mp::ConfigError("MASKPROBE_SEED is not an unsigned integer: '" +
                            std::string(sv) + "'");
    }
    cfg.seed = v;
    cfg.dataset.seed = v;
  }
  return cfg;
}

bool passed(const CLI::App* sub, const std::string& flag) {
  return sub->count(flag) > 0;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw mp::IoError("cannot open: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string dataset_manifest_path(const mp::cli::RunConfig& cfg) {
  return (fs::path(cfg.dataset.out_dir) / "manifest.json").string();
}

void require_dataset(const mp::cli::RunConfig& cfg) {
  const std::string path = dataset_manifest_path(cfg);
  if (!fs::exists(path)) {
    throw mp::MissingDependencyError("dataset manifest not found: " + path +
                                     " (run gen-data first)");
  }
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty() || !fs::exists(path)) {
    throw mp::MissingDependencyError(what + " not found: '" + path + "'");
  }
}

struct RunContext {
  std::string run_dir;
  std::string run_id;
  bool up_to_date = false;
  mp::cli::RunManifest manifest;
  std::chrono::steady_clock::time_point started;
};

RunContext open_run(const std::string& verb, const mp::cli::RunConfig& cfg,
                    const std::map<std::string, std::string>& inputs,
                    bool resume) {
  RunContext ctx;
  ctx.run_id = mp::cli::make_run_id(verb, cfg, inputs);
  ctx.run_dir = (fs::path(cfg.out_dir) / (verb + "-" + ctx.run_id)).string();
  ctx.started = std::chrono::steady_clock::now();

  mp::cli::RunManifest existing;
  if (mp::cli::read_run_manifest(ctx.run_dir, existing) &&
      existing.config_hash == cfg.hash()) {
    ctx.up_to_date = true;
    note("up-to-date: " + ctx.run_dir);
    return ctx;
  }
  if (fs::exists(ctx.run_dir) && !resume) {
    throw mp::IoError("incomplete run exists: " + ctx.run_dir +
                      " (pass --resume to finish it or remove the directory)");
  }
  fs::create_directories(ctx.run_dir);
  ctx.manifest.run_id = ctx.run_id;
  ctx.manifest.verb = verb;
  ctx.manifest.config_hash = cfg.hash();
  ctx.manifest.input_digests = inputs;
  ctx.manifest.created_utc = mp::cli::utc_timestamp();
  ctx.manifest.config = cfg.to_json();
  return ctx;
}

void finish_run(RunContext& ctx) {
  ctx.manifest.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                    ctx.started)
          .count();
  mp::cli::write_run_manifest(ctx.run_dir, ctx.manifest);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw mp::IoError("cannot write: " + path);
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
  if (!out) throw mp::IoError("failed writing: " + path);
}

models::ModelConfig depth_model_config(const mp::cli::RunConfig& cfg) {
  models::ModelConfig m;
  m.architecture = cfg.depth_architecture;
  m.base_width = cfg.base_width;
  m.seed = mp::derive_seed(cfg.seed, "depth-init");
  return m;
}

models::ModelConfig mask_model_config(const mp::cli::RunConfig& cfg) {
  models::ModelConfig m;
  m.architecture = cfg.mask_architecture;
  m.base_width = cfg.base_width;
  m.seed = mp::derive_seed(cfg.seed, "mask-init");
  return m;
}

const mp::synthgen::DatasetEntry& find_entry(const mp::synthgen::Dataset& ds,
                                             const std::string& id) {
  if (id.empty()) {
    if (ds.test.empty()) throw mp::AnalysisError("dataset has no test split");
    return ds.entries[ds.test.front()];
  }
  for (const auto& e : ds.entries) {
    if (e.id == id) return e;
  }
  throw mp::ConfigError("unknown sample id '" + id + "'");
}

mp::Image raw_view(const mp::synthgen::Dataset& ds,
                   const mp::synthgen::DatasetEntry& e) {
  return e.image.normalized ? mp::denormalize_zscore(e.image, ds.stats)
                            : e.image;
}

int cmd_gen_data(const mp::cli::RunConfig& cfg) {
  const std::string dir = cfg.dataset.out_dir;
  const std::string manifest_path = dataset_manifest_path(cfg);
  const std::string want_hash = mp::synthgen::dataset_config_hash(cfg.dataset);

  if (fs::exists(manifest_path)) {
    const auto j = nlohmann::json::parse(read_text(manifest_path));
    if (j.value("config_hash", "") == want_hash) {
      note("up-to-date: " + dir);
      emit_path(manifest_path);
      return 0;
    }
    throw mp::IoError("dataset directory " + dir +
                      " holds a dataset with a different config; choose "
                      "another dataset.dir");
  }
  fs::create_directories(dir);
  mp::cli::LockFile lock(dir);
  note("generating " + std::to_string(cfg.dataset.n_samples) + " samples (" +
       cfg.dataset.difficulty + ") into " + dir);
  mp::synthgen::build_dataset(cfg.dataset);
  emit_path(manifest_path);
  return 0;
}

int cmd_train_target(const mp::cli::RunConfig& cfg, bool resume) {
  require_dataset(cfg);
  const std::map<std::string, std::string> inputs = {
      {"dataset", mp::sha256_file_hex(dataset_manifest_path(cfg))}};
  RunContext ctx = open_run("train-target", cfg, inputs, resume);
  const std::string ckpt = ctx.run_dir + "/checkpoints/target.ckpt";
  if (ctx.up_to_date) {
    emit_path(ckpt);
    emit_path(ctx.run_dir + "/manifest.json");
    return 0;
  }
  mp::cli::LockFile lock(ctx.run_dir);

  const auto ds = mp::synthgen::load_dataset(cfg.dataset.out_dir);
  const auto train = mp::analysis::split_view(ds, ds.train);
  const auto val = mp::analysis::split_view(ds, ds.val);

  const auto ncfg = depth_model_config(cfg);
  auto n = models::build_depth_net(ncfg);

  mp::optimize::DepthTrainOptions opt;
  opt.combo = mp::optimize::combo_from_name(cfg.depth_combo);
  opt.epochs = cfg.depth_epochs;
  opt.lr = cfg.depth_lr;
  opt.weight_decay = cfg.weight_decay;
  opt.batch_size = cfg.batch_size;
  opt.seed = cfg.seed;

  note("training target network (" + cfg.depth_architecture + ", " +
       cfg.depth_combo + ", " + std::to_string(opt.epochs) + " epochs)");
  const auto report = mp::optimize::train_depth_net(*n, train, val, opt);

  fs::create_directories(ctx.run_dir + "/checkpoints");
  models::save_checkpoint(*n, ncfg, ckpt, opt.epochs);
  write_text(ctx.run_dir + "/report.json", report.to_json_string());
  report.write_csv(ctx.run_dir + "/train.csv");

  ctx.manifest.artifacts = {{"checkpoints/target.ckpt", ""},
                            {"report.json", ""},
                            {"train.csv", ""}};
  finish_run(ctx);
  emit_path(ckpt);
  emit_path(ctx.run_dir + "/manifest.json");
  return 0;
}

int cmd_train_mask(const mp::cli::RunConfig& cfg, bool resume) {
  require_dataset(cfg);
  if (cfg.target_checkpoint.empty() || !fs::exists(cfg.target_checkpoint)) {
    throw mp::ContractViolationError(
        "target checkpoint not found: '" + cfg.target_checkpoint +
        "' (train-target must complete before mask training)");
  }
  const auto info = models::read_checkpoint_info(cfg.target_checkpoint);
  if (info.digest.empty()) {
    throw mp::ContractViolationError(
        "target checkpoint carries no parameter digest: " +
        cfg.target_checkpoint);
  }
  const std::map<std::string, std::string> inputs = {
      {"dataset", mp::sha256_file_hex(dataset_manifest_path(cfg))},
      {"target_checkpoint", info.digest}};
  RunContext ctx = open_run("train-mask", cfg, inputs, resume);
  const std::string ckpt = ctx.run_dir + "/checkpoints/mask.ckpt";
  if (ctx.up_to_date) {
    emit_path(ckpt);
    emit_path(ctx.run_dir + "/manifest.json");
    return 0;
  }
  mp::cli::LockFile lock(ctx.run_dir);

  const auto ds = mp::synthgen::load_dataset(cfg.dataset.out_dir);
  const auto train = mp::analysis::split_view(ds, ds.train);

  auto n = models::load_depth_checkpoint(cfg.target_checkpoint);
  n->freeze();
  const auto gcfg = mask_model_config(cfg);
  auto g = models::build_mask_net(gcfg);

  mp::optimize::MaskTrainOptions opt;
  opt.lambda = cfg.lambda;
  opt.variant = mp::optimize::variant_from_name(cfg.variant);
  opt.epochs = cfg.epochs;
  opt.lr = cfg.lr;
  opt.weight_decay = cfg.weight_decay;
  opt.batch_size = cfg.batch_size;
  opt.binarize_eps = cfg.binarize_eps;
  opt.seed = cfg.seed;

  note("training mask network (" + cfg.mask_architecture + ", lambda " +
       mp::format_double(cfg.lambda) + ", " + std::to_string(opt.epochs) +
       " epochs)");
  const auto report = mp::optimize::train_mask_net(*g, *n, train, opt);

  fs::create_directories(ctx.run_dir + "/checkpoints");
  models::save_checkpoint(*g, gcfg, ckpt, opt.epochs);
  write_text(ctx.run_dir + "/report.json", report.to_json_string());
  report.write_csv(ctx.run_dir + "/train.csv");

  ctx.manifest.artifacts = {{"checkpoints/mask.ckpt", ""},
                            {"report.json", ""},
                            {"train.csv", ""}};
  finish_run(ctx);
  emit_path(ckpt);
  emit_path(ctx.run_dir + "/manifest.json");
  return 0;
}

int cmd_optimize_direct(const mp::cli::RunConfig& cfg, bool resume) {
  require_dataset(cfg);
  require_file(cfg.target_checkpoint, "target checkpoint");
  const std::map<std::string, std::string> inputs = {
      {"dataset", mp::sha256_file_hex(dataset_manifest_path(cfg))},
      {"target_checkpoint", mp::sha256_file_hex(cfg.target_checkpoint)}};
  RunContext ctx = open_run("optimize-direct", cfg, inputs, resume);
  const std::string result_path = ctx.run_dir + "/result.json";
  if (ctx.up_to_date) {
    emit_path(result_path);
    emit_path(ctx.run_dir + "/manifest.json");
    return 0;
  }
  mp::cli::LockFile lock(ctx.run_dir);

  const auto ds = mp::synthgen::load_dataset(cfg.dataset.out_dir);
  const auto& entry = find_entry(ds, cfg.direct_sample);
  auto n = models::load_depth_checkpoint(cfg.target_checkpoint);
  n->freeze();

  note("optimizing mask for sample " + entry.id + " (" +
       std::to_string(cfg.direct_steps) + " steps)");
  const auto result = mp::optimize::optimize_mask_direct(
      *n, entry.image, cfg.lambda, cfg.direct_steps, cfg.direct_lr);

  mp::save_mask_blob(ctx.run_dir + "/mask.bin", result.mask);
  {
    std::ostringstream csv;
    csv << "step,objective\n";
    for (std::size_t i = 0; i < result.trace.size(); ++i) {
      csv << i << ',' << mp::format_double(result.trace[i]) << '\n';
    }
    write_text(ctx.run_dir + "/trace.csv", csv.str());
  }
  const mp::Mask binary = mp::binarize(result.mask, cfg.binarize_eps);
  nlohmann::json j;
  j["sample"] = entry.id;
  j["lambda"] = cfg.lambda;
  j["steps"] = cfg.direct_steps;
  j["initial_objective"] = result.initial_objective;
  j["final_objective"] = result.final_objective;
  j["sparseness"] = mp::sparseness(binary).fraction_nonzero;
  write_text(result_path, j.dump(2));

  fs::create_directories(ctx.run_dir + "/figures");
  const mp::DepthMap yhat = n->predict(mp::apply_mask(entry.image, result.mask));
  mp::analysis::render_overlay(raw_view(ds, entry), result.mask, yhat,
                               entry.depth, cfg.colormap,
                               ctx.run_dir + "/figures/direct-" + entry.id +
                                   ".png");

  ctx.manifest.artifacts = {{"result.json", ""},
                            {"mask.bin", ""},
                            {"trace.csv", ""},
                            {"figures/direct-" + entry.id + ".png", ""}};
  finish_run(ctx);
  emit_path(result_path);
  emit_path(ctx.run_dir + "/manifest.json");
  return 0;
}

int cmd_sweep(const mp::cli::RunConfig& cfg, bool resume) {
  require_dataset(cfg);
  require_file(cfg.target_checkpoint, "target checkpoint");
  const std::map<std::string, std::string> inputs = {
      {"dataset", mp::sha256_file_hex(dataset_manifest_path(cfg))},
      {"target_checkpoint", mp::sha256_file_hex(cfg.target_checkpoint)}};
  RunContext ctx = open_run("sweep", cfg, inputs, resume);
  const std::string csv_path = ctx.run_dir + "/sweep.csv";
  if (ctx.up_to_date) {
    emit_path(csv_path);
    emit_path(ctx.run_dir + "/manifest.json");
    return 0;
  }
  mp::cli::LockFile lock(ctx.run_dir);

  const auto ds = mp::synthgen::load_dataset(cfg.dataset.out_dir);
  auto n = models::load_depth_checkpoint(cfg.target_checkpoint);
  n->freeze();

  mp::analysis::SweepOptions so;
  so.lambdas = cfg.sweep_lambdas;
  so.seeds = cfg.sweep_seeds;
  so.binarize_eps = cfg.binarize_eps;
  so.mask_config.architecture = cfg.mask_architecture;
  so.mask_config.base_width = cfg.base_width;
  so.train.variant = mp::optimize::variant_from_name(cfg.variant);
  so.train.epochs = cfg.epochs;
  so.train.lr = cfg.lr;
  so.train.weight_decay = cfg.weight_decay;
  so.train.batch_size = cfg.batch_size;

  note("sweeping " + std::to_string(so.lambdas.size()) + " lambdas x " +
       std::to_string(so.seeds.size()) + " seeds");
  const auto rows = mp::analysis::lambda_sweep(*n, ds, so);
  mp::analysis::write_sweep_csv(csv_path, rows);

  ctx.manifest.artifacts = {{"sweep.csv", ""}};
  finish_run(ctx);
  emit_path(csv_path);
  emit_path(ctx.run_dir + "/manifest.json");
  return 0;
}

int cmd_edge_baseline(const mp::cli::RunConfig& cfg, bool resume) {
  require_dataset(cfg);
  require_file(cfg.target_checkpoint, "target checkpoint");
  require_file(cfg.sweep_csv, "sweep csv");
  const std::map<std::string, std::string> inputs = {
      {"dataset", mp::sha256_file_hex(dataset_manifest_path(cfg))},
      {"target_checkpoint", mp::sha256_file_hex(cfg.target_checkpoint)},
      {"sweep_csv", mp::sha256_file_hex(cfg.sweep_csv)}};
  RunContext ctx = open_run("edge-baseline", cfg, inputs, resume);
  const std::string report_path = ctx.run_dir + "/edge_baseline.json";
  if (ctx.up_to_date) {
    emit_path(report_path);
    emit_path(ctx.run_dir + "/manifest.json");
    return 0;
  }
  mp::cli::LockFile lock(ctx.run_dir);

  const auto ds = mp::synthgen::load_dataset(cfg.dataset.out_dir);
  auto n = models::load_depth_checkpoint(cfg.target_checkpoint);
  n->freeze();
  const auto learned = mp::analysis::read_sweep_csv(cfg.sweep_csv);

  const auto report =
      mp::analysis::edge_baseline(*n, ds, cfg.edge_thresholds, learned);
  write_text(report_path, report.to_json_string());

  ctx.manifest.artifacts = {{"edge_baseline.json", ""}};
  finish_run(ctx);
  emit_path(report_path);
  emit_path(ctx.run_dir + "/manifest.json");
  return 0;
}

int cmd_ablation(const mp::cli::RunConfig& cfg, bool resume) {
  require_dataset(cfg);
  const std::map<std::string, std::string> inputs = {
      {"dataset", mp::sha256_file_hex(dataset_manifest_path(cfg))}};
  RunContext ctx = open_run("ablation", cfg, inputs, resume);
  const std::string report_path = ctx.run_dir + "/ablation.json";
  if (ctx.up_to_date) {
    emit_path(report_path);
    emit_path(ctx.run_dir + "/manifest.json");
    return 0;
  }
  mp::cli::LockFile lock(ctx.run_dir);

  const auto ds = mp::synthgen::load_dataset(cfg.dataset.out_dir);

  mp::analysis::AblationOptions ao;
  ao.lambda = cfg.lambda;
  ao.seed = cfg.seed;
  ao.binarize_eps = cfg.binarize_eps;
  ao.depth_config.architecture = cfg.depth_architecture;
  ao.depth_config.base_width = cfg.base_width;
  ao.mask_config.architecture = cfg.mask_architecture;
  ao.mask_config.base_width = cfg.base_width;
  ao.depth_train.epochs = cfg.depth_epochs;
  ao.depth_train.lr = cfg.depth_lr;
  ao.depth_train.weight_decay = cfg.weight_decay;
  ao.depth_train.batch_size = cfg.batch_size;
  ao.mask_train.epochs = cfg.epochs;
  ao.mask_train.lr = cfg.lr;
  ao.mask_train.weight_decay = cfg.weight_decay;
  ao.mask_train.batch_size = cfg.batch_size;
  ao.figure_dir = ctx.run_dir + "/figures";
  ao.colormap = cfg.colormap;
  fs::create_directories(ao.figure_dir);

  note("running loss ablation (3 target networks + 3 mask networks)");
  const auto report = mp::analysis::loss_ablation(ds, ao);
  write_text(report_path, report.to_json_string());

  ctx.manifest.artifacts.push_back({"ablation.json", ""});
  for (const auto& row : report.rows) {
    ctx.manifest.artifacts.push_back(
        {fs::path(row.overlay_path).lexically_relative(ctx.run_dir).string(),
         ""});
  }
  finish_run(ctx);
  emit_path(report_path);
  emit_path(ctx.run_dir + "/manifest.json");
  return 0;
}

int cmd_visualize(const mp::cli::RunConfig& cfg, bool resume) {
  require_dataset(cfg);
  require_file(cfg.target_checkpoint, "target checkpoint");
  require_file(cfg.mask_checkpoint, "mask checkpoint");
  const std::map<std::string, std::string> inputs = {
      {"dataset", mp::sha256_file_hex(dataset_manifest_path(cfg))},
      {"target_checkpoint", mp::sha256_file_hex(cfg.target_checkpoint)},
      {"mask_checkpoint", mp::sha256_file_hex(cfg.mask_checkpoint)}};
  RunContext ctx = open_run("visualize", cfg, inputs, resume);
  if (ctx.up_to_date) {
    emit_path(ctx.run_dir + "/manifest.json");
    return 0;
  }
  mp::cli::LockFile lock(ctx.run_dir);

  const auto ds = mp::synthgen::load_dataset(cfg.dataset.out_dir);
  const auto& entry = find_entry(ds, cfg.visualize_input);
  auto n = models::load_depth_checkpoint(cfg.target_checkpoint);
  n->freeze();
  auto g = models::load_mask_checkpoint(cfg.mask_checkpoint);

  const mp::Mask m = g->predict(entry.image);
  const mp::DepthMap yhat = n->predict(mp::apply_mask(entry.image, m));

  fs::create_directories(ctx.run_dir + "/figures");
  const std::string png = ctx.run_dir + "/figures/" + entry.id + ".png";
  mp::analysis::render_overlay(raw_view(ds, entry), m, yhat, entry.depth,
                               cfg.colormap, png);

  const auto stats = mp::analysis::mask_statistics(m, entry.cues);
  const std::string stats_path = ctx.run_dir + "/mask_stats.json";
  write_text(stats_path, stats.to_json_string());

  ctx.manifest.artifacts = {
      {"figures/" + entry.id + ".png", ""}, {"mask_stats.json", ""}};
  finish_run(ctx);
  emit_path(png);
  emit_path(stats_path);
  emit_path(ctx.run_dir + "/manifest.json");
  return 0;
}

int cmd_verify() {
  const auto results = mp::selfcheck::run_all();
  for (const auto& r : results) {
    if (r.passed) {
      std::cout << "PASS " << r.name << "\n";
    } else {
      std::cout << "FAIL " << r.name << ": " << r.detail << "\n";
    }
  }
  const bool ok = mp::selfcheck::all_passed(results);
  note(ok ? "all checks passed" : "some checks FAILED");
  return ok ? 0 : 1;
}

int run(int argc, char** argv) {
  CLI::App app{"sparse-mask inspection of depth estimation networks"};
  app.require_subcommand(1);
  Flags f;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config_path, "TOML config file");
    sub->add_flag("--resume", f.resume, "finish an incomplete run directory");
    return sub;
  };

  auto* gen = add_common(app.add_subcommand(
      "gen-data", "generate a synthetic dataset with ground-truth depth"));
  gen->add_option("--seed", f.seed);
  gen->add_option("--n", f.n, "sample count");
  gen->add_option("--out", f.out, "dataset directory");
  gen->add_option("--height", f.height);
  gen->add_option("--width", f.width);
  gen->add_option("--difficulty", f.difficulty, "planes|corridor|cluttered");

  auto* tt = add_common(app.add_subcommand(
      "train-target", "train the depth network on a dataset"));
  tt->add_option("--data", f.data, "dataset directory");
  tt->add_option("--out", f.out, "runs directory");
  tt->add_option("--seed", f.seed);
  tt->add_option("--arch", f.arch, "depth architecture id");
  tt->add_option("--base-width", f.base_width);
  tt->add_option("--combo", f.combo, "d|d+g|d+g+n");
  tt->add_option("--epochs", f.depth_epochs);
  tt->add_option("--lr", f.lr);
  tt->add_option("--wd", f.wd);
  tt->add_option("--batch", f.batch);

  auto* tm = add_common(app.add_subcommand(
      "train-mask", "train the mask network against a frozen target"));
  tm->add_option("--data", f.data);
  tm->add_option("--out", f.out);
  tm->add_option("--target", f.target, "target checkpoint path");
  tm->add_option("--seed", f.seed);
  tm->add_option("--arch", f.arch, "mask architecture id");
  tm->add_option("--base-width", f.base_width);
  tm->add_option("--lambda", f.lambda);
  tm->add_option("--variant", f.variant, "preserve|delete");
  tm->add_option("--epochs", f.epochs);
  tm->add_option("--lr", f.lr);
  tm->add_option("--wd", f.wd);
  tm->add_option("--eps", f.eps, "binarization threshold");
  tm->add_option("--batch", f.batch);

  auto* od = add_common(app.add_subcommand(
      "optimize-direct", "optimize a single-image mask directly"));
  od->add_option("--data", f.data);
  od->add_option("--out", f.out);
  od->add_option("--target", f.target);
  od->add_option("--lambda", f.lambda);
  od->add_option("--steps", f.steps);
  od->add_option("--lr", f.lr);
  od->add_option("--input", f.input, "sample id");

  auto* sw = add_common(app.add_subcommand(
      "sweep", "train mask networks over a lambda grid"));
  sw->add_option("--data", f.data);
  sw->add_option("--out", f.out);
  sw->add_option("--target", f.target);
  sw->add_option("--lambdas", f.lambdas)->delimiter(',');
  sw->add_option("--seeds", f.seeds)->delimiter(',');
  sw->add_option("--epochs", f.epochs);
  sw->add_option("--lr", f.lr);
  sw->add_option("--wd", f.wd);
  sw->add_option("--eps", f.eps);
  sw->add_option("--batch", f.batch);

  auto* eb = add_common(app.add_subcommand(
      "edge-baseline", "compare learned masks against Sobel edge masks"));
  eb->add_option("--data", f.data);
  eb->add_option("--out", f.out);
  eb->add_option("--target", f.target);
  eb->add_option("--sweep-csv", f.sweep_csv, "learned-mask sweep rows");
  eb->add_option("--thresholds", f.thresholds)->delimiter(',');

  auto* ab = add_common(app.add_subcommand(
      "ablation", "train targets under each loss combo and compare masks"));
  ab->add_option("--data", f.data);
  ab->add_option("--out", f.out);
  ab->add_option("--seed", f.seed);
  ab->add_option("--lambda", f.lambda);
  ab->add_option("--epochs", f.epochs, "mask training epochs");
  ab->add_option("--depth-epochs", f.depth_epochs);

  auto* vz = add_common(app.add_subcommand(
      "visualize", "render input/mask/prediction/truth panels"));
  vz->add_option("--data", f.data);
  vz->add_option("--out", f.out);
  vz->add_option("--target", f.target);
  vz->add_option("--mask", f.mask, "mask checkpoint path");
  vz->add_option("--input", f.input, "sample id");
  vz->add_option("--colormap", f.colormap, "gray|heat");

  auto* vf =
      app.add_subcommand("verify", "run the library invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (vf->parsed()) return cmd_verify();

  mp::cli::RunConfig cfg = base_config(f);

  if (gen->parsed()) {
    if (passed(gen, "--seed")) cfg.dataset.seed = f.seed;
    if (passed(gen, "--n")) cfg.dataset.n_samples = f.n;
    if (passed(gen, "--out")) cfg.dataset.out_dir = f.out;
    if (passed(gen, "--height")) cfg.dataset.height = f.height;
    if (passed(gen, "--width")) cfg.dataset.width = f.width;
    if (passed(gen, "--difficulty")) cfg.dataset.difficulty = f.difficulty;
    cfg.validate();
    return cmd_gen_data(cfg);
  }
  if (tt->parsed()) {
    if (passed(tt, "--data")) cfg.dataset.out_dir = f.data;
    if (passed(tt, "--out")) cfg.out_dir = f.out;
    if (passed(tt, "--seed")) cfg.seed = f.seed;
    if (passed(tt, "--arch")) cfg.depth_architecture = f.arch;
    if (passed(tt, "--base-width")) cfg.base_width = f.base_width;
    if (passed(tt, "--combo")) cfg.depth_combo = f.combo;
    if (passed(tt, "--epochs")) cfg.depth_epochs = f.depth_epochs;
    if (passed(tt, "--lr")) cfg.depth_lr = f.lr;
    if (passed(tt, "--wd")) cfg.weight_decay = f.wd;
    if (passed(tt, "--batch")) cfg.batch_size = f.batch;
    cfg.validate();
    return cmd_train_target(cfg, f.resume);
  }
  if (tm->parsed()) {
    if (passed(tm, "--data")) cfg.dataset.out_dir = f.data;
    if (passed(tm, "--out")) cfg.out_dir = f.out;
    if (passed(tm, "--target")) cfg.target_checkpoint = f.target;
    if (passed(tm, "--seed")) cfg.seed = f.seed;
    if (passed(tm, "--arch")) cfg.mask_architecture = f.arch;
    if (passed(tm, "--base-width")) cfg.base_width = f.base_width;
    if (passed(tm, "--lambda")) cfg.lambda = f.lambda;
    if (passed(tm, "--variant")) cfg.variant = f.variant;
    if (passed(tm, "--epochs")) cfg.epochs = f.epochs;
    if (passed(tm, "--lr")) cfg.lr = f.lr;
    if (passed(tm, "--wd")) cfg.weight_decay = f.wd;
    if (passed(tm, "--eps")) cfg.binarize_eps = f.eps;
    if (passed(tm, "--batch")) cfg.batch_size = f.batch;
    cfg.validate();
    return cmd_train_mask(cfg, f.resume);
  }
  if (od->parsed()) {
    if (passed(od, "--data")) cfg.dataset.out_dir = f.data;
    if (passed(od, "--out")) cfg.out_dir = f.out;
    if (passed(od, "--target")) cfg.target_checkpoint = f.target;
    if (passed(od, "--lambda")) cfg.lambda = f.lambda;
    if (passed(od, "--steps")) cfg.direct_steps = f.steps;
    if (passed(od, "--lr")) cfg.direct_lr = f.lr;
    if (passed(od, "--input")) cfg.direct_sample = f.input;
    cfg.validate();
    return cmd_optimize_direct(cfg, f.resume);
  }
  if (sw->parsed()) {
    if (passed(sw, "--data")) cfg.dataset.out_dir = f.data;
    if (passed(sw, "--out")) cfg.out_dir = f.out;
    if (passed(sw, "--target")) cfg.target_checkpoint = f.target;
    if (passed(sw, "--lambdas")) cfg.sweep_lambdas = f.lambdas;
    if (passed(sw, "--seeds")) cfg.sweep_seeds = f.seeds;
    if (passed(sw, "--epochs")) cfg.epochs = f.epochs;
    if (passed(sw, "--lr")) cfg.lr = f.lr;
    if (passed(sw, "--wd")) cfg.weight_decay = f.wd;
    if (passed(sw, "--eps")) cfg.binarize_eps = f.eps;
    if (passed(sw, "--batch")) cfg.batch_size = f.batch;
    cfg.validate();
    return cmd_sweep(cfg, f.resume);
  }
  if (eb->parsed()) {
    if (passed(eb, "--data")) cfg.dataset.out_dir = f.data;
    if (passed(eb, "--out")) cfg.out_dir = f.out;
    if (passed(eb, "--target")) cfg.target_checkpoint = f.target;
    if (passed(eb, "--sweep-csv")) cfg.sweep_csv = f.sweep_csv;
    if (passed(eb, "--thresholds")) cfg.edge_thresholds = f.thresholds;
    cfg.validate();
    return cmd_edge_baseline(cfg, f.resume);
  }
  if (ab->parsed()) {
    if (passed(ab, "--data")) cfg.dataset.out_dir = f.data;
    if (passed(ab, "--out")) cfg.out_dir = f.out;
    if (passed(ab, "--seed")) cfg.seed = f.seed;
    if (passed(ab, "--lambda")) cfg.lambda = f.lambda;
    if (passed(ab, "--epochs")) cfg.epochs = f.epochs;
    if (passed(ab, "--depth-epochs")) cfg.depth_epochs = f.depth_epochs;
    cfg.validate();
    return cmd_ablation(cfg, f.resume);
  }
  if (vz->parsed()) {
    if (passed(vz, "--data")) cfg.dataset.out_dir = f.data;
    if (passed(vz, "--out")) cfg.out_dir = f.out;
    if (passed(vz, "--target")) cfg.target_checkpoint = f.target;
    if (passed(vz, "--mask")) cfg.mask_checkpoint = f.mask;
    if (passed(vz, "--input")) cfg.visualize_input = f.input;
    if (passed(vz, "--colormap")) cfg.colormap = f.colormap;
    cfg.validate();
    return cmd_visualize(cfg, f.resume);
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const mp::DivergenceError& e) {
    std::cerr << "error (divergence): " << e.what() << "\n";
    return 4;
  } catch (const mp::ContractViolationError& e) {
    std::cerr << "error (freeze contract): " << e.what() << "\n";
    return 5;
  } catch (const mp::MissingDependencyError& e) {
    std::cerr << "error (missing dependency): " << e.what() << "\n";
    return 6;
  } catch (const mp::IoError& e) {
    std::cerr << "error (io): " << e.what() << "\n";
    return 3;
  } catch (const mp::Error& e) {
    std::cerr << "error (config): " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
