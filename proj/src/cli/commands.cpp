#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "dnas3d/cam.hpp"
#include "dnas3d/checkpoint.hpp"
#include "dnas3d/cli.hpp"
#include "dnas3d/errors.hpp"
#include "dnas3d/parallel.hpp"
#include "dnas3d/search.hpp"

namespace dnas3d::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Raised for values that parse but make no sense; maps to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void log(const std::string& msg) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%H:%M:%S", std::localtime(&now));
  std::cout << '[' << stamp << "] " << msg << std::endl;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("write failed: " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + " is not valid JSON: " + e.what());
  }
}

// The resolved options of a command are echoed to <out>/config.json before
// any work starts; --replay reads such a file back instead of the flags.
void write_snapshot(const fs::path& out, const std::string& command, const json& options) {
  ensure_dir(out);
  write_text(out / "config.json", json{{"command", command}, {"options", options}}.dump(2) + "\n");
}

json replay_options(const std::string& path, const std::string& command) {
  const json j = read_json(path);
  if (j.value("command", "") != command)
    throw UsageError("replay file " + path + " is for command '" + j.value("command", "?") + "', not '" + command + "'");
  return j.at("options");
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
  SynthOptions options;
  std::string out;
};

json to_json(const SynthArgs& a) {
  const auto& o = a.options;
  return {{"out", a.out},           {"classes", o.num_classes},       {"per_class", o.n_per_class},
          {"shape", o.shape},       {"seed", o.seed},                 {"noise", o.noise_sigma},
          {"amplitude", o.blob_amplitude}, {"radius_min", o.radius_min}, {"radius_max", o.radius_max},
          {"offset", o.offset_range}, {"test_fraction", o.test_fraction}};
}

SynthArgs synth_from_json(const json& j) {
  SynthArgs a;
  auto& o = a.options;
  a.out = j.at("out").get<std::string>();
  o.num_classes = j.at("classes").get<int>();
  o.n_per_class = j.at("per_class").get<int>();
  o.shape = j.at("shape").get<std::array<int, 3>>();
  o.seed = j.at("seed").get<std::uint64_t>();
  o.noise_sigma = j.at("noise").get<double>();
  o.blob_amplitude = j.at("amplitude").get<double>();
  o.radius_min = j.at("radius_min").get<double>();
  o.radius_max = j.at("radius_max").get<double>();
  o.offset_range = j.at("offset").get<double>();
  o.test_fraction = j.at("test_fraction").get<double>();
  return a;
}

void run_synth(const SynthArgs& a) {
  write_snapshot(a.out, "synth", to_json(a));
  auto samples = synth_dataset(a.options);
  write_synth_dataset(a.out, samples, a.options.num_classes);
  std::size_t test = 0;
  for (const auto& s : samples) test += s.split == Split::test;
  log("wrote " + std::to_string(samples.size()) + " volumes (" + std::to_string(samples.size() - test) +
      " train / " + std::to_string(test) + " test) to " + a.out);
}

// ---- shared data plumbing -------------------------------------------------

TransformConfig transforms_for(const SupernetConfig& config, int resize, bool flip) {
  TransformConfig t;
  t.target_slices = config.input_shape[0];
  t.center_crop = {config.input_shape[1], config.input_shape[2]};
  t.resize = t.center_crop;
  if (resize > 0) t.resize = {resize, resize};
  t.train_random_flip = flip;
  return t;
}

std::vector<Volume> load_pool(const std::string& manifest_path, Split split, Manifest* manifest_out = nullptr) {
  Manifest m = load_manifest(manifest_path);
  auto vols = load_split(m, split);
  if (vols.empty()) throw ConfigError("manifest " + manifest_path + " has no " + to_string(split) + " volumes");
  if (manifest_out) *manifest_out = std::move(m);
  return vols;
}

// ---- search ---------------------------------------------------------------

struct SearchArgs {
  std::string manifest, out;
  std::string preset = "small";
  SupernetConfig net;
  SearchConfig search;
  int resize = 0;
  bool flip = true;
};

json to_json(const SearchArgs& a) {
  const auto& s = a.search;
  return {{"manifest", a.manifest},
          {"out", a.out},
          {"preset", a.preset},
          {"supernet", dnas3d::to_json(a.net)},
          {"resize", a.resize},
          {"flip", a.flip},
          {"search",
           {{"epochs", s.epochs},
            {"batch_size", s.batch_size},
            {"tau_start", s.tau_start},
            {"tau_end", s.tau_end},
            {"alpha_lr", s.alpha_lr},
            {"weight_lr", s.weight_lr},
            {"weight_momentum", s.weight_momentum},
            {"weight_decay", s.weight_decay},
            {"val_fraction", s.val_fraction},
            {"resample_per_phase", s.resample_per_phase},
            {"seed", s.seed}}}};
}

SearchArgs search_from_json(const json& j) {
  SearchArgs a;
  a.manifest = j.at("manifest").get<std::string>();
  a.out = j.at("out").get<std::string>();
  a.preset = j.at("preset").get<std::string>();
  a.net = supernet_config_from_json(j.at("supernet"));
  a.resize = j.at("resize").get<int>();
  a.flip = j.at("flip").get<bool>();
  const auto& s = j.at("search");
  a.search.epochs = s.at("epochs").get<int>();
  a.search.batch_size = s.at("batch_size").get<int>();
  a.search.tau_start = s.at("tau_start").get<double>();
  a.search.tau_end = s.at("tau_end").get<double>();
  a.search.alpha_lr = s.at("alpha_lr").get<double>();
  a.search.weight_lr = s.at("weight_lr").get<double>();
  a.search.weight_momentum = s.at("weight_momentum").get<double>();
  a.search.weight_decay = s.at("weight_decay").get<double>();
  a.search.val_fraction = s.at("val_fraction").get<double>();
  a.search.resample_per_phase = s.at("resample_per_phase").get<bool>();
  a.search.seed = s.at("seed").get<std::uint64_t>();
  return a;
}

void run_search_command(SearchArgs a) {
  a.net.validate();
  a.search.validate();
  write_snapshot(a.out, "search", to_json(a));
  Manifest manifest;
  auto pool = load_pool(a.manifest, Split::train, &manifest);
  if (manifest.num_classes() != a.net.num_classes)
    throw ConfigError("manifest has " + std::to_string(manifest.num_classes()) + " classes, network expects " +
                      std::to_string(a.net.num_classes));
  const auto transforms = transforms_for(a.net, a.resize, a.flip);
  log("search space: " + count_search_space(a.net).str() + " architectures over " +
      std::to_string(a.net.num_positions()) + " positions");
  Supernet net(a.net, a.search.seed);
  auto history = run_search(net, pool, transforms, a.search, [](const SearchRecord& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "epoch %d tau %.3f train_loss %.4f val_loss %.4f val_acc %.4f arch %s", r.epoch,
                  r.tau, r.train_loss, r.val_loss, r.val_accuracy, join(r.choices).c_str());
    log(buf);
  });
  save_history((fs::path(a.out) / "history.json").string(), history);
  if (!history.records.empty()) {
    const auto best = select_top_k(history, 1).front();
    save_arch((fs::path(a.out) / "best_arch.json").string(), best);
    log("best architecture " + join(best.choices) + " from epoch " + std::to_string(best.provenance.search_epoch));
  }
}

// ---- shortlist ------------------------------------------------------------

struct ShortlistArgs {
  std::string history, manifest, out;
  int top_k = 10;
  int resize = 0;
  bool flip = true;
  ShortlistConfig config;
};

json to_json(const ShortlistArgs& a) {
  return {{"history", a.history},
          {"manifest", a.manifest},
          {"out", a.out},
          {"top_k", a.top_k},
          {"resize", a.resize},
          {"flip", a.flip},
          {"batches", a.config.batches_per_arch},
          {"batch_size", a.config.batch_size},
          {"lr", a.config.learning_rate},
          {"val_fraction", a.config.val_fraction},
          {"seed", a.config.seed}};
}

ShortlistArgs shortlist_from_json(const json& j) {
  ShortlistArgs a;
  a.history = j.at("history").get<std::string>();
  a.manifest = j.at("manifest").get<std::string>();
  a.out = j.at("out").get<std::string>();
  a.top_k = j.at("top_k").get<int>();
  a.resize = j.at("resize").get<int>();
  a.flip = j.at("flip").get<bool>();
  a.config.batches_per_arch = j.at("batches").get<int>();
  a.config.batch_size = j.at("batch_size").get<int>();
  a.config.learning_rate = j.at("lr").get<double>();
  a.config.val_fraction = j.at("val_fraction").get<double>();
  a.config.seed = j.at("seed").get<std::uint64_t>();
  return a;
}

void run_shortlist(const ShortlistArgs& a) {
  if (a.top_k < 1) throw UsageError("--top-k must be >= 1");
  write_snapshot(a.out, "shortlist", to_json(a));
  const auto history = load_history(a.history);
  const auto top = select_top_k(history, a.top_k);
  ShortlistResult result;
  if (top.size() == 1) {
    log("single candidate; skipping comparative training");
    result = {top.front(), top};
  } else {
    if (a.manifest.empty()) throw UsageError("--manifest is required when more than one candidate is shortlisted");
    auto pool = load_pool(a.manifest, Split::train);
    log("training " + std::to_string(top.size()) + " candidates for " + std::to_string(a.config.batches_per_arch) +
        " batches each");
    result = shortlist_train(top, pool, transforms_for(history.config, a.resize, a.flip), a.config);
  }
  json cands = json::array();
  for (const auto& c : result.candidates) {
    cands.push_back(dnas3d::to_json(c));
    char buf[160];
    std::snprintf(buf, sizeof buf, "candidate %s (epoch %d): val_acc %.4f val_loss %.4f", join(c.choices).c_str(),
                  c.provenance.search_epoch, c.provenance.val_accuracy, c.provenance.val_loss);
    log(buf);
  }
  write_text(fs::path(a.out) / "shortlist.json", cands.dump(2) + "\n");
  save_arch((fs::path(a.out) / "best_arch.json").string(), result.best);
  log("winner " + join(result.best.choices));
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string arch, manifest, out, checkpoint;
  bool eval_only = false;
  int resize = 0;
  bool flip = true;
  TrainConfig config;
};

json to_json(const TrainArgs& a) {
  const auto& c = a.config;
  return {{"arch", a.arch},
          {"manifest", a.manifest},
          {"out", a.out},
          {"checkpoint", a.checkpoint},
          {"eval_only", a.eval_only},
          {"resize", a.resize},
          {"flip", a.flip},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.learning_rate},
          {"lr_min", c.lr_min},
          {"weight_decay", c.weight_decay},
          {"positive_class", c.positive_class},
          {"seed", c.seed}};
}

TrainArgs train_from_json(const json& j) {
  TrainArgs a;
  a.arch = j.at("arch").get<std::string>();
  a.manifest = j.at("manifest").get<std::string>();
  a.out = j.at("out").get<std::string>();
  a.checkpoint = j.at("checkpoint").get<std::string>();
  a.eval_only = j.at("eval_only").get<bool>();
  a.resize = j.at("resize").get<int>();
  a.flip = j.at("flip").get<bool>();
  auto& c = a.config;
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.learning_rate = j.at("lr").get<double>();
  c.lr_min = j.at("lr_min").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.positive_class = j.at("positive_class").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return a;
}

void write_reports(const fs::path& out, const MetricsReport& report) {
  write_text(out / "metrics.txt", format_report_text(report));
  write_text(out / "metrics.csv", report_csv_header() + "\n" + format_report_csv(report) + "\n");
}

void run_train(const TrainArgs& a) {
  if (a.eval_only && a.checkpoint.empty()) throw UsageError("--eval-only requires --checkpoint");
  if (!a.eval_only && a.arch.empty()) throw UsageError("--arch is required unless --eval-only is given");
  if (a.config.batch_size < 1) throw UsageError("--batch-size must be >= 1");
  write_snapshot(a.out, "train", to_json(a));
  Manifest manifest;
  auto test = load_pool(a.manifest, Split::test, &manifest);
  if (a.config.positive_class < 0 || a.config.positive_class >= manifest.num_classes())
    throw UsageError("--positive-class must lie in [0, " + std::to_string(manifest.num_classes() - 1) + "]");
  const fs::path out(a.out);

  if (a.eval_only) {
    auto [net, ck] = load_checkpoint(a.checkpoint);
    const auto eval = evaluate(net, test, ck.transforms, a.config.batch_size);
    const auto report = metrics_for(net, eval, a.config.positive_class);
    write_reports(out, report);
    std::cout << format_report_text(report);
    return;
  }

  const auto arch = load_arch(a.arch);
  if (arch.config.num_classes != manifest.num_classes())
    throw ConfigError("architecture has " + std::to_string(arch.config.num_classes) + " classes, manifest has " +
                      std::to_string(manifest.num_classes()));
  auto train = load_pool(a.manifest, Split::train);
  const auto transforms = transforms_for(arch.config, a.resize, a.flip);
  std::ofstream train_log(out / "train_log.csv", std::ios::binary);
  if (!train_log) throw IoError("cannot write " + (out / "train_log.csv").string());
  train_log << "epoch,loss,lr\n";
  train_log.precision(9);
  auto result = train_child(arch, train, test, transforms, a.config, [&](int epoch, double loss, double lr) {
    train_log << epoch << ',' << loss << ',' << lr << '\n' << std::flush;
    char buf[96];
    std::snprintf(buf, sizeof buf, "epoch %d loss %.4f lr %.3g", epoch, loss, lr);
    log(buf);
  });
  save_checkpoint(out / "model.ckpt", result.model, transforms, manifest.class_names);
  write_reports(out, result.report);
  std::cout << format_report_text(result.report);
}

// ---- cam ------------------------------------------------------------------

struct CamArgs {
  std::string checkpoint, out;
  std::vector<std::string> volumes;
  int class_index = -1;  // predicted class
  bool nearest = false;
};

json to_json(const CamArgs& a) {
  return {{"checkpoint", a.checkpoint},
          {"out", a.out},
          {"volumes", a.volumes},
          {"class", a.class_index},
          {"nearest", a.nearest}};
}

CamArgs cam_from_json(const json& j) {
  CamArgs a;
  a.checkpoint = j.at("checkpoint").get<std::string>();
  a.out = j.at("out").get<std::string>();
  a.volumes = j.at("volumes").get<std::vector<std::string>>();
  a.class_index = j.at("class").get<int>();
  a.nearest = j.at("nearest").get<bool>();
  return a;
}

void run_cam(const CamArgs& a) {
  if (a.volumes.empty()) throw UsageError("at least one --volume is required");
  auto [net, ck] = load_checkpoint(a.checkpoint);
  const int classes = ck.arch.config.num_classes;
  if (a.class_index < -1 || a.class_index >= classes)
    throw UsageError("--class " + std::to_string(a.class_index) + " is out of range [0, " +
                     std::to_string(classes - 1) + "]");
  write_snapshot(a.out, "cam", to_json(a));
  Rng unused(0);
  for (const auto& path : a.volumes) {
    Volume v = load_volume(path);
    v.id = fs::path(path).stem().string();
    const Array input = preprocess(v, ck.transforms, Split::test, unused);
    const auto capture = capture_features(net, input);
    int cls = a.class_index;
    if (cls < 0) {
      const auto lg = capture.logits.data();
      cls = int(std::max_element(lg.begin(), lg.end()) - lg.begin());
    }
    auto map = compute_cam(capture, cls);
    map.volume_id = v.id;
    const Dims3 dims{input.dim(1), input.dim(2), input.dim(3)};
    const auto up = upsample_cam(map, dims, a.nearest ? UpsampleMode::nearest : UpsampleMode::trilinear);
    const auto files = export_overlays(up, input, a.out);
    const std::string name = std::size_t(cls) < ck.class_names.size() ? ck.class_names[std::size_t(cls)]
                                                                      : "class" + std::to_string(cls);
    log(v.id + ": class " + std::to_string(cls) + " (" + name + "), " + std::to_string(files.size()) +
        " files written");
  }
}

// ---- dispatch -------------------------------------------------------------

template <typename Args>
Args resolve(const std::string& replay, const std::string& command, Args flags, Args (*from_json)(const json&)) {
  if (replay.empty()) return flags;
  try {
    return from_json(replay_options(replay, command));
  } catch (const json::exception& e) {
    throw ConfigError("malformed replay file " + replay + ": " + e.what());
  }
}

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"Differentiable architecture search for 3D volume classification"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "OpenMP threads (0 keeps the runtime default)")->check(CLI::NonNegativeNumber);

  std::string replay;
  const auto add_replay = [&](CLI::App* sub) {
    sub->add_option("--replay", replay, "Rerun from a config.json snapshot, ignoring other flags");
  };

  SynthArgs synth;
  auto* s_synth = app.add_subcommand("synth", "Generate a synthetic blob-counting dataset");
  s_synth->add_option("--out", synth.out, "Output directory");
  s_synth->add_option("--classes", synth.options.num_classes, "Number of classes (2 or 3)")->capture_default_str();
  s_synth->add_option("--per-class", synth.options.n_per_class, "Volumes per class")->capture_default_str();
  s_synth->add_option("--seed", synth.options.seed)->capture_default_str();
  s_synth->add_option("--shape", synth.options.shape, "Slices, height, width")->capture_default_str();
  s_synth->add_option("--noise", synth.options.noise_sigma)->capture_default_str();
  s_synth->add_option("--amplitude", synth.options.blob_amplitude)->capture_default_str();
  s_synth->add_option("--radius-min", synth.options.radius_min)->capture_default_str();
  s_synth->add_option("--radius-max", synth.options.radius_max)->capture_default_str();
  s_synth->add_option("--offset", synth.options.offset_range, "Per-volume intensity offset range")->capture_default_str();
  s_synth->add_option("--test-fraction", synth.options.test_fraction)->capture_default_str();
  add_replay(s_synth);

  SearchArgs search;
  std::vector<int> blocks, channels, stride2;
  int stem = 0, slices = 16, size = 64;
  auto* s_search = app.add_subcommand("search", "Run the Gumbel-softmax architecture search");
  s_search->add_option("--manifest", search.manifest, "Dataset manifest.csv");
  s_search->add_option("--out", search.out, "Output directory");
  s_search->add_option("--epochs", search.search.epochs)->capture_default_str();
  s_search->add_option("--seed", search.search.seed)->capture_default_str();
  s_search->add_option("--preset", search.preset, "Channel preset: small or large")->capture_default_str();
  s_search->add_option("--blocks", blocks, "Blocks per cell, e.g. 2,2,1")->delimiter(',');
  s_search->add_option("--channels", channels, "Channels per cell (overrides --preset)")->delimiter(',');
  s_search->add_option("--stride2", stride2, "Indices of cells that downsample")->delimiter(',');
  s_search->add_option("--stem-channels", stem);
  s_search->add_option("--classes", search.net.num_classes)->capture_default_str();
  s_search->add_option("--slices", slices, "Slices per scan after sampling")->capture_default_str();
  s_search->add_option("--size", size, "Input height and width after cropping")->capture_default_str();
  s_search->add_option("--resize", search.resize, "Resize before cropping (default: --size)");
  s_search->add_flag("!--no-flip", search.flip, "Disable random training flips");
  s_search->add_option("--batch-size", search.search.batch_size)->capture_default_str();
  s_search->add_option("--tau-start", search.search.tau_start)->capture_default_str();
  s_search->add_option("--tau-end", search.search.tau_end)->capture_default_str();
  s_search->add_option("--alpha-lr", search.search.alpha_lr)->capture_default_str();
  s_search->add_option("--weight-lr", search.search.weight_lr)->capture_default_str();
  s_search->add_option("--val-fraction", search.search.val_fraction)->capture_default_str();
  add_replay(s_search);

  ShortlistArgs shortlist;
  auto* s_short = app.add_subcommand("shortlist", "Train the top-k searched architectures briefly and keep the best");
  s_short->add_option("--history", shortlist.history, "history.json from search");
  s_short->add_option("--manifest", shortlist.manifest, "Dataset manifest.csv");
  s_short->add_option("--out", shortlist.out, "Output directory");
  s_short->add_option("--top-k", shortlist.top_k)->capture_default_str();
  s_short->add_option("--batches", shortlist.config.batches_per_arch, "Training batches per candidate")->capture_default_str();
  s_short->add_option("--batch-size", shortlist.config.batch_size)->capture_default_str();
  s_short->add_option("--lr", shortlist.config.learning_rate)->capture_default_str();
  s_short->add_option("--resize", shortlist.resize);
  s_short->add_flag("!--no-flip", shortlist.flip);
  s_short->add_option("--seed", shortlist.config.seed)->capture_default_str();
  add_replay(s_short);

  TrainArgs train;
  auto* s_train = app.add_subcommand("train", "Train a child network from scratch and report test metrics");
  s_train->add_option("--arch", train.arch, "Architecture descriptor JSON");
  s_train->add_option("--manifest", train.manifest, "Dataset manifest.csv");
  s_train->add_option("--out", train.out, "Output directory");
  s_train->add_option("--epochs", train.config.epochs)->capture_default_str();
  s_train->add_option("--batch-size", train.config.batch_size)->capture_default_str();
  s_train->add_option("--lr", train.config.learning_rate)->capture_default_str();
  s_train->add_option("--lr-min", train.config.lr_min)->capture_default_str();
  s_train->add_option("--weight-decay", train.config.weight_decay)->capture_default_str();
  s_train->add_option("--positive-class", train.config.positive_class, "Class treated as positive in binary metrics")
      ->capture_default_str();
  s_train->add_option("--resize", train.resize);
  s_train->add_flag("!--no-flip", train.flip);
  s_train->add_option("--seed", train.config.seed)->capture_default_str();
  s_train->add_flag("--eval-only", train.eval_only, "Skip training; evaluate --checkpoint on the test split");
  s_train->add_option("--checkpoint", train.checkpoint, "Checkpoint for --eval-only");
  add_replay(s_train);

  CamArgs cam;
  auto* s_cam = app.add_subcommand("cam", "Export class activation maps for volumes");
  s_cam->add_option("--checkpoint", cam.checkpoint, "model.ckpt from train");
  s_cam->add_option("--volume", cam.volumes, "Input .v3d volume (repeatable)");
  s_cam->add_option("--class", cam.class_index, "Class to explain (default: predicted)");
  s_cam->add_flag("--nearest", cam.nearest, "Nearest-neighbour upsampling instead of trilinear");
  s_cam->add_option("--out", cam.out, "Output directory");
  add_replay(s_cam);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (threads > 0) parallel::set_num_threads(threads);

  const auto require = [&](const std::string& value, const char* flag) {
    if (replay.empty() && value.empty()) throw UsageError(std::string(flag) + " is required");
  };

  try {
    if (s_synth->parsed()) {
      require(synth.out, "--out");
      run_synth(resolve(replay, "synth", synth, synth_from_json));
    } else if (s_search->parsed()) {
      require(search.manifest, "--manifest");
      require(search.out, "--out");
      if (replay.empty()) {
        try {
          search.net = SupernetConfig::with_preset(parse_preset(search.preset));
        } catch (const ArgumentError& e) {
          throw UsageError(e.what());
        }
        search.net.num_classes = s_search->get_option("--classes")->as<int>();
        if (!blocks.empty()) {
          search.net.blocks_per_cell = blocks;
          search.net.num_cells = int(blocks.size());
        }
        if (!channels.empty()) search.net.channels_per_cell = channels;
        if (!stride2.empty() || s_search->count("--stride2")) search.net.stride2_cells = {stride2.begin(), stride2.end()};
        if (stem > 0) search.net.stem_channels = stem;
        search.net.input_shape = {slices, size, size};
      }
      run_search_command(resolve(replay, "search", search, search_from_json));
    } else if (s_short->parsed()) {
      require(shortlist.history, "--history");
      require(shortlist.out, "--out");
      run_shortlist(resolve(replay, "shortlist", shortlist, shortlist_from_json));
    } else if (s_train->parsed()) {
      require(train.manifest, "--manifest");
      require(train.out, "--out");
      run_train(resolve(replay, "train", train, train_from_json));
    } else if (s_cam->parsed()) {
      require(cam.checkpoint, "--checkpoint");
      require(cam.out, "--out");
      run_cam(resolve(replay, "cam", cam, cam_from_json));
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int run(int argc, char** argv) { return dispatch(argc, argv); }

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"dnas3d"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return dispatch(int(argv.size()), argv.data());
}

}  // namespace dnas3d::cli
