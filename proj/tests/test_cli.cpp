#include <gtest/gtest.h>

#include <fstream>
#include <nlohmann/json.hpp>

#include "dnas3d/checkpoint.hpp"
#include "dnas3d/cli.hpp"
#include "dnas3d/data.hpp"
#include "dnas3d/search.hpp"
#include "fixtures.hpp"

using namespace dnas3d;
using fixtures::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

int cli_run(const std::vector<std::string>& args) { return cli::run(args); }

std::vector<std::string> small_synth(const std::filesystem::path& out, const std::string& seed = "3") {
  return {"synth", "--out", out.string(), "--per-class", "6", "--shape", "8", "8", "8", "--radius-min", "1",
          "--radius-max", "1.5", "--seed", seed};
}

std::vector<std::string> small_search(const std::filesystem::path& manifest, const std::filesystem::path& out) {
  return {"search",  "--manifest", manifest.string(), "--out", out.string(), "--epochs", "2", "--seed", "4",
          "--blocks", "1,1", "--channels", "4,8", "--stride2", "1", "--stem-channels", "4", "--slices", "8",
          "--size", "8", "--batch-size", "4"};
}

}  // namespace

TEST(CliSynth, DefaultSizesAndSplit) {
  TempDir dir("cli_synth");
  const auto out = dir.path() / "nested" / "data";
  ASSERT_EQ(cli_run({"synth", "--classes", "3", "--per-class", "40", "--out", out.string()}), 0);
  const Manifest m = load_manifest(out / "manifest.csv");
  EXPECT_EQ(m.entries.size(), 120u);
  EXPECT_EQ(load_split(m, Split::train).size(), 96u);
  EXPECT_EQ(load_split(m, Split::test).size(), 24u);
  EXPECT_TRUE(std::filesystem::exists(out / "truth.txt"));
  EXPECT_TRUE(std::filesystem::exists(out / "config.json"));
}

TEST(CliSynth, SameSeedIsByteIdentical) {
  TempDir a("cli_a"), b("cli_b");
  ASSERT_EQ(cli_run(small_synth(a.path())), 0);
  ASSERT_EQ(cli_run(small_synth(b.path())), 0);
  for (const auto& e : std::filesystem::directory_iterator(a.path() / "volumes"))
    EXPECT_EQ(slurp(e.path()), slurp(b.path() / "volumes" / e.path().filename()));
  EXPECT_EQ(slurp(a.path() / "manifest.csv"), slurp(b.path() / "manifest.csv"));
}

TEST(CliErrors, ArgumentProblemsExitWithTwo) {
  TempDir dir("cli_err");
  EXPECT_EQ(cli_run({}), 2);
  EXPECT_EQ(cli_run({"bogus"}), 2);
  EXPECT_EQ(cli_run({"synth"}), 2);
  EXPECT_EQ(cli_run({"synth", "--out", dir.path().string(), "--per-class", "many"}), 2);
  EXPECT_EQ(cli_run({"search", "--manifest", "x.csv", "--out", dir.path().string(), "--preset", "huge"}), 2);
  EXPECT_EQ(cli_run({"train", "--manifest", "x.csv", "--out", dir.path().string(), "--eval-only"}), 2);
}

TEST(CliErrors, RuntimeFailuresExitWithOne) {
  TempDir dir("cli_rt");
  EXPECT_EQ(cli_run({"search", "--manifest", (dir.path() / "missing.csv").string(), "--out", dir.path().string()}), 1);
  EXPECT_EQ(cli_run({"cam", "--checkpoint", (dir.path() / "none.ckpt").string(), "--volume", "v.v3d", "--out",
                     dir.path().string()}),
            1);
}

TEST(CliPipeline, SearchShortlistTrainCam) {
  TempDir dir("cli_pipe");
  const auto data = dir.path() / "data", search = dir.path() / "search", search2 = dir.path() / "search2";
  ASSERT_EQ(cli_run(small_synth(data)), 0);
  ASSERT_EQ(cli_run(small_search(data / "manifest.csv", search)), 0);
  const auto history = load_history((search / "history.json").string());
  EXPECT_EQ(history.records.size(), 2u);
  ASSERT_TRUE(std::filesystem::exists(search / "best_arch.json"));

  // Same seed reproduces the same best architecture; so does replaying the snapshot.
  ASSERT_EQ(cli_run(small_search(data / "manifest.csv", search2)), 0);
  EXPECT_EQ(slurp(search / "best_arch.json"), slurp(search2 / "best_arch.json"));
  EXPECT_EQ(slurp(search / "history.json"), slurp(search2 / "history.json"));
  ASSERT_EQ(cli_run({"search", "--replay", (search / "config.json").string()}), 0);
  EXPECT_EQ(slurp(search / "history.json"), slurp(search2 / "history.json"));

  const auto shortlist = dir.path() / "shortlist";
  ASSERT_EQ(cli_run({"shortlist", "--history", (search / "history.json").string(), "--manifest",
                     (data / "manifest.csv").string(), "--out", shortlist.string(), "--top-k", "1"}),
            0);
  EXPECT_EQ(load_arch((shortlist / "best_arch.json").string()), select_top_k(history, 1).front());
  ASSERT_EQ(cli_run({"shortlist", "--history", (search / "history.json").string(), "--manifest",
                     (data / "manifest.csv").string(), "--out", shortlist.string(), "--top-k", "2", "--batches",
                     "2", "--batch-size", "4"}),
            0);

  const auto train = dir.path() / "train";
  ASSERT_EQ(cli_run({"train", "--arch", (shortlist / "best_arch.json").string(), "--manifest",
                     (data / "manifest.csv").string(), "--out", train.string(), "--epochs", "2", "--batch-size",
                     "4"}),
            0);
  for (const char* f : {"model.ckpt", "metrics.txt", "metrics.csv", "train_log.csv", "config.json"})
    EXPECT_TRUE(std::filesystem::exists(train / f)) << f;
  EXPECT_NE(slurp(train / "metrics.txt").find("model_size_mb: "), std::string::npos);
  const auto metrics = slurp(train / "metrics.txt");

  const auto eval = dir.path() / "eval";
  ASSERT_EQ(cli_run({"train", "--eval-only", "--checkpoint", (train / "model.ckpt").string(), "--manifest",
                     (data / "manifest.csv").string(), "--out", eval.string()}),
            0);
  EXPECT_EQ(slurp(eval / "metrics.txt"), metrics);

  const auto vol = data / "volumes" / "vol_0012.v3d";
  const auto cam = dir.path() / "cam";
  ASSERT_EQ(cli_run({"cam", "--checkpoint", (train / "model.ckpt").string(), "--volume", vol.string(), "--out",
                     cam.string()}),
            0);
  int ppm = 0;
  for (const auto& e : std::filesystem::directory_iterator(cam)) ppm += e.path().extension() == ".ppm";
  EXPECT_EQ(ppm, 8);
  EXPECT_EQ(load_volume(cam / "vol_0012_cam.v3d").voxels.shape(), (Shape{8, 8, 8}));
  EXPECT_EQ(cli_run({"cam", "--checkpoint", (train / "model.ckpt").string(), "--volume", vol.string(), "--out",
                     cam.string(), "--class", "3"}),
            2);
  EXPECT_EQ(cli_run({"cam", "--checkpoint", (train / "model.ckpt").string(), "--volume", vol.string(), "--out",
                     cam.string(), "--class", "2", "--nearest"}),
            0);
}

TEST(CliPresets, LargePresetGivesLargerModels) {
  const std::vector<int> choices(21, 0);
  ChildNet small(ArchDescriptor{SupernetConfig::with_preset(ChannelPreset::small), choices, {}}, 0);
  ChildNet large(ArchDescriptor{SupernetConfig::with_preset(ChannelPreset::large), choices, {}}, 0);
  EXPECT_LT(model_size_mb(small.param_count()), model_size_mb(large.param_count()));
}
