#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numeric>

#include "dnas3d/data.hpp"
#include "dnas3d/errors.hpp"
#include "fixtures.hpp"

using namespace dnas3d;
using fixtures::TempDir;

namespace {

// Direct evaluation of the centred uniform-stride formula.
std::vector<int> symmetric_oracle(int n, int d) {
  std::vector<int> out;
  const double s = double(n) / d;
  const double start = (n - s * (d - 1) - 1) / 2;
  for (int i = 0; i < d; ++i) {
    const double x = start + i * s;
    int r = x >= 0 ? int(std::floor(x + 0.5)) : -int(std::floor(-x + 0.5));
    out.push_back(std::min(std::max(r, 0), n - 1));
  }
  return out;
}

Array random_volume(Shape s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(2.0, 3.0);
  Array a(std::move(s));
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = double(float(nd(rng)));
  return a;
}

}  // namespace

TEST(SymmetricalSample, WorkedExamples) {
  EXPECT_EQ(symmetrical_sample(10, 5), (std::vector<int>{1, 3, 5, 7, 9}));
  EXPECT_EQ(symmetrical_sample(3, 6), (std::vector<int>{0, 0, 1, 1, 2, 2}));
  EXPECT_EQ(symmetrical_sample(7, 1), (std::vector<int>{3}));
  EXPECT_THROW(symmetrical_sample(0, 3), ArgumentError);
  EXPECT_THROW(symmetrical_sample(5, 0), ArgumentError);
}

TEST(SymmetricalSample, ExhaustiveProperties) {
  for (int n = 1; n <= 64; ++n)
    for (int d = 1; d <= 32; ++d) {
      const auto idx = symmetrical_sample(n, d);
      ASSERT_EQ(idx, symmetric_oracle(n, d)) << n << " " << d;
      ASSERT_EQ(int(idx.size()), d);
      ASSERT_TRUE(std::is_sorted(idx.begin(), idx.end()));
      for (int v : idx) ASSERT_TRUE(v >= 0 && v < n);
      if (n == d) {
        std::vector<int> id(static_cast<std::size_t>(n));
        std::iota(id.begin(), id.end(), 0);
        ASSERT_EQ(idx, id);
      }
      if (d == 1 && n % 2 == 1) ASSERT_EQ(idx[0], (n - 1) / 2);
      // Mirror pairs straddle the midpoint; rounding ties shift a pair by at most one.
      for (int i = 0; i < d; ++i) ASSERT_LE(std::abs(idx[std::size_t(i)] + idx[std::size_t(d - 1 - i)] - (n - 1)), 1);
      if (n >= d) {
        ASSERT_EQ(std::adjacent_find(idx.begin(), idx.end()), idx.end()) << "no repeats when n >= d";
      } else {
        std::vector<int> used(idx);
        used.erase(std::unique(used.begin(), used.end()), used.end());
        ASSERT_EQ(int(used.size()), n) << "every slice used when padding";
      }
    }
}

TEST(RandomSample, IdentityWhenCountsMatch) {
  Rng rng = make_rng(1, Stream::data);
  std::vector<int> id(20);
  std::iota(id.begin(), id.end(), 0);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(random_sample(20, 20, rng), id);
}

TEST(RandomSample, SortedAndInRange) {
  Rng rng = make_rng(2, Stream::data);
  std::uniform_int_distribution<int> nd(1, 64), dd(1, 32);
  for (int t = 0; t < 10000; ++t) {
    const int n = nd(rng), d = dd(rng);
    const auto idx = random_sample(n, d, rng);
    ASSERT_EQ(int(idx.size()), d);
    ASSERT_TRUE(std::is_sorted(idx.begin(), idx.end()));
    for (int v : idx) ASSERT_TRUE(v >= 0 && v < n);
    if (n >= d) ASSERT_EQ(std::adjacent_find(idx.begin(), idx.end()), idx.end());
  }
}

TEST(RandomSample, InclusionFrequencyIsUniform) {
  Rng rng = make_rng(3, Stream::data);
  std::vector<long> hits(100, 0);
  const int trials = 20000;
  for (int t = 0; t < trials; ++t)
    for (int v : random_sample(100, 10, rng)) ++hits[std::size_t(v)];
  for (long h : hits) EXPECT_NEAR(double(h) / trials, 0.1, 0.02);
}

TEST(VolumeIo, RoundTripIsBitExact) {
  TempDir dir("vol");
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const Shape s{std::size_t(rng() % 9 + 1), std::size_t(rng() % 9 + 1), std::size_t(rng() % 9 + 1)};
    Array a = random_volume(s, rng());
    if (i == 0) a[0] = -0.0;
    const auto path = dir.path() / ("v" + std::to_string(i) + ".v3d");
    save_volume(path, a);
    const Volume v = load_volume(path);
    ASSERT_EQ(v.voxels.shape(), s);
    for (std::size_t k = 0; k < a.size(); ++k)
      ASSERT_EQ(std::bit_cast<std::uint64_t>(v.voxels[k]), std::bit_cast<std::uint64_t>(a[k]));
    EXPECT_EQ(encode_volume(v.voxels), encode_volume(a));
  }
}

TEST(VolumeIo, CorruptFilesAreFormatErrors) {
  const auto bytes = encode_volume(random_volume({2, 3, 4}, 5));
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  EXPECT_THROW(decode_volume(truncated), FormatError);
  auto short_header = bytes;
  short_header.resize(10);
  EXPECT_THROW(decode_volume(short_header), FormatError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_volume(bad_magic), FormatError);
  auto extra = bytes;
  extra.push_back(0);
  EXPECT_THROW(decode_volume(extra), FormatError);
  auto bad_dims = bytes;
  bad_dims[4] = 9;  // slices 2 -> 9, payload no longer matches
  try {
    decode_volume(bad_dims);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_GE(e.offset(), 0u);
  }
  EXPECT_THROW(load_volume("/nonexistent/volume.v3d"), IoError);
}

TEST(Preprocess, ConstantVolumeNormalizesToZero) {
  Volume v{Array(Shape{8, 6, 6}, 3.0), "c", 0};
  TransformConfig t;
  t.target_slices = 4;
  t.resize = {6, 6};
  t.center_crop = {4, 4};
  Rng rng(0);
  const Array out = preprocess(v, t, Split::test, rng);
  EXPECT_EQ(out.shape(), (Shape{1, 4, 4, 4}));
  for (double x : out.data()) EXPECT_EQ(x, 0.0);
}

TEST(Preprocess, TestPathIsDeterministicAndStandardized) {
  Volume v{random_volume({20, 12, 10}, 6), "r", 1};
  TransformConfig t;
  t.target_slices = 8;
  t.resize = {16, 16};
  t.center_crop = {12, 14};
  Rng a(1), b(2);
  const Array x = preprocess(v, t, Split::test, a), y = preprocess(v, t, Split::test, b);
  EXPECT_EQ(x, y);
  EXPECT_EQ(x.shape(), (Shape{1, 8, 12, 14}));
  double m = 0.0, var = 0.0;
  for (double e : x.data()) m += e;
  m /= double(x.size());
  for (double e : x.data()) var += (e - m) * (e - m);
  EXPECT_LT(std::abs(m), 1e-10);
  EXPECT_LT(std::abs(std::sqrt(var / double(x.size())) - 1.0), 1e-6);
}

TEST(Preprocess, TrainFlipsAreHorizontalOrVertical) {
  Volume v{random_volume({4, 5, 5}, 7), "r", 0};
  TransformConfig t;
  t.target_slices = 4;
  t.resize = {5, 5};
  t.center_crop = {5, 5};
  Rng none(0);
  const Array base = preprocess(v, t, Split::test, none);
  Array h = base, vert = base;
  flip(h, FlipAxis::horizontal);
  flip(vert, FlipAxis::vertical);
  Rng rng = make_rng(8, Stream::data);
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < 400; ++i) {
    const Array out = preprocess(v, t, Split::train, rng);
    if (out == base) ++counts[0];
    else if (out == h) ++counts[1];
    else if (out == vert) ++counts[2];
    else FAIL() << "unexpected train output";
  }
  EXPECT_NEAR(counts[0] / 400.0, 0.5, 0.1);
  EXPECT_NEAR(counts[1] / 400.0, 0.25, 0.08);
  EXPECT_NEAR(counts[2] / 400.0, 0.25, 0.08);
  t.train_random_flip = false;
  EXPECT_EQ(preprocess(v, t, Split::train, rng), base);
}

TEST(Preprocess, RejectsCropLargerThanResize) {
  TransformConfig t;
  t.resize = {8, 8};
  t.center_crop = {10, 8};
  EXPECT_THROW(t.validate(), ConfigError);
}

TEST(StratifiedSplit, PerClassFractions) {
  std::vector<int> labels;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 40; ++i) labels.push_back(c);
  Rng rng = make_rng(9, Stream::split);
  const auto s = stratified_split(labels, 0.2, rng);
  EXPECT_EQ(s.first.size(), 96u);
  EXPECT_EQ(s.second.size(), 24u);
  int per[3] = {0, 0, 0};
  for (auto i : s.second) ++per[labels[i]];
  for (int c : per) EXPECT_EQ(c, 8);
  std::vector<std::size_t> all(s.first);
  all.insert(all.end(), s.second.begin(), s.second.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
}

TEST(Manifest, LoadAndSplit) {
  TempDir dir("manifest");
  save_volume(dir.path() / "a.v3d", Array(Shape{2, 2, 2}, 1.0));
  save_volume(dir.path() / "b.v3d", Array(Shape{2, 2, 2}, 2.0));
  std::ofstream(dir.path() / "manifest.csv") << "path,label,split\na.v3d,0,train\nb.v3d,1,test\n";
  std::ofstream(dir.path() / "classes.txt") << "normal\nlesion\n";
  const Manifest m = load_manifest(dir.path() / "manifest.csv");
  EXPECT_EQ(m.num_classes(), 2);
  EXPECT_EQ(m.class_names[1], "lesion");
  const auto train = load_split(m, Split::train), test = load_split(m, Split::test);
  ASSERT_EQ(train.size(), 1u);
  ASSERT_EQ(test.size(), 1u);
  EXPECT_EQ(test[0].label, 1);
  EXPECT_EQ(test[0].voxels[0], 2.0);

  std::ofstream(dir.path() / "bad.csv") << "path,label,split\na.v3d,5,train\n";
  EXPECT_THROW(load_manifest(dir.path() / "bad.csv"), ConfigError);
  std::ofstream(dir.path() / "missing.csv") << "path,label,split\nnope.v3d,0,train\n";
  EXPECT_THROW(load_manifest(dir.path() / "missing.csv"), ConfigError);
}

TEST(Synth, ClassCountsSplitAndTruth) {
  SynthOptions o;
  o.seed = 3;
  const auto samples = synth_dataset(o);
  ASSERT_EQ(samples.size(), 120u);
  int per[3] = {0, 0, 0}, test = 0;
  for (const auto& s : samples) {
    ++per[s.volume.label];
    test += s.split == Split::test;
    EXPECT_EQ(int(s.blobs.size()), s.volume.label);
    for (const auto& b : s.blobs)
      for (int a = 0; a < 3; ++a) {
        EXPECT_GE(b.center[std::size_t(a)], b.radius);
        EXPECT_LE(b.center[std::size_t(a)], 15.0 - b.radius);
      }
  }
  for (int c : per) EXPECT_EQ(c, 40);
  EXPECT_EQ(test, 24);
}

TEST(Synth, BlobCentreStandsOutFromBackground) {
  SynthOptions o;
  o.seed = 4;
  for (const auto& s : synth_dataset(o))
    for (const auto& b : s.blobs) {
      // Noise-free profile at the voxel nearest the centre.
      double d2 = 0.0;
      for (double c : b.center) d2 += (c - std::round(c)) * (c - std::round(c));
      const double sig = b.radius / 2;
      EXPECT_GE(o.blob_amplitude * std::exp(-d2 / (2 * sig * sig)), 3.0 * o.noise_sigma);
    }
}

TEST(Synth, MeanIntensityAloneIsAWeakClassifier) {
  // Best single-threshold and nearest-class-mean classifiers on the volume
  // mean, evaluated on the training data itself as an upper bound.
  for (std::uint64_t seed : {1, 2, 3}) {
    SynthOptions o;
    o.seed = seed;
    const auto samples = synth_dataset(o);
    std::vector<std::pair<double, int>> means;
    for (const auto& s : samples) {
      const auto d = s.volume.voxels.data();
      means.emplace_back(std::accumulate(d.begin(), d.end(), 0.0) / double(d.size()), s.volume.label);
    }
    std::sort(means.begin(), means.end());
    // Any monotone mapping of the mean to ordered classes is two thresholds.
    int best = 0;
    const int n = int(means.size());
    for (int a = 0; a <= n; ++a)
      for (int b = a; b <= n; ++b) {
        int correct = 0;
        for (int i = 0; i < n; ++i) correct += means[std::size_t(i)].second == (i < a ? 0 : i < b ? 1 : 2);
        best = std::max(best, correct);
      }
    EXPECT_LT(double(best) / n, 0.95) << "seed " << seed;
  }
}

TEST(Synth, SameSeedSameVolumesOnDisk) {
  TempDir a("synth_a"), b("synth_b");
  SynthOptions o;
  o.n_per_class = 3;
  o.seed = 11;
  write_synth_dataset(a.path(), synth_dataset(o), o.num_classes);
  write_synth_dataset(b.path(), synth_dataset(o), o.num_classes);
  for (const auto& e : std::filesystem::directory_iterator(a.path() / "volumes")) {
    std::ifstream fa(e.path(), std::ios::binary), fb(b.path() / "volumes" / e.path().filename(), std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
    EXPECT_EQ(sa, sb);
  }
  const auto truth = load_truth(a.path() / "truth.txt");
  EXPECT_EQ(truth.size(), 9u);
  const Manifest m = load_manifest(a.path() / "manifest.csv");
  EXPECT_EQ(m.entries.size(), 9u);
  EXPECT_EQ(m.class_names.size(), 3u);
}
