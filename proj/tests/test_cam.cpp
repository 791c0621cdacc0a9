#include <gtest/gtest.h>

#include <fstream>
#include <numeric>

#include "dnas3d/cam.hpp"
#include "dnas3d/checkpoint.hpp"
#include "dnas3d/data.hpp"
#include "dnas3d/errors.hpp"
#include "dnas3d/network.hpp"
#include "fixtures.hpp"

using namespace dnas3d;
using fixtures::TempDir;
using fixtures::tiny_config;

namespace {

FeatureCapture simple_capture(Array features, Array weights) {
  FeatureCapture c;
  c.features = std::move(features);
  c.class_weights = std::move(weights);
  c.class_bias = Array(Shape{c.class_weights.dim(0)}, 0.0);
  c.logits = Array(Shape{c.class_weights.dim(0)}, 0.0);
  return c;
}

Array ramp(Shape s) {
  Array a(std::move(s));
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::sin(0.7 * double(i)) + 0.1 * double(i);
  return a;
}

// Trained-free child whose BN statistics are initialized by one train pass.
ChildNet calibrated_child(std::uint64_t seed) {
  ArchDescriptor arch{tiny_config(), {0, 3, 5, 7, 1}, {}};
  ChildNet net(arch, seed);
  std::mt19937_64 rng(seed);
  NoGradGuard g;
  net.forward(Tensor(gradcheck::random_array({4, 1, 8, 8, 8}, rng)), Mode::train);
  return net;
}

}  // namespace

TEST(Cam, UnitWeightReturnsFeatureMap) {
  const Array f = ramp({1, 2, 3, 2});
  const auto m = compute_cam(simple_capture(f, Array(Shape{1, 1}, 1.0)), 0);
  EXPECT_EQ(m.raw, f.reshaped(Shape{2, 3, 2}));
  const auto [lo, hi] = std::minmax_element(m.normalized.data().begin(), m.normalized.data().end());
  EXPECT_EQ(*lo, 0.0);
  EXPECT_EQ(*hi, 1.0);
}

TEST(Cam, ZeroWeightsGiveZeroMaps) {
  const auto m = compute_cam(simple_capture(ramp({3, 2, 2, 2}), Array(Shape{2, 3}, 0.0)), 1);
  for (double v : m.raw.data()) EXPECT_EQ(v, 0.0);
  for (double v : m.normalized.data()) EXPECT_EQ(v, 0.0);
}

TEST(Cam, RejectsBadClassAndShapes) {
  const auto c = simple_capture(ramp({3, 2, 2, 2}), Array(Shape{2, 3}, 1.0));
  EXPECT_THROW(compute_cam(c, 2), ArgumentError);
  EXPECT_THROW(compute_cam(c, -1), ArgumentError);
  EXPECT_THROW(compute_cam(simple_capture(ramp({3, 2, 2, 2}), Array(Shape{2, 4}, 1.0)), 0), DimensionError);
}

TEST(Cam, MapAverageEqualsLogitMinusBias) {
  auto net = calibrated_child(3);
  std::mt19937_64 rng(4);
  for (int t = 0; t < 5; ++t) {
    const Array x = gradcheck::random_array({1, 8, 8, 8}, rng);
    const auto cap = capture_features(net, x);
    ASSERT_EQ(cap.features.dim(0), cap.class_weights.dim(1));
    for (int c = 0; c < 3; ++c) {
      const auto m = compute_cam(cap, c);
      const auto d = m.raw.data();
      const double avg = std::accumulate(d.begin(), d.end(), 0.0) / double(d.size());
      EXPECT_NEAR(avg, cap.logits[std::size_t(c)] - cap.class_bias[std::size_t(c)], 1e-9);
    }
  }
}

TEST(Cam, MinMaxNormalization) {
  Array a(Shape{4}, std::vector<double>{2.0, 4.0, 3.0, 6.0});
  EXPECT_EQ(min_max_normalize(a), Array(Shape{4}, std::vector<double>{0.0, 0.5, 0.25, 1.0}));
  EXPECT_EQ(min_max_normalize(Array(Shape{3}, 5.0)), Array(Shape{3}, 0.0));
}

TEST(Cam, UpsamplingPreservesIdentityConstantsAndBounds) {
  ActivationMap m = compute_cam(simple_capture(ramp({1, 2, 3, 2}), Array(Shape{1, 1}, 1.0)), 0);
  EXPECT_EQ(upsample_cam(m, Dims3{2, 3, 2}).raw, m.raw);
  const auto up = upsample_cam(m, Dims3{8, 9, 10});
  EXPECT_EQ(up.raw.shape(), (Shape{8, 9, 10}));
  const auto [lo, hi] = std::minmax_element(m.raw.data().begin(), m.raw.data().end());
  for (double v : up.raw.data()) {
    EXPECT_GE(v, *lo - 1e-12);
    EXPECT_LE(v, *hi + 1e-12);
  }
  for (double v : up.normalized.data()) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
  ActivationMap flat = compute_cam(simple_capture(Array(Shape{1, 2, 2, 2}, 0.5), Array(Shape{1, 1}, 1.0)), 0);
  for (auto mode : {UpsampleMode::trilinear, UpsampleMode::nearest}) {
    const auto flat_up = upsample_cam(flat, Dims3{5, 4, 3}, mode);
    for (double v : flat_up.raw.data()) EXPECT_DOUBLE_EQ(v, 0.5);
  }
}

TEST(Cam, OverlaysOnePerSliceAndRawMapRoundTrips) {
  TempDir dir("cam");
  const Array vol = ramp({1, 5, 6, 7});
  ActivationMap m = compute_cam(simple_capture(ramp({1, 5, 6, 7}), Array(Shape{1, 1}, 1.0)), 0);
  m.volume_id = "scan";
  const auto files = export_overlays(m, vol, dir.path());
  std::size_t ppm = 0;
  for (const auto& f : files) ppm += f.extension() == ".ppm";
  EXPECT_EQ(ppm, 5u);
  const Volume raw = load_volume(dir.path() / "scan_cam.v3d");
  ASSERT_EQ(raw.voxels.shape(), (Shape{5, 6, 7}));
  for (std::size_t i = 0; i < raw.voxels.size(); ++i) EXPECT_EQ(raw.voxels[i], double(float(m.normalized[i])));
  std::ifstream is(dir.path() / "scan_slice0.ppm", std::ios::binary);
  std::string magic;
  is >> magic;
  EXPECT_EQ(magic, "P6");
}

TEST(Cam, ZeroMapOverlayIsPlainGrayscale) {
  const Array vol = ramp({1, 2, 3, 4});
  const Array zero(Shape{2, 3, 4}, 0.0);
  const auto bytes = overlay_slice(zero, vol.reshaped(Shape{2, 3, 4}), 1);
  ASSERT_EQ(bytes.size(), 3u * 12);
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_EQ(bytes[3 * i], bytes[3 * i + 1]);
    EXPECT_EQ(bytes[3 * i], bytes[3 * i + 2]);
  }
}

TEST(Cam, UnwritableDirectoryIsAnIoError) {
  TempDir dir("cam_ro");
  std::ofstream(dir.path() / "file") << "x";
  ActivationMap m = compute_cam(simple_capture(ramp({1, 2, 2, 2}), Array(Shape{1, 1}, 1.0)), 0);
  EXPECT_THROW(export_overlays(m, ramp({1, 2, 2, 2}), dir.path() / "file" / "sub"), IoError);
}

TEST(Checkpoint, RoundTripPreservesOutputs) {
  TempDir dir("ckpt");
  auto net = calibrated_child(5);
  TransformConfig t;
  t.target_slices = 8;
  t.resize = {10, 10};
  t.center_crop = {8, 8};
  save_checkpoint(dir.path() / "m.ckpt", net, t, {"a", "b", "c"});
  auto [loaded, meta] = load_checkpoint(dir.path() / "m.ckpt");
  EXPECT_EQ(meta.arch, net.arch());
  EXPECT_EQ(meta.transforms.resize, t.resize);
  EXPECT_EQ(meta.class_names, (std::vector<std::string>{"a", "b", "c"}));
  std::mt19937_64 rng(6);
  const Tensor x(gradcheck::random_array({2, 1, 8, 8, 8}, rng));
  NoGradGuard g;
  EXPECT_EQ(net.forward(x, Mode::eval).logits.value(), loaded.forward(x, Mode::eval).logits.value());
}

TEST(Checkpoint, CorruptionIsDetected) {
  TempDir dir("ckpt_bad");
  auto net = calibrated_child(7);
  save_checkpoint(dir.path() / "m.ckpt", net, TransformConfig{});
  std::ifstream is(dir.path() / "m.ckpt", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(is)), {});
  std::ofstream(dir.path() / "short.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 5);
  EXPECT_THROW(load_checkpoint(dir.path() / "short.ckpt"), FormatError);
  std::string bad = bytes;
  bad[0] = 'X';
  std::ofstream(dir.path() / "magic.ckpt", std::ios::binary) << bad;
  EXPECT_THROW(load_checkpoint(dir.path() / "magic.ckpt"), FormatError);
  EXPECT_THROW(load_checkpoint(dir.path() / "none.ckpt"), IoError);
}
