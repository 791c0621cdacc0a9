#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dnas3d/array.hpp"
#include "dnas3d/random.hpp"

namespace dnas3d {

/// Single-channel scan, voxels shaped [slices, height, width].
struct Volume {
  Array voxels;
  std::string id;
  int label = 0;
};

enum class Split { train, test };
std::string to_string(Split s);
Split parse_split(const std::string& s);

// V3D1 container: "V3D1", u32le slices/height/width, f32le voxels.
void save_volume(const std::filesystem::path& path, const Array& voxels);
Volume load_volume(const std::filesystem::path& path);
std::vector<char> encode_volume(const Array& voxels);
Array decode_volume(const std::vector<char>& bytes);

struct ManifestEntry {
  std::string path;  // relative to the manifest's directory
  int label = 0;
  Split split = Split::train;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> class_names;
  std::filesystem::path base_dir;

  int num_classes() const { return int(class_names.size()); }
};

// Text manifest with header "path,label,split". Class names come from a
// sibling classes.txt (one per line) when present, else "class<i>".
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const Manifest& manifest);
std::vector<Volume> load_split(const Manifest& manifest, Split split);

struct TransformConfig {
  int target_slices = 16;
  std::array<int, 2> resize{64, 64};
  std::array<int, 2> center_crop{64, 64};
  bool normalize = true;
  bool train_random_flip = true;

  void validate() const;
};

/// Uniform-stride indices centered on the volume midpoint; sorted, and
/// repeat-padded when n_slices < d.
std::vector<int> symmetrical_sample(int n_slices, int d);
/// d sorted indices drawn without replacement (with replacement when n_slices < d).
std::vector<int> random_sample(int n_slices, int d, Rng& rng);

enum class FlipAxis { horizontal, vertical };
// In-place flip of a [..., H, W] array along width (horizontal) or height.
void flip(Array& a, FlipAxis axis);

/// slice sample -> per-slice bilinear resize -> center crop -> z-score ->
/// (train only) random flip. Returns [1, d, crop_h, crop_w].
Array preprocess(const Volume& volume, const TransformConfig& cfg, Split split, Rng& rng);

struct SplitIndices {
  std::vector<std::size_t> first;   // larger share
  std::vector<std::size_t> second;  // `fraction` of each class
};
// Per-class shuffle, then round(fraction * n_class) items of each class go
// to `second` (at least one when the class has two or more items).
SplitIndices stratified_split(const std::vector<int>& labels, double fraction, Rng& rng);

struct BlobTruth {
  std::array<double, 3> center{};  // (slice, row, col) voxel coordinates
  double radius = 0.0;
};

struct SynthOptions {
  int n_per_class = 40;
  int num_classes = 3;
  std::array<int, 3> shape{16, 16, 16};
  std::uint64_t seed = 0;
  double noise_sigma = 1.0;
  double blob_amplitude = 6.0;
  double radius_min = 3.0;
  double radius_max = 4.0;
  double offset_range = 1.0;  // per-volume background level ~ U(-r, r)
  double test_fraction = 0.2;
};

struct SynthSample {
  Volume volume;
  std::vector<BlobTruth> blobs;
  Split split = Split::train;
};

/// Class 0 is background noise; class c >= 1 adds c Gaussian blobs at random
/// interior positions. Stratified train/test split.
std::vector<SynthSample> synth_dataset(const SynthOptions& options);

// Writes volumes/<id>.v3d, manifest.csv, classes.txt and truth.txt under dir.
Manifest write_synth_dataset(const std::filesystem::path& dir, const std::vector<SynthSample>& samples,
                             int num_classes);

// truth.txt: "<id> <n> [slice row col radius]*" per line.
void save_truth(const std::filesystem::path& path, const std::vector<SynthSample>& samples);
std::vector<std::pair<std::string, std::vector<BlobTruth>>> load_truth(const std::filesystem::path& path);

}  // namespace dnas3d
