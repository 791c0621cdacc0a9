#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dnas3d/data.hpp"
#include "dnas3d/errors.hpp"

namespace dnas3d {

namespace {

std::string volume_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "vol_%04zu", i);
  return buf;
}

std::vector<BlobTruth> place_blobs(int count, const std::array<int, 3>& shape, const SynthOptions& o,
                                   Rng& rng) {
  std::uniform_real_distribution<double> radius(o.radius_min, o.radius_max);
  std::vector<BlobTruth> blobs;
  // An early blob can leave no room for the rest, so restart periodically.
  for (int attempt = 0; int(blobs.size()) < count; ++attempt) {
    if (attempt > 100000) throw ConfigError("cannot place non-overlapping blobs in the volume");
    if (attempt % 1000 == 999) blobs.clear();
    BlobTruth b;
    b.radius = radius(rng);
    bool fits = true;
    for (int a = 0; a < 3; ++a) {
      const double lo = b.radius, hi = double(shape[std::size_t(a)] - 1) - b.radius;
      if (hi < lo) {
        fits = false;
        break;
      }
      b.center[std::size_t(a)] = std::uniform_real_distribution<double>(lo, hi)(rng);
    }
    if (!fits) throw ConfigError("volume too small for the requested blob radius");
    bool clear = true;
    for (const auto& other : blobs) {
      double d2 = 0.0;
      for (int a = 0; a < 3; ++a) d2 += std::pow(b.center[std::size_t(a)] - other.center[std::size_t(a)], 2);
      if (std::sqrt(d2) < b.radius + other.radius + 1.0) clear = false;
    }
    if (clear) blobs.push_back(b);
  }
  return blobs;
}

}  // namespace

std::vector<SynthSample> synth_dataset(const SynthOptions& o) {
  if (o.num_classes < 2 || o.num_classes > 3) throw ArgumentError("synth_dataset supports 2 or 3 classes");
  if (o.n_per_class < 1) throw ArgumentError("n_per_class must be >= 1");
  Rng rng = make_rng(o.seed, Stream::synth);
  std::normal_distribution<double> noise(0.0, o.noise_sigma);
  std::uniform_real_distribution<double> offset(-o.offset_range, o.offset_range);
  const auto [D, H, W] = o.shape;

  std::vector<SynthSample> out;
  std::vector<int> labels;
  for (int c = 0; c < o.num_classes; ++c)
    for (int i = 0; i < o.n_per_class; ++i) {
      SynthSample s;
      s.volume.label = c;
      s.volume.id = volume_id(out.size());
      s.blobs = place_blobs(c, o.shape, o, rng);
      Array v(Shape{std::size_t(D), std::size_t(H), std::size_t(W)});
      const double level = o.offset_range > 0.0 ? offset(rng) : 0.0;
      std::size_t k = 0;
      for (int z = 0; z < D; ++z)
        for (int y = 0; y < H; ++y)
          for (int x = 0; x < W; ++x) {
            double val = level + noise(rng);
            for (const auto& b : s.blobs) {
              const double sigma = b.radius / 2.0;
              const double d2 = std::pow(z - b.center[0], 2) + std::pow(y - b.center[1], 2) +
                                std::pow(x - b.center[2], 2);
              val += o.blob_amplitude * std::exp(-d2 / (2.0 * sigma * sigma));
            }
            // Stored as float32 on disk; keep the in-memory copy identical.
            v[k++] = double(float(val));
          }
      s.volume.voxels = std::move(v);
      labels.push_back(c);
      out.push_back(std::move(s));
    }

  Rng split_rng = make_rng(o.seed, Stream::split);
  const auto parts = stratified_split(labels, o.test_fraction, split_rng);
  for (auto i : parts.second) out[i].split = Split::test;
  return out;
}

void save_truth(const std::filesystem::path& path, const std::vector<SynthSample>& samples) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os.precision(17);
  for (const auto& s : samples) {
    os << s.volume.id << ' ' << s.blobs.size();
    for (const auto& b : s.blobs) os << ' ' << b.center[0] << ' ' << b.center[1] << ' ' << b.center[2] << ' ' << b.radius;
    os << '\n';
  }
}

std::vector<std::pair<std::string, std::vector<BlobTruth>>> load_truth(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  std::vector<std::pair<std::string, std::vector<BlobTruth>>> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id;
    std::size_t n = 0;
    if (!(ls >> id >> n)) throw ConfigError("malformed truth line: " + line);
    std::vector<BlobTruth> blobs(n);
    for (auto& b : blobs)
      if (!(ls >> b.center[0] >> b.center[1] >> b.center[2] >> b.radius))
        throw ConfigError("malformed truth line: " + line);
    out.emplace_back(id, std::move(blobs));
  }
  return out;
}

Manifest write_synth_dataset(const std::filesystem::path& dir, const std::vector<SynthSample>& samples,
                             int num_classes) {
  std::filesystem::create_directories(dir / "volumes");
  Manifest m;
  m.base_dir = dir;
  for (int c = 0; c < num_classes; ++c)
    m.class_names.push_back(c == 0 ? "background" : "blobs" + std::to_string(c));
  for (const auto& s : samples) {
    const std::string rel = "volumes/" + s.volume.id + ".v3d";
    save_volume(dir / rel, s.volume.voxels);
    m.entries.push_back({rel, s.volume.label, s.split});
  }
  save_manifest(dir / "manifest.csv", m);
  save_truth(dir / "truth.txt", samples);
  return m;
}

}  // namespace dnas3d
