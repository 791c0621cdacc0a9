#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dnas3d/data.hpp"
#include "dnas3d/errors.hpp"
#include "dnas3d/interp.hpp"

namespace dnas3d {

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw ArgumentError("unknown split '" + s + "'");
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read manifest " + path.string());
  Manifest m;
  m.base_dir = path.parent_path();
  std::string line;
  std::size_t lineno = 0;
  int max_label = -1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      if (line != "path,label,split")
        throw ConfigError("manifest " + path.string() + ": expected header 'path,label,split'");
      continue;
    }
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string p, label, split;
    if (!std::getline(ss, p, ',') || !std::getline(ss, label, ',') || !std::getline(ss, split))
      throw ConfigError("manifest line " + std::to_string(lineno) + ": expected 3 fields");
    ManifestEntry e;
    e.path = p;
    try {
      e.label = std::stoi(label);
    } catch (const std::exception&) {
      throw ConfigError("manifest line " + std::to_string(lineno) + ": bad label '" + label + "'");
    }
    if (e.label < 0) throw ConfigError("manifest line " + std::to_string(lineno) + ": negative label");
    e.split = parse_split(split);
    if (!std::filesystem::exists(m.base_dir / e.path))
      throw ConfigError("manifest line " + std::to_string(lineno) + ": no such volume " + e.path);
    max_label = std::max(max_label, e.label);
    m.entries.push_back(std::move(e));
  }
  const auto classes = m.base_dir / "classes.txt";
  if (std::filesystem::exists(classes)) {
    std::ifstream cs(classes);
    while (std::getline(cs, line))
      if (!line.empty()) m.class_names.push_back(line);
  } else {
    for (int c = 0; c <= max_label; ++c) m.class_names.push_back("class" + std::to_string(c));
  }
  if (max_label >= m.num_classes())
    throw ConfigError("manifest label " + std::to_string(max_label) + " exceeds class count");
  return m;
}

void save_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write manifest " + path.string());
  os << "path,label,split\n";
  for (const auto& e : manifest.entries) os << e.path << ',' << e.label << ',' << to_string(e.split) << '\n';
  std::ofstream cs(path.parent_path() / "classes.txt", std::ios::binary);
  for (const auto& n : manifest.class_names) cs << n << '\n';
}

std::vector<Volume> load_split(const Manifest& manifest, Split split) {
  std::vector<Volume> out;
  for (const auto& e : manifest.entries) {
    if (e.split != split) continue;
    const auto p = manifest.base_dir / e.path;
    if (!std::filesystem::exists(p)) throw IoError("manifest entry not found: " + p.string());
    Volume v = load_volume(p);
    v.label = e.label;
    out.push_back(std::move(v));
  }
  return out;
}

void TransformConfig::validate() const {
  if (target_slices < 1) throw ConfigError("target_slices must be >= 1");
  for (int i = 0; i < 2; ++i) {
    if (resize[std::size_t(i)] < 1 || center_crop[std::size_t(i)] < 1)
      throw ConfigError("resize / crop dims must be positive");
    if (center_crop[std::size_t(i)] > resize[std::size_t(i)])
      throw ConfigError("center_crop must not exceed resize");
  }
}

std::vector<int> symmetrical_sample(int n_slices, int d) {
  if (n_slices < 1 || d < 1) throw ArgumentError("symmetrical_sample needs n_slices >= 1 and d >= 1");
  const double stride = double(n_slices) / double(d);
  const double start = (double(n_slices) - stride * double(d - 1) - 1.0) / 2.0;
  std::vector<int> idx(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    const long r = std::lround(start + double(i) * stride);
    idx[std::size_t(i)] = int(std::clamp<long>(r, 0, n_slices - 1));
  }
  return idx;
}

std::vector<int> random_sample(int n_slices, int d, Rng& rng) {
  if (n_slices < 1 || d < 1) throw ArgumentError("random_sample needs n_slices >= 1 and d >= 1");
  std::vector<int> idx;
  if (n_slices >= d) {
    std::vector<int> pool(static_cast<std::size_t>(n_slices));
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < d; ++i) {
      std::uniform_int_distribution<int> pick(i, n_slices - 1);
      std::swap(pool[std::size_t(i)], pool[std::size_t(pick(rng))]);
    }
    idx.assign(pool.begin(), pool.begin() + d);
  } else {
    std::uniform_int_distribution<int> pick(0, n_slices - 1);
    for (int i = 0; i < d; ++i) idx.push_back(pick(rng));
  }
  std::sort(idx.begin(), idx.end());
  return idx;
}

void flip(Array& a, FlipAxis axis) {
  if (a.rank() < 2) throw DimensionError("flip needs rank >= 2");
  const std::size_t W = a.dim(a.rank() - 1), H = a.dim(a.rank() - 2);
  const std::size_t planes = a.size() / (H * W);
  for (std::size_t p = 0; p < planes; ++p) {
    double* base = a.raw() + p * H * W;
    if (axis == FlipAxis::horizontal) {
      for (std::size_t h = 0; h < H; ++h) std::reverse(base + h * W, base + (h + 1) * W);
    } else {
      for (std::size_t h = 0; h < H / 2; ++h)
        std::swap_ranges(base + h * W, base + (h + 1) * W, base + (H - 1 - h) * W);
    }
  }
}

Array preprocess(const Volume& volume, const TransformConfig& cfg, Split split, Rng& rng) {
  cfg.validate();
  if (volume.voxels.rank() != 3) throw DimensionError("volume must be rank 3");
  const int n = int(volume.voxels.dim(0));
  const std::size_t H = volume.voxels.dim(1), W = volume.voxels.dim(2);
  const auto idx = split == Split::train ? random_sample(n, cfg.target_slices, rng)
                                         : symmetrical_sample(n, cfg.target_slices);
  const std::size_t d = idx.size();
  const std::size_t rh = std::size_t(cfg.resize[0]), rw = std::size_t(cfg.resize[1]);
  const std::size_t ch = std::size_t(cfg.center_crop[0]), cw = std::size_t(cfg.center_crop[1]);
  const std::size_t oh = (rh - ch) / 2, ow = (rw - cw) / 2;

  Array out(Shape{1, d, ch, cw});
  for (std::size_t s = 0; s < d; ++s) {
    const double* src = volume.voxels.raw() + std::size_t(idx[s]) * H * W;
    Array plane(Shape{H, W}, std::vector<double>(src, src + H * W));
    if (H != rh || W != rw) plane = bilinear_resize(plane, rh, rw);
    for (std::size_t y = 0; y < ch; ++y)
      for (std::size_t x = 0; x < cw; ++x) out[(s * ch + y) * cw + x] = plane[(y + oh) * rw + x + ow];
  }

  if (cfg.normalize) {
    double mean = 0.0;
    for (double v : out.data()) mean += v;
    mean /= double(out.size());
    double var = 0.0;
    for (double v : out.data()) var += (v - mean) * (v - mean);
    const double sd = std::max(std::sqrt(var / double(out.size())), 1e-6);
    for (double& v : out.data()) v = (v - mean) / sd;
  }

  if (split == Split::train && cfg.train_random_flip) {
    std::bernoulli_distribution coin(0.5);
    if (coin(rng)) flip(out, coin(rng) ? FlipAxis::horizontal : FlipAxis::vertical);
  }
  return out;
}

SplitIndices stratified_split(const std::vector<int>& labels, double fraction, Rng& rng) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ArgumentError("split fraction must lie in (0,1)");
  int max_label = -1;
  for (int l : labels) max_label = std::max(max_label, l);
  SplitIndices out;
  for (int c = 0; c <= max_label; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) members.push_back(i);
    std::shuffle(members.begin(), members.end(), rng);
    std::size_t k = std::size_t(std::lround(fraction * double(members.size())));
    if (members.size() >= 2) k = std::clamp<std::size_t>(k, 1, members.size() - 1);
    out.second.insert(out.second.end(), members.begin(), members.begin() + long(k));
    out.first.insert(out.first.end(), members.begin() + long(k), members.end());
  }
  std::sort(out.first.begin(), out.first.end());
  std::sort(out.second.begin(), out.second.end());
  return out;
}

}  // namespace dnas3d
