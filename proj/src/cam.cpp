#include "dnas3d/cam.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "dnas3d/data.hpp"
#include "dnas3d/errors.hpp"
#include "dnas3d/network.hpp"

namespace dnas3d {

FeatureCapture capture_features(ChildNet& net, const Array& volume) {
  if (volume.rank() != 4 || volume.dim(0) != 1)
    throw DimensionError("capture_features expects a [1,d,h,w] volume, got " + shape_str(volume.shape()));
  NoGradGuard guard;
  Shape s{1, 1, volume.dim(1), volume.dim(2), volume.dim(3)};
  auto out = net.forward(Tensor(volume.reshaped(s)), Mode::eval);
  const Shape& fs = out.features.shape();
  FeatureCapture cap;
  cap.features = out.features.value().reshaped(Shape{fs[1], fs[2], fs[3], fs[4]});
  cap.class_weights = net.head().weight.tensor.value();
  cap.class_bias = net.head().bias.tensor.value();
  cap.logits = out.logits.value().reshaped(Shape{out.logits.shape()[1]});
  return cap;
}

Array min_max_normalize(const Array& a) {
  const auto [lo, hi] = std::minmax_element(a.data().begin(), a.data().end());
  Array out(a.shape(), 0.0);
  if (*hi > *lo) {
    const double range = *hi - *lo;
    const double mn = *lo;
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] - mn) / range;
  }
  return out;
}

ActivationMap compute_cam(const FeatureCapture& capture, int class_index) {
  const Array& f = capture.features;
  const Array& w = capture.class_weights;
  if (f.rank() != 4 || w.rank() != 2 || w.dim(1) != f.dim(0))
    throw DimensionError("compute_cam: features " + shape_str(f.shape()) + " vs weights " + shape_str(w.shape()));
  if (class_index < 0 || std::size_t(class_index) >= w.dim(0))
    throw ArgumentError("class index " + std::to_string(class_index) + " out of range [0," +
                        std::to_string(w.dim(0)) + ")");
  const std::size_t C = f.dim(0), V = f.dim(1) * f.dim(2) * f.dim(3);
  ActivationMap m;
  m.class_index = class_index;
  m.raw = Array(Shape{f.dim(1), f.dim(2), f.dim(3)}, 0.0);
  for (std::size_t k = 0; k < C; ++k) {
    const double wk = w[std::size_t(class_index) * C + k];
    const double* fk = f.raw() + k * V;
    for (std::size_t i = 0; i < V; ++i) m.raw[i] += wk * fk[i];
  }
  m.normalized = min_max_normalize(m.raw);
  return m;
}

ActivationMap upsample_cam(const ActivationMap& map, const Dims3& dims, UpsampleMode mode) {
  ActivationMap out;
  out.class_index = map.class_index;
  out.volume_id = map.volume_id;
  const Shape& s = map.normalized.shape();
  auto up = [&](const Array& a) {
    const Array a4 = a.reshaped(Shape{1, s[0], s[1], s[2]});
    Array r = mode == UpsampleMode::trilinear ? trilinear_upsample(a4, dims) : nearest_upsample(a4, dims);
    return r.reshaped(Shape{dims[0], dims[1], dims[2]});
  };
  out.raw = up(map.raw);
  out.normalized = up(map.normalized);
  return out;
}

std::vector<unsigned char> overlay_slice(const Array& map, const Array& volume, std::size_t k) {
  const std::size_t H = map.dim(1), W = map.dim(2);
  const auto [lo, hi] = std::minmax_element(volume.data().begin(), volume.data().end());
  const double range = *hi > *lo ? *hi - *lo : 1.0;
  std::vector<unsigned char> rgb(3 * H * W);
  for (std::size_t i = 0; i < H * W; ++i) {
    const double g = std::round(255.0 * (volume[k * H * W + i] - *lo) / range);
    const double a = 0.5 * std::clamp(map[k * H * W + i], 0.0, 1.0);
    const double r = (1.0 - a) * g + a * 255.0;
    const double gb = (1.0 - a) * g;
    rgb[3 * i] = (unsigned char)std::lround(std::clamp(r, 0.0, 255.0));
    rgb[3 * i + 1] = (unsigned char)std::lround(std::clamp(gb, 0.0, 255.0));
    rgb[3 * i + 2] = rgb[3 * i + 1];
  }
  return rgb;
}

std::vector<std::filesystem::path> export_overlays(const ActivationMap& map, const Array& volume,
                                                   const std::filesystem::path& out_dir) {
  const Array& m = map.normalized;
  Array vol = volume;
  if (vol.rank() == 4 && vol.dim(0) == 1) vol = vol.reshaped(Shape{vol.dim(1), vol.dim(2), vol.dim(3)});
  if (m.shape() != vol.shape())
    throw DimensionError("export_overlays: map " + shape_str(m.shape()) + " is not at volume resolution " +
                         shape_str(vol.shape()));
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir))
    throw IoError("cannot create output directory " + out_dir.string());

  const std::string id = map.volume_id.empty() ? "volume" : map.volume_id;
  const std::size_t D = m.dim(0), H = m.dim(1), W = m.dim(2);
  std::vector<std::filesystem::path> written;
  for (std::size_t k = 0; k < D; ++k) {
    const auto path = out_dir / (id + "_slice" + std::to_string(k) + ".ppm");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    os << "P6\n" << W << ' ' << H << "\n255\n";
    const auto rgb = overlay_slice(m, vol, k);
    os.write(reinterpret_cast<const char*>(rgb.data()), std::streamsize(rgb.size()));
    if (!os) throw IoError("write failed for " + path.string());
    written.push_back(path);
  }
  const auto raw_path = out_dir / (id + "_cam.v3d");
  save_volume(raw_path, m);
  written.push_back(raw_path);
  return written;
}

}  // namespace dnas3d
