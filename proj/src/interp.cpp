#include "dnas3d/interp.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dnas3d/errors.hpp"

namespace dnas3d {

namespace {

struct Sample {
  std::size_t lo, hi;
  double frac;
};

std::vector<Sample> axis_samples(std::size_t in, std::size_t out) {
  std::vector<Sample> s(out);
  const double scale = double(in) / double(out);
  for (std::size_t i = 0; i < out; ++i) {
    double src = (double(i) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, double(in - 1));
    const auto lo = std::size_t(std::floor(src));
    const std::size_t hi = std::min(lo + 1, in - 1);
    s[i] = {lo, hi, src - double(lo)};
  }
  return s;
}

void check_rank4(const Array& a, const Dims3& target) {
  if (a.rank() != 4) throw DimensionError("upsample expects a [C,D,H,W] array, got " + shape_str(a.shape()));
  for (auto t : target)
    if (t == 0) throw ArgumentError("upsample target dims must be >= 1");
}

}  // namespace

Array trilinear_upsample(const Array& input, const Dims3& target) {
  check_rank4(input, target);
  const std::size_t C = input.dim(0), D = input.dim(1), H = input.dim(2), W = input.dim(3);
  const auto sd = axis_samples(D, target[0]);
  const auto sh = axis_samples(H, target[1]);
  const auto sw = axis_samples(W, target[2]);
  Array out(Shape{C, target[0], target[1], target[2]});
  auto at = [&](std::size_t c, std::size_t d, std::size_t h, std::size_t w) {
    return input[((c * D + d) * H + h) * W + w];
  };
  std::size_t o = 0;
  for (std::size_t c = 0; c < C; ++c)
    for (const auto& a : sd)
      for (const auto& b : sh)
        for (const auto& e : sw) {
          const double c00 = at(c, a.lo, b.lo, e.lo) * (1 - e.frac) + at(c, a.lo, b.lo, e.hi) * e.frac;
          const double c01 = at(c, a.lo, b.hi, e.lo) * (1 - e.frac) + at(c, a.lo, b.hi, e.hi) * e.frac;
          const double c10 = at(c, a.hi, b.lo, e.lo) * (1 - e.frac) + at(c, a.hi, b.lo, e.hi) * e.frac;
          const double c11 = at(c, a.hi, b.hi, e.lo) * (1 - e.frac) + at(c, a.hi, b.hi, e.hi) * e.frac;
          const double c0 = c00 * (1 - b.frac) + c01 * b.frac;
          const double c1 = c10 * (1 - b.frac) + c11 * b.frac;
          out[o++] = c0 * (1 - a.frac) + c1 * a.frac;
        }
  return out;
}

Array nearest_upsample(const Array& input, const Dims3& target) {
  check_rank4(input, target);
  const std::size_t C = input.dim(0), D = input.dim(1), H = input.dim(2), W = input.dim(3);
  auto idx = [](std::size_t i, std::size_t in, std::size_t out) {
    return std::min(in - 1, std::size_t((double(i) + 0.5) * double(in) / double(out)));
  };
  Array out(Shape{C, target[0], target[1], target[2]});
  std::size_t o = 0;
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t d = 0; d < target[0]; ++d)
      for (std::size_t h = 0; h < target[1]; ++h)
        for (std::size_t w = 0; w < target[2]; ++w)
          out[o++] = input[((c * D + idx(d, D, target[0])) * H + idx(h, H, target[1])) * W +
                           idx(w, W, target[2])];
  return out;
}

Array bilinear_resize(const Array& plane, std::size_t height, std::size_t width) {
  if (plane.rank() != 2) throw DimensionError("bilinear_resize expects [H,W]");
  const std::size_t H = plane.dim(0), W = plane.dim(1);
  auto out = trilinear_upsample(plane.reshaped(Shape{1, 1, H, W}), {1, height, width});
  return out.reshaped(Shape{height, width});
}

}  // namespace dnas3d
