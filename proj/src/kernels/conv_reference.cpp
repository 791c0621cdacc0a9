#include "dnas3d/kernels.hpp"

namespace dnas3d::kernels::reference {

namespace {

// Visits every (output voxel, kernel tap) pair whose input tap is in bounds.
template <typename F>
void for_each_tap(const ConvGeometry& g, F&& f) {
  const std::ptrdiff_t D = g.depth, H = g.height, W = g.width;
  const std::ptrdiff_t K = g.kernel, s = g.stride, p = g.padding;
  const std::size_t OD = g.out_depth(), OH = g.out_height(), OW = g.out_width();
  for (std::size_t od = 0; od < OD; ++od)
    for (std::size_t oh = 0; oh < OH; ++oh)
      for (std::size_t ow = 0; ow < OW; ++ow)
        for (std::ptrdiff_t kd = 0; kd < K; ++kd)
          for (std::ptrdiff_t kh = 0; kh < K; ++kh)
            for (std::ptrdiff_t kw = 0; kw < K; ++kw) {
              const std::ptrdiff_t id = std::ptrdiff_t(od) * s + kd - p;
              const std::ptrdiff_t ih = std::ptrdiff_t(oh) * s + kh - p;
              const std::ptrdiff_t iw = std::ptrdiff_t(ow) * s + kw - p;
              if (id < 0 || id >= D || ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
              const std::size_t o = (od * OH + oh) * OW + ow;
              const std::size_t i = (std::size_t(id) * H + ih) * W + iw;
              const std::size_t k = (std::size_t(kd) * K + kh) * K + kw;
              f(o, i, k);
            }
}

}  // namespace

void conv3d_forward(const ConvGeometry& g, std::span<const double> in,
                    std::span<const double> weight, std::span<double> out) {
  const std::size_t iv = g.in_volume(), ov = g.out_volume(), kv = g.kernel_volume();
  for (double& v : out) v = 0.0;
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t co = 0; co < g.out_channels; ++co)
      for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
        const double* x = in.data() + (b * g.in_channels + ci) * iv;
        const double* w = weight.data() + (co * g.in_channels + ci) * kv;
        double* y = out.data() + (b * g.out_channels + co) * ov;
        for_each_tap(g, [&](std::size_t o, std::size_t i, std::size_t k) { y[o] += w[k] * x[i]; });
      }
}

void conv3d_backward_input(const ConvGeometry& g, std::span<const double> grad_out,
                           std::span<const double> weight, std::span<double> grad_in) {
  const std::size_t iv = g.in_volume(), ov = g.out_volume(), kv = g.kernel_volume();
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t co = 0; co < g.out_channels; ++co)
      for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
        double* dx = grad_in.data() + (b * g.in_channels + ci) * iv;
        const double* w = weight.data() + (co * g.in_channels + ci) * kv;
        const double* dy = grad_out.data() + (b * g.out_channels + co) * ov;
        for_each_tap(g, [&](std::size_t o, std::size_t i, std::size_t k) { dx[i] += w[k] * dy[o]; });
      }
}

void conv3d_backward_weight(const ConvGeometry& g, std::span<const double> in,
                            std::span<const double> grad_out, std::span<double> grad_weight) {
  const std::size_t iv = g.in_volume(), ov = g.out_volume(), kv = g.kernel_volume();
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t co = 0; co < g.out_channels; ++co)
      for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
        const double* x = in.data() + (b * g.in_channels + ci) * iv;
        double* dw = grad_weight.data() + (co * g.in_channels + ci) * kv;
        const double* dy = grad_out.data() + (b * g.out_channels + co) * ov;
        for_each_tap(g, [&](std::size_t o, std::size_t i, std::size_t k) { dw[k] += dy[o] * x[i]; });
      }
}

void depthwise3d_forward(const ConvGeometry& g, std::span<const double> in,
                         std::span<const double> weight, std::span<double> out) {
  const std::size_t iv = g.in_volume(), ov = g.out_volume(), kv = g.kernel_volume();
  const std::size_t C = g.in_channels;
  for (double& v : out) v = 0.0;
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      const double* x = in.data() + (b * C + c) * iv;
      const double* w = weight.data() + c * kv;
      double* y = out.data() + (b * C + c) * ov;
      for_each_tap(g, [&](std::size_t o, std::size_t i, std::size_t k) { y[o] += w[k] * x[i]; });
    }
}

void depthwise3d_backward_input(const ConvGeometry& g, std::span<const double> grad_out,
                                std::span<const double> weight, std::span<double> grad_in) {
  const std::size_t iv = g.in_volume(), ov = g.out_volume(), kv = g.kernel_volume();
  const std::size_t C = g.in_channels;
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      double* dx = grad_in.data() + (b * C + c) * iv;
      const double* w = weight.data() + c * kv;
      const double* dy = grad_out.data() + (b * C + c) * ov;
      for_each_tap(g, [&](std::size_t o, std::size_t i, std::size_t k) { dx[i] += w[k] * dy[o]; });
    }
}

void depthwise3d_backward_weight(const ConvGeometry& g, std::span<const double> in,
                                 std::span<const double> grad_out,
                                 std::span<double> grad_weight) {
  const std::size_t iv = g.in_volume(), ov = g.out_volume(), kv = g.kernel_volume();
  const std::size_t C = g.in_channels;
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      const double* x = in.data() + (b * C + c) * iv;
      double* dw = grad_weight.data() + c * kv;
      const double* dy = grad_out.data() + (b * C + c) * ov;
      for_each_tap(g, [&](std::size_t o, std::size_t i, std::size_t k) { dw[k] += dy[o] * x[i]; });
    }
}

}  // namespace dnas3d::kernels::reference
