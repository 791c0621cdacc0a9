#include <algorithm>
#include <vector>

#include "dnas3d/kernels.hpp"

namespace dnas3d::kernels {

namespace {

// Output indices o in [lo, hi) whose tap o*s + k - p lands inside [0, n).
struct TapRange {
  std::size_t lo = 0, hi = 0;
};

TapRange tap_range(std::size_t n, std::size_t out_n, std::size_t k, std::size_t s,
                   std::size_t p) {
  const std::ptrdiff_t kk = std::ptrdiff_t(k), pp = std::ptrdiff_t(p), ss = std::ptrdiff_t(s);
  std::ptrdiff_t lo = 0;
  if (kk < pp) lo = (pp - kk + ss - 1) / ss;
  const std::ptrdiff_t last = std::ptrdiff_t(n) - 1 + pp - kk;
  if (last < 0) return {};
  std::ptrdiff_t hi = std::min<std::ptrdiff_t>(std::ptrdiff_t(out_n) - 1, last / ss) + 1;
  if (hi <= lo) return {};
  return {std::size_t(lo), std::size_t(hi)};
}

struct Taps {
  std::vector<TapRange> d, h, w;
  explicit Taps(const ConvGeometry& g) {
    for (std::size_t k = 0; k < g.kernel; ++k) {
      d.push_back(tap_range(g.depth, g.out_depth(), k, g.stride, g.padding));
      h.push_back(tap_range(g.height, g.out_height(), k, g.stride, g.padding));
      w.push_back(tap_range(g.width, g.out_width(), k, g.stride, g.padding));
    }
  }
};

// y += conv(x, w) for one (input plane, output plane) pair.
void plane_forward(const ConvGeometry& g, const Taps& t, const double* x, const double* w,
                   double* y) {
  const std::size_t K = g.kernel, s = g.stride, p = g.padding;
  const std::size_t H = g.height, W = g.width, OH = g.out_height(), OW = g.out_width();
  for (std::size_t kd = 0; kd < K; ++kd)
    for (std::size_t kh = 0; kh < K; ++kh)
      for (std::size_t kw = 0; kw < K; ++kw) {
        const double wv = w[(kd * K + kh) * K + kw];
        const TapRange rd = t.d[kd], rh = t.h[kh], rw = t.w[kw];
        if (rw.hi == rw.lo) continue;
        for (std::size_t od = rd.lo; od < rd.hi; ++od) {
          const std::size_t id = od * s + kd - p;
          for (std::size_t oh = rh.lo; oh < rh.hi; ++oh) {
            const std::size_t ih = oh * s + kh - p;
            double* yr = y + (od * OH + oh) * OW + rw.lo;
            const double* xr = x + (id * H + ih) * W + rw.lo * s + kw - p;
            const std::size_t n = rw.hi - rw.lo;
            if (s == 1) {
              for (std::size_t j = 0; j < n; ++j) yr[j] += wv * xr[j];
            } else {
              for (std::size_t j = 0; j < n; ++j) yr[j] += wv * xr[j * s];
            }
          }
        }
      }
}

// dx += conv^T(dy, w) for one plane pair.
void plane_backward_input(const ConvGeometry& g, const Taps& t, const double* dy,
                          const double* w, double* dx) {
  const std::size_t K = g.kernel, s = g.stride, p = g.padding;
  const std::size_t H = g.height, W = g.width, OH = g.out_height(), OW = g.out_width();
  for (std::size_t kd = 0; kd < K; ++kd)
    for (std::size_t kh = 0; kh < K; ++kh)
      for (std::size_t kw = 0; kw < K; ++kw) {
        const double wv = w[(kd * K + kh) * K + kw];
        const TapRange rd = t.d[kd], rh = t.h[kh], rw = t.w[kw];
        if (rw.hi == rw.lo) continue;
        for (std::size_t od = rd.lo; od < rd.hi; ++od) {
          const std::size_t id = od * s + kd - p;
          for (std::size_t oh = rh.lo; oh < rh.hi; ++oh) {
            const std::size_t ih = oh * s + kh - p;
            const double* dyr = dy + (od * OH + oh) * OW + rw.lo;
            double* dxr = dx + (id * H + ih) * W + rw.lo * s + kw - p;
            const std::size_t n = rw.hi - rw.lo;
            if (s == 1) {
              for (std::size_t j = 0; j < n; ++j) dxr[j] += wv * dyr[j];
            } else {
              for (std::size_t j = 0; j < n; ++j) dxr[j * s] += wv * dyr[j];
            }
          }
        }
      }
}

// dw += correlation of x with dy for one plane pair.
void plane_backward_weight(const ConvGeometry& g, const Taps& t, const double* x,
                           const double* dy, double* dw) {
  const std::size_t K = g.kernel, s = g.stride, p = g.padding;
  const std::size_t H = g.height, W = g.width, OH = g.out_height(), OW = g.out_width();
  for (std::size_t kd = 0; kd < K; ++kd)
    for (std::size_t kh = 0; kh < K; ++kh)
      for (std::size_t kw = 0; kw < K; ++kw) {
        const TapRange rd = t.d[kd], rh = t.h[kh], rw = t.w[kw];
        if (rw.hi == rw.lo) continue;
        double acc = 0.0;
        for (std::size_t od = rd.lo; od < rd.hi; ++od) {
          const std::size_t id = od * s + kd - p;
          for (std::size_t oh = rh.lo; oh < rh.hi; ++oh) {
            const std::size_t ih = oh * s + kh - p;
            const double* dyr = dy + (od * OH + oh) * OW + rw.lo;
            const double* xr = x + (id * H + ih) * W + rw.lo * s + kw - p;
            const std::size_t n = rw.hi - rw.lo;
            for (std::size_t j = 0; j < n; ++j) acc += dyr[j] * xr[j * s];
          }
        }
        dw[(kd * K + kh) * K + kw] += acc;
      }
}

}  // namespace

void conv3d_forward(const ConvGeometry& g, std::span<const double> in,
                    std::span<const double> weight, std::span<double> out) {
  const Taps taps(g);
  const std::size_t iv = g.in_volume(), ov = g.out_volume(), kv = g.kernel_volume();
  const std::ptrdiff_t B = g.batch, CO = g.out_channels;
#pragma omp parallel for collapse(2) schedule(static)
  for (std::ptrdiff_t b = 0; b < B; ++b)
    for (std::ptrdiff_t co = 0; co < CO; ++co) {
      double* y = out.data() + (b * CO + co) * ov;
      std::fill(y, y + ov, 0.0);
      for (std::size_t ci = 0; ci < g.in_channels; ++ci)
        plane_forward(g, taps, in.data() + (b * g.in_channels + ci) * iv,
                      weight.data() + (co * g.in_channels + ci) * kv, y);
    }
}

void conv3d_backward_input(const ConvGeometry& g, std::span<const double> grad_out,
                           std::span<const double> weight, std::span<double> grad_in) {
  const Taps taps(g);
  const std::size_t iv = g.in_volume(), ov = g.out_volume(), kv = g.kernel_volume();
  const std::ptrdiff_t B = g.batch, CI = g.in_channels;
#pragma omp parallel for collapse(2) schedule(static)
  for (std::ptrdiff_t b = 0; b < B; ++b)
    for (std::ptrdiff_t ci = 0; ci < CI; ++ci) {
      double* dx = grad_in.data() + (b * CI + ci) * iv;
      for (std::size_t co = 0; co < g.out_channels; ++co)
        plane_backward_input(g, taps, grad_out.data() + (b * g.out_channels + co) * ov,
                             weight.data() + (co * CI + ci) * kv, dx);
    }
}

void conv3d_backward_weight(const ConvGeometry& g, std::span<const double> in,
                            std::span<const double> grad_out, std::span<double> grad_weight) {
  const Taps taps(g);
  const std::size_t iv = g.in_volume(), ov = g.out_volume(), kv = g.kernel_volume();
  const std::ptrdiff_t CO = g.out_channels, CI = g.in_channels;
#pragma omp parallel for collapse(2) schedule(static)
  for (std::ptrdiff_t co = 0; co < CO; ++co)
    for (std::ptrdiff_t ci = 0; ci < CI; ++ci) {
      double* dw = grad_weight.data() + (co * CI + ci) * kv;
      for (std::size_t b = 0; b < g.batch; ++b)
        plane_backward_weight(g, taps, in.data() + (b * CI + ci) * iv,
                              grad_out.data() + (b * CO + co) * ov, dw);
    }
}

void depthwise3d_forward(const ConvGeometry& g, std::span<const double> in,
                         std::span<const double> weight, std::span<double> out) {
  const Taps taps(g);
  const std::size_t iv = g.in_volume(), ov = g.out_volume(), kv = g.kernel_volume();
  const std::ptrdiff_t B = g.batch, C = g.in_channels;
#pragma omp parallel for collapse(2) schedule(static)
  for (std::ptrdiff_t b = 0; b < B; ++b)
    for (std::ptrdiff_t c = 0; c < C; ++c) {
      double* y = out.data() + (b * C + c) * ov;
      std::fill(y, y + ov, 0.0);
      plane_forward(g, taps, in.data() + (b * C + c) * iv, weight.data() + c * kv, y);
    }
}

void depthwise3d_backward_input(const ConvGeometry& g, std::span<const double> grad_out,
                                std::span<const double> weight, std::span<double> grad_in) {
  const Taps taps(g);
  const std::size_t iv = g.in_volume(), ov = g.out_volume(), kv = g.kernel_volume();
  const std::ptrdiff_t B = g.batch, C = g.in_channels;
#pragma omp parallel for collapse(2) schedule(static)
  for (std::ptrdiff_t b = 0; b < B; ++b)
    for (std::ptrdiff_t c = 0; c < C; ++c)
      plane_backward_input(g, taps, grad_out.data() + (b * C + c) * ov, weight.data() + c * kv,
                           grad_in.data() + (b * C + c) * iv);
}

void depthwise3d_backward_weight(const ConvGeometry& g, std::span<const double> in,
                                 std::span<const double> grad_out,
                                 std::span<double> grad_weight) {
  const Taps taps(g);
  const std::size_t iv = g.in_volume(), ov = g.out_volume(), kv = g.kernel_volume();
  const std::ptrdiff_t C = g.in_channels;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < C; ++c)
    for (std::size_t b = 0; b < g.batch; ++b)
      plane_backward_weight(g, taps, in.data() + (b * C + c) * iv,
                            grad_out.data() + (b * C + c) * ov, grad_weight.data() + c * kv);
}

}  // namespace dnas3d::kernels
