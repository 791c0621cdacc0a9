#include "dnas3d/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dnas3d/errors.hpp"
#include "dnas3d/kernels.hpp"

namespace dnas3d {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.shape().size() != rank)
    throw DimensionError(std::string(what) + ": expected rank " + std::to_string(rank) +
                         ", got " + shape_str(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

kernels::ConvGeometry geometry(const Tensor& input, const Tensor& weight, int stride,
                               int padding, bool depthwise, const char* what) {
  require_rank(input, 5, what);
  require_rank(weight, 5, what);
  if (stride < 1) throw ArgumentError(std::string(what) + ": stride must be >= 1");
  if (padding < 0) throw ArgumentError(std::string(what) + ": padding must be >= 0");
  const Shape& x = input.shape();
  const Shape& w = weight.shape();
  if (w[2] != w[3] || w[3] != w[4])
    throw DimensionError(std::string(what) + ": kernel must be cubic, got " + shape_str(w));
  if (depthwise) {
    if (w[0] != x[1] || w[1] != 1)
      throw DimensionError(std::string(what) + ": weight " + shape_str(w) +
                           " does not match input channels of " + shape_str(x));
  } else if (w[1] != x[1]) {
    throw DimensionError(std::string(what) + ": weight " + shape_str(w) +
                         " does not match input channels of " + shape_str(x));
  }
  kernels::ConvGeometry g;
  g.batch = x[0];
  g.in_channels = x[1];
  g.out_channels = w[0];
  g.depth = x[2];
  g.height = x[3];
  g.width = x[4];
  g.kernel = w[2];
  g.stride = std::size_t(stride);
  g.padding = std::size_t(padding);
  for (std::size_t n : {g.depth, g.height, g.width})
    if (n + 2 * g.padding < g.kernel)
      throw DimensionError(std::string(what) + ": kernel larger than padded input " +
                           shape_str(x));
  return g;
}

}  // namespace

Tensor conv3d(const Tensor& input, const Tensor& weight, int stride, int padding) {
  const auto g = geometry(input, weight, stride, padding, false, "conv3d");
  Array out(Shape{g.batch, g.out_channels, g.out_depth(), g.out_height(), g.out_width()});
  kernels::conv3d_forward(g, input.value().data(), weight.value().data(), out.data());
  return make_op(std::move(out), {input, weight}, [g](detail::Node& self) {
    auto& x = *self.parents[0];
    auto& w = *self.parents[1];
    if (x.requires_grad)
      kernels::conv3d_backward_input(g, self.grad.data(), w.value.data(), x.grad_buffer().data());
    if (w.requires_grad)
      kernels::conv3d_backward_weight(g, x.value.data(), self.grad.data(),
                                      w.grad_buffer().data());
  });
}

Tensor depthwise_conv3d(const Tensor& input, const Tensor& weight, int stride, int padding) {
  const auto g = geometry(input, weight, stride, padding, true, "depthwise_conv3d");
  Array out(Shape{g.batch, g.out_channels, g.out_depth(), g.out_height(), g.out_width()});
  kernels::depthwise3d_forward(g, input.value().data(), weight.value().data(), out.data());
  return make_op(std::move(out), {input, weight}, [g](detail::Node& self) {
    auto& x = *self.parents[0];
    auto& w = *self.parents[1];
    if (x.requires_grad)
      kernels::depthwise3d_backward_input(g, self.grad.data(), w.value.data(),
                                          x.grad_buffer().data());
    if (w.requires_grad)
      kernels::depthwise3d_backward_weight(g, x.value.data(), self.grad.data(),
                                           w.grad_buffer().data());
  });
}

Tensor batchnorm3d(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                   BatchNormState& state, Mode mode) {
  require_rank(input, 5, "batchnorm3d");
  const Shape& xs = input.shape();
  const std::size_t B = xs[0], C = xs[1], V = xs[2] * xs[3] * xs[4];
  if (gamma.shape() != Shape{C} || beta.shape() != Shape{C})
    throw DimensionError("batchnorm3d: affine parameters must have shape [" + std::to_string(C) +
                         "]");
  if (state.running_mean.size() != C || state.running_var.size() != C)
    throw DimensionError("batchnorm3d: running statistics have the wrong channel count");

  const std::size_t N = B * V;
  const double* x = input.value().raw();
  const double* gm = gamma.value().raw();
  const double* bt = beta.value().raw();
  Array out(xs);
  Array xhat(xs);
  std::vector<double> inv_std(C);

  if (mode == Mode::train) {
    if (N < 2) throw ArgumentError("batchnorm3d: train mode needs at least 2 values per channel");
    std::vector<double> mean(C), var(C);
    const std::ptrdiff_t CC = C;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < CC; ++c) {
      double s = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const double* p = x + (b * C + c) * V;
        for (std::size_t i = 0; i < V; ++i) s += p[i];
      }
      const double mu = s / double(N);
      double ss = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const double* p = x + (b * C + c) * V;
        for (std::size_t i = 0; i < V; ++i) ss += (p[i] - mu) * (p[i] - mu);
      }
      mean[c] = mu;
      var[c] = ss / double(N);
      inv_std[c] = 1.0 / std::sqrt(var[c] + state.eps);
    }
    const double unbias = double(N) / double(N - 1);
    for (std::size_t c = 0; c < C; ++c) {
      if (!state.initialized) {
        state.running_mean[c] = mean[c];
        state.running_var[c] = var[c] * unbias;
      } else {
        state.running_mean[c] = (1.0 - state.momentum) * state.running_mean[c] + state.momentum * mean[c];
        state.running_var[c] =
            (1.0 - state.momentum) * state.running_var[c] + state.momentum * var[c] * unbias;
      }
    }
    state.initialized = true;
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t off = (b * C + c) * V;
        for (std::size_t i = 0; i < V; ++i) {
          const double h = (x[off + i] - mean[c]) * inv_std[c];
          xhat[off + i] = h;
          out[off + i] = gm[c] * h + bt[c];
        }
      }
  } else {
    if (!state.initialized)
      throw StateError("batchnorm3d: eval mode with uninitialized running statistics");
    for (std::size_t c = 0; c < C; ++c) inv_std[c] = 1.0 / std::sqrt(state.running_var[c] + state.eps);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t off = (b * C + c) * V;
        const double mu = state.running_mean[c];
        for (std::size_t i = 0; i < V; ++i) {
          const double h = (x[off + i] - mu) * inv_std[c];
          xhat[off + i] = h;
          out[off + i] = gm[c] * h + bt[c];
        }
      }
  }

  const bool batch_stats = mode == Mode::train;
  return make_op(std::move(out), {input, gamma, beta},
                 [xhat = std::move(xhat), inv_std = std::move(inv_std), B, C, V,
                  batch_stats](detail::Node& self) {
                   auto& xn = *self.parents[0];
                   auto& gn = *self.parents[1];
                   auto& bn = *self.parents[2];
                   const double* dy = self.grad.raw();
                   std::vector<double> sum_dy(C, 0.0), sum_dy_xhat(C, 0.0);
                   for (std::size_t b = 0; b < B; ++b)
                     for (std::size_t c = 0; c < C; ++c) {
                       const std::size_t off = (b * C + c) * V;
                       double s1 = 0.0, s2 = 0.0;
                       for (std::size_t i = 0; i < V; ++i) {
                         s1 += dy[off + i];
                         s2 += dy[off + i] * xhat[off + i];
                       }
                       sum_dy[c] += s1;
                       sum_dy_xhat[c] += s2;
                     }
                   if (gn.requires_grad) {
                     auto& g = gn.grad_buffer();
                     for (std::size_t c = 0; c < C; ++c) g[c] += sum_dy_xhat[c];
                   }
                   if (bn.requires_grad) {
                     auto& g = bn.grad_buffer();
                     for (std::size_t c = 0; c < C; ++c) g[c] += sum_dy[c];
                   }
                   if (!xn.requires_grad) return;
                   auto& dx = xn.grad_buffer();
                   const double* gm = gn.value.raw();
                   const double n = double(B * V);
                   for (std::size_t b = 0; b < B; ++b)
                     for (std::size_t c = 0; c < C; ++c) {
                       const std::size_t off = (b * C + c) * V;
                       const double k = gm[c] * inv_std[c];
                       if (batch_stats) {
                         const double m1 = sum_dy[c] / n, m2 = sum_dy_xhat[c] / n;
                         for (std::size_t i = 0; i < V; ++i)
                           dx[off + i] += k * (dy[off + i] - m1 - xhat[off + i] * m2);
                       } else {
                         for (std::size_t i = 0; i < V; ++i) dx[off + i] += k * dy[off + i];
                       }
                     }
                 });
}

Tensor relu6(const Tensor& input) {
  Array out(input.shape());
  const double* x = input.value().raw();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(std::max(x[i], 0.0), 6.0);
  return make_op(std::move(out), {input}, [](detail::Node& self) {
    auto& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    auto& dx = xn.grad_buffer();
    const double* x = xn.value.raw();
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (x[i] > 0.0 && x[i] < 6.0) dx[i] += self.grad[i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Array out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_op(std::move(out), {a, b}, [](detail::Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Array out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_op(std::move(out), {a, b}, [](detail::Node& self) {
    auto& an = *self.parents[0];
    auto& bn = *self.parents[1];
    if (an.requires_grad) {
      auto& g = an.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bn.value[i];
    }
    if (bn.requires_grad) {
      auto& g = bn.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * an.value[i];
    }
  });
}

Tensor scale(const Tensor& x, const Tensor& s) {
  if (s.size() != 1) throw DimensionError("scale: factor must have one element");
  const double k = s.value()[0];
  Array out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] * k;
  return make_op(std::move(out), {x, s}, [](detail::Node& self) {
    auto& xn = *self.parents[0];
    auto& sn = *self.parents[1];
    const double k = sn.value[0];
    if (xn.requires_grad) {
      auto& g = xn.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * k;
    }
    if (sn.requires_grad) {
      double acc = 0.0;
      for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * xn.value[i];
      sn.grad_buffer()[0] += acc;
    }
  });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.value().data()) acc += v;
  return make_op(Array(Shape{1}, acc), {x}, [](detail::Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0];
  });
}

Tensor global_avg_pool3d(const Tensor& input) {
  require_rank(input, 5, "global_avg_pool3d");
  const Shape& xs = input.shape();
  const std::size_t B = xs[0], C = xs[1], V = xs[2] * xs[3] * xs[4];
  Array out(Shape{B, C});
  const double* x = input.value().raw();
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    double s = 0.0;
    for (std::size_t i = 0; i < V; ++i) s += x[bc * V + i];
    out[bc] = s / double(V);
  }
  return make_op(std::move(out), {input}, [B, C, V](detail::Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t bc = 0; bc < B * C; ++bc) {
      const double d = self.grad[bc] / double(V);
      for (std::size_t i = 0; i < V; ++i) g[bc * V + i] += d;
    }
  });
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank(input, 2, "linear");
  require_rank(weight, 2, "linear");
  const std::size_t B = input.shape()[0], F = input.shape()[1], O = weight.shape()[0];
  if (weight.shape()[1] != F || bias.shape() != Shape{O})
    throw DimensionError("linear: weight " + shape_str(weight.shape()) + " / bias " +
                         shape_str(bias.shape()) + " incompatible with input " +
                         shape_str(input.shape()));
  Array out(Shape{B, O});
  const double* x = input.value().raw();
  const double* w = weight.value().raw();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < O; ++o) {
      double s = bias.value()[o];
      for (std::size_t f = 0; f < F; ++f) s += w[o * F + f] * x[b * F + f];
      out[b * O + o] = s;
    }
  return make_op(std::move(out), {input, weight, bias}, [B, F, O](detail::Node& self) {
    auto& xn = *self.parents[0];
    auto& wn = *self.parents[1];
    auto& bn = *self.parents[2];
    const double* dy = self.grad.raw();
    if (xn.requires_grad) {
      auto& dx = xn.grad_buffer();
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t o = 0; o < O; ++o)
          for (std::size_t f = 0; f < F; ++f) dx[b * F + f] += dy[b * O + o] * wn.value[o * F + f];
    }
    if (wn.requires_grad) {
      auto& dw = wn.grad_buffer();
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t o = 0; o < O; ++o)
          for (std::size_t f = 0; f < F; ++f) dw[o * F + f] += dy[b * O + o] * xn.value[b * F + f];
    }
    if (bn.requires_grad) {
      auto& db = bn.grad_buffer();
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t o = 0; o < O; ++o) db[o] += dy[b * O + o];
    }
  });
}

std::vector<double> softmax_values(std::span<const double> logits, double temperature) {
  std::vector<double> p(logits.size());
  if (p.empty()) return p;
  double m = logits[0] / temperature;
  for (double v : logits) m = std::max(m, v / temperature);
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] / temperature - m);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rank(logits, 2, "softmax_cross_entropy");
  const std::size_t B = logits.shape()[0], K = logits.shape()[1];
  if (labels.size() != B) throw DimensionError("softmax_cross_entropy: label count != batch size");
  Array probs(Shape{B, K});
  double loss = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    if (labels[b] < 0 || std::size_t(labels[b]) >= K)
      throw ArgumentError("softmax_cross_entropy: label " + std::to_string(labels[b]) +
                          " out of range [0," + std::to_string(K) + ")");
    const auto row = logits.value().data().subspan(b * K, K);
    double m = row[0];
    for (double v : row) m = std::max(m, v);
    double z = 0.0;
    for (double v : row) z += std::exp(v - m);
    const double lse = m + std::log(z);
    loss += lse - row[labels[b]];
    for (std::size_t k = 0; k < K; ++k) probs[b * K + k] = std::exp(row[k] - lse);
  }
  loss /= double(B);
  std::vector<int> y(labels.begin(), labels.end());
  return make_op(Array(Shape{1}, loss), {logits},
                 [probs = std::move(probs), y = std::move(y), B, K](detail::Node& self) {
                   auto& g = self.parents[0]->grad_buffer();
                   const double s = self.grad[0] / double(B);
                   for (std::size_t b = 0; b < B; ++b)
                     for (std::size_t k = 0; k < K; ++k)
                       g[b * K + k] +=
                           s * (probs[b * K + k] - (int(k) == y[b] ? 1.0 : 0.0));
                 });
}

Tensor select_row(const Tensor& x, std::size_t row) {
  require_rank(x, 2, "select_row");
  const std::size_t R = x.shape()[0], K = x.shape()[1];
  if (row >= R) throw ArgumentError("select_row: row out of range");
  const auto src = x.value().data().subspan(row * K, K);
  Array out(Shape{K}, std::vector<double>(src.begin(), src.end()));
  return make_op(std::move(out), {x}, [row, K](detail::Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t k = 0; k < K; ++k) g[row * K + k] += self.grad[k];
  });
}

Tensor add_constant(const Tensor& x, const Array& c) {
  if (c.shape() != x.shape()) throw DimensionError("add_constant: shape mismatch");
  Array out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] + c[i];
  return make_op(std::move(out), {x}, [](detail::Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor softmax(const Tensor& x, double temperature) {
  require_rank(x, 1, "softmax");
  if (!(temperature > 0.0)) throw ArgumentError("softmax: temperature must be positive");
  auto p = softmax_values(x.value().data(), temperature);
  const std::size_t K = p.size();
  Array out(Shape{K}, p);
  return make_op(std::move(out), {x}, [p = std::move(p), temperature](detail::Node& self) {
    // dL/dx_j = p_j (g_j - <g, p>) / T
    double dot = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) dot += self.grad[k] * p[k];
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t j = 0; j < p.size(); ++j) g[j] += p[j] * (self.grad[j] - dot) / temperature;
  });
}

Tensor straight_through(const Tensor& soft, std::size_t index) {
  require_rank(soft, 1, "straight_through");
  if (index >= soft.size()) throw ArgumentError("straight_through: index out of range");
  return make_op(Array(Shape{1}, 1.0), {soft}, [index](detail::Node& self) {
    self.parents[0]->grad_buffer()[index] += self.grad[0];
  });
}

Tensor weighted_sum(const Tensor& weights, const std::vector<Tensor>& values) {
  require_rank(weights, 1, "weighted_sum");
  if (values.size() != weights.size())
    throw DimensionError("weighted_sum: need one value per weight");
  Array out(values.at(0).shape());
  for (std::size_t k = 0; k < values.size(); ++k) {
    require_same_shape(values[0], values[k], "weighted_sum");
    const double w = weights.value()[k];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * values[k].value()[i];
  }
  std::vector<Tensor> inputs{weights};
  inputs.insert(inputs.end(), values.begin(), values.end());
  return make_op(std::move(out), inputs, [](detail::Node& self) {
    auto& wn = *self.parents[0];
    const std::size_t K = self.parents.size() - 1;
    for (std::size_t k = 0; k < K; ++k) {
      auto& vn = *self.parents[k + 1];
      if (wn.requires_grad) {
        double acc = 0.0;
        for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * vn.value[i];
        wn.grad_buffer()[k] += acc;
      }
      if (vn.requires_grad) {
        auto& g = vn.grad_buffer();
        const double w = wn.value[k];
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += w * self.grad[i];
      }
    }
  });
}

}  // namespace dnas3d
