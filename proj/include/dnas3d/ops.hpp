#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dnas3d/tensor.hpp"

namespace dnas3d {

enum class Mode { train, eval };

struct BatchNormState {
  Array running_mean;
  Array running_var;
  bool initialized = false;
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNormState(std::size_t channels = 1)
      : running_mean(Shape{channels}, 0.0), running_var(Shape{channels}, 1.0) {}
};

// All convolutions take NCDHW input and a cubic kernel.
Tensor conv3d(const Tensor& input, const Tensor& weight, int stride, int padding);
Tensor depthwise_conv3d(const Tensor& input, const Tensor& weight, int stride, int padding);

/// Per-channel batch normalization over (B, D, H, W). Train mode uses batch
/// statistics and updates `state`; eval mode requires initialized running
/// statistics.
Tensor batchnorm3d(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                   BatchNormState& state, Mode mode);

Tensor relu6(const Tensor& input);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// Multiplies every element of x by the single element of `s`.
Tensor scale(const Tensor& x, const Tensor& s);
Tensor sum(const Tensor& x);

Tensor global_avg_pool3d(const Tensor& input);
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

// Row r of a rank-2 tensor.
Tensor select_row(const Tensor& x, std::size_t row);
// x + c for a constant array c of the same shape.
Tensor add_constant(const Tensor& x, const Array& c);
// softmax(x / temperature) over a rank-1 tensor.
Tensor softmax(const Tensor& x, double temperature = 1.0);
// Straight-through gate: forward value is exactly 1, the incoming gradient
// is routed to soft[index].
Tensor straight_through(const Tensor& soft, std::size_t index);
// Sum_k weights[k] * values[k]; all values share one shape.
Tensor weighted_sum(const Tensor& weights, const std::vector<Tensor>& values);

// Plain softmax of a span, max-subtracted.
std::vector<double> softmax_values(std::span<const double> logits, double temperature = 1.0);

}  // namespace dnas3d
