#pragma once

#include <cstddef>
#include <span>

namespace dnas3d::kernels {

// Geometry of a cubic-kernel 3D convolution over NCDHW data.
struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t depth = 1, height = 1, width = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t out_depth() const { return (depth + 2 * padding - kernel) / stride + 1; }
  std::size_t out_height() const { return (height + 2 * padding - kernel) / stride + 1; }
  std::size_t out_width() const { return (width + 2 * padding - kernel) / stride + 1; }
  std::size_t in_volume() const { return depth * height * width; }
  std::size_t out_volume() const { return out_depth() * out_height() * out_width(); }
  std::size_t kernel_volume() const { return kernel * kernel * kernel; }
};

// Dense convolution: weight is [Cout, Cin, K, K, K]. The forward kernel
// overwrites `out`; backward kernels accumulate into their destination.
void conv3d_forward(const ConvGeometry& g, std::span<const double> in,
                    std::span<const double> weight, std::span<double> out);
void conv3d_backward_input(const ConvGeometry& g, std::span<const double> grad_out,
                           std::span<const double> weight, std::span<double> grad_in);
void conv3d_backward_weight(const ConvGeometry& g, std::span<const double> in,
                            std::span<const double> grad_out, std::span<double> grad_weight);

// Depthwise convolution: in_channels == out_channels, weight is [C, 1, K, K, K].
void depthwise3d_forward(const ConvGeometry& g, std::span<const double> in,
                         std::span<const double> weight, std::span<double> out);
void depthwise3d_backward_input(const ConvGeometry& g, std::span<const double> grad_out,
                                std::span<const double> weight, std::span<double> grad_in);
void depthwise3d_backward_weight(const ConvGeometry& g, std::span<const double> in,
                                 std::span<const double> grad_out,
                                 std::span<double> grad_weight);

// Naive per-output-voxel loops. Kept as the oracle for the parallel kernels
// and as the baseline in bench/.
namespace reference {
void conv3d_forward(const ConvGeometry& g, std::span<const double> in,
                    std::span<const double> weight, std::span<double> out);
void conv3d_backward_input(const ConvGeometry& g, std::span<const double> grad_out,
                           std::span<const double> weight, std::span<double> grad_in);
void conv3d_backward_weight(const ConvGeometry& g, std::span<const double> in,
                            std::span<const double> grad_out, std::span<double> grad_weight);
void depthwise3d_forward(const ConvGeometry& g, std::span<const double> in,
                         std::span<const double> weight, std::span<double> out);
void depthwise3d_backward_input(const ConvGeometry& g, std::span<const double> grad_out,
                                std::span<const double> weight, std::span<double> grad_in);
void depthwise3d_backward_weight(const ConvGeometry& g, std::span<const double> in,
                                 std::span<const double> grad_out,
                                 std::span<double> grad_weight);
}  // namespace reference

}  // namespace dnas3d::kernels
