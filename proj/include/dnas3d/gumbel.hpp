#pragma once

#include <span>
#include <vector>

#include "dnas3d/random.hpp"
#include "dnas3d/tensor.hpp"

namespace dnas3d {

struct GumbelDraw {
  int hard_index = 0;
  std::vector<double> soft_weights;  // softmax((alpha + G) / tau)
  std::vector<double> noise;         // G_k = -log(-log u_k)
};

/// Gumbel-Softmax sampler with its own generator stream.
class GumbelSampler {
 public:
  GumbelSampler(double tau, Rng rng);

  double tau() const { return tau_; }
  void set_tau(double tau);

  // u_k ~ U(0,1), clamped to [1e-12, 1 - 1e-12], mapped to Gumbel(0,1).
  std::vector<double> draw_noise(std::size_t k);
  GumbelDraw sample(std::span<const double> alpha_row);

 private:
  double tau_;
  Rng rng_;
};

// Soft weights for logits with fixed noise; used by sample() and the
// straight-through path, and exposed for gradient checks.
std::vector<double> gumbel_soft_weights(std::span<const double> alpha_row, std::span<const double> noise,
                                        double tau);

// Exponential anneal: tau_start at epoch 0, tau_end at epoch (epochs - 1).
double tau_schedule(int epoch, int epochs, double tau_start, double tau_end);

struct GatedSelection {
  std::vector<int> selections;
  std::vector<Tensor> gates;  // empty when not requested
};

/// One Gumbel draw per row of alpha [P, K]. With `with_gates` each gate is a
/// straight-through scalar whose forward value is 1 and whose gradient flows
/// to alpha through the soft weights.
GatedSelection sample_architecture(GumbelSampler& sampler, const Tensor& alpha, bool with_gates);

/// Differentiable softmax mixture sum_k softmax(alpha_row)_k * outputs[k].
Tensor relaxed_mixture(const Tensor& alpha_row, const std::vector<Tensor>& op_outputs);

std::vector<int> argmax_rows(const Array& alpha);

}  // namespace dnas3d
