#include "dnas3d/gumbel.hpp"

#include <algorithm>
#include <cmath>

#include "dnas3d/errors.hpp"
#include "dnas3d/ops.hpp"

namespace dnas3d {

GumbelSampler::GumbelSampler(double tau, Rng rng) : tau_(tau), rng_(std::move(rng)) { set_tau(tau); }

void GumbelSampler::set_tau(double tau) {
  if (!(tau > 0.0)) throw ArgumentError("Gumbel temperature must be positive");
  tau_ = tau;
}

std::vector<double> GumbelSampler::draw_noise(std::size_t k) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> g(k);
  for (double& v : g) {
    const double u = std::clamp(uni(rng_), 1e-12, 1.0 - 1e-12);
    v = -std::log(-std::log(u));
  }
  return g;
}

std::vector<double> gumbel_soft_weights(std::span<const double> alpha_row, std::span<const double> noise,
                                        double tau) {
  if (alpha_row.size() != noise.size()) throw DimensionError("gumbel: noise length mismatch");
  std::vector<double> z(alpha_row.size());
  for (std::size_t k = 0; k < z.size(); ++k) z[k] = alpha_row[k] + noise[k];
  return softmax_values(z, tau);
}

namespace {
int noisy_argmax(std::span<const double> alpha_row, std::span<const double> noise) {
  int best = 0;
  for (std::size_t k = 1; k < alpha_row.size(); ++k)
    if (alpha_row[k] + noise[k] > alpha_row[std::size_t(best)] + noise[std::size_t(best)]) best = int(k);
  return best;
}
}  // namespace

GumbelDraw GumbelSampler::sample(std::span<const double> alpha_row) {
  GumbelDraw d;
  d.noise = draw_noise(alpha_row.size());
  d.soft_weights = gumbel_soft_weights(alpha_row, d.noise, tau_);
  d.hard_index = noisy_argmax(alpha_row, d.noise);
  return d;
}

double tau_schedule(int epoch, int epochs, double tau_start, double tau_end) {
  if (epochs <= 1) return tau_start;
  const double t = double(std::clamp(epoch, 0, epochs - 1)) / double(epochs - 1);
  return tau_start * std::pow(tau_end / tau_start, t);
}

GatedSelection sample_architecture(GumbelSampler& sampler, const Tensor& alpha, bool with_gates) {
  if (alpha.shape().size() != 2) throw DimensionError("alpha must be [positions, candidates]");
  const std::size_t P = alpha.shape()[0], K = alpha.shape()[1];
  GatedSelection out;
  for (std::size_t p = 0; p < P; ++p) {
    const auto row = alpha.value().data().subspan(p * K, K);
    auto noise = sampler.draw_noise(K);
    const int idx = noisy_argmax(row, noise);
    out.selections.push_back(idx);
    if (with_gates) {
      Tensor logits = add_constant(select_row(alpha, p), Array(Shape{K}, std::move(noise)));
      out.gates.push_back(straight_through(softmax(logits, sampler.tau()), std::size_t(idx)));
    }
  }
  return out;
}

Tensor relaxed_mixture(const Tensor& alpha_row, const std::vector<Tensor>& op_outputs) {
  return weighted_sum(softmax(alpha_row), op_outputs);
}

std::vector<int> argmax_rows(const Array& alpha) {
  const std::size_t P = alpha.dim(0), K = alpha.dim(1);
  std::vector<int> out(P);
  for (std::size_t p = 0; p < P; ++p) {
    const auto row = alpha.data().subspan(p * K, K);
    out[p] = int(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace dnas3d
