#include "dnas3d/optim.hpp"

#include <cmath>
#include <numbers>

#include "dnas3d/errors.hpp"

namespace dnas3d {

Optimizer Optimizer::adam(const AdamOptions& opts) {
  Optimizer o;
  o.kind_ = Kind::adam;
  o.adam_ = opts;
  o.set_learning_rate(opts.learning_rate);
  return o;
}

Optimizer Optimizer::sgd(const SgdOptions& opts) {
  Optimizer o;
  o.kind_ = Kind::sgd_momentum;
  o.sgd_ = opts;
  o.set_learning_rate(opts.learning_rate);
  return o;
}

void Optimizer::set_learning_rate(double lr) {
  if (!(lr > 0.0)) throw ArgumentError("learning rate must be positive");
  lr_ = lr;
}

void Optimizer::step(std::span<Parameter* const> params) {
  for (const Parameter* p : params)
    if (!p->tensor.has_grad()) throw StateError("optimizer step: parameter '" + p->name + "' has no gradient");

  for (Parameter* p : params) {
    Array& theta = p->tensor.mutable_value();
    const Array& g = p->tensor.grad();
    auto [it, fresh] = moments_.try_emplace(p->name);
    Moments& m = it->second;
    if (fresh || m.first.shape() != theta.shape()) {
      m.first = Array(theta.shape());
      if (kind_ == Kind::adam) m.second = Array(theta.shape());
      m.steps = 0;
    }
    ++m.steps;
    if (kind_ == Kind::adam) {
      const double b1 = adam_.beta1, b2 = adam_.beta2;
      const double c1 = 1.0 - std::pow(b1, double(m.steps));
      const double c2 = 1.0 - std::pow(b2, double(m.steps));
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const double gi = g[i] + adam_.weight_decay * theta[i];
        m.first[i] = b1 * m.first[i] + (1.0 - b1) * gi;
        m.second[i] = b2 * m.second[i] + (1.0 - b2) * gi * gi;
        const double mhat = m.first[i] / c1;
        const double vhat = m.second[i] / c2;
        theta[i] -= lr_ * mhat / (std::sqrt(vhat) + adam_.eps);
      }
    } else {
      for (std::size_t i = 0; i < theta.size(); ++i) {
        m.first[i] = sgd_.momentum * m.first[i] + g[i] + sgd_.weight_decay * theta[i];
        theta[i] -= lr_ * m.first[i];
      }
    }
    p->tensor.clear_grad();
  }
}

double cosine_lr(int epoch, int total_epochs, double lr_max, double lr_min) {
  if (total_epochs <= 0) return lr_max;
  const double t = double(epoch) / double(total_epochs);
  return lr_min + (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * t)) / 2.0;
}

}  // namespace dnas3d
