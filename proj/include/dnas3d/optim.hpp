#pragma once

#include <map>
#include <span>
#include <string>

#include "dnas3d/tensor.hpp"

namespace dnas3d {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct SgdOptions {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double weight_decay = 3e-4;
};

/// Adam or SGD-with-momentum over named parameters. Moment buffers are
/// created zero-filled on a parameter's first update, so a step may cover
/// any subset of the parameters seen so far.
class Optimizer {
 public:
  enum class Kind { adam, sgd_momentum };

  static Optimizer adam(const AdamOptions& opts = {});
  static Optimizer sgd(const SgdOptions& opts = {});

  Kind kind() const { return kind_; }
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr);

  /// Updates every listed parameter from its gradient, then clears the
  /// gradients. Throws StateError if any gradient is missing.
  void step(std::span<Parameter* const> params);

  // Exposed for inspection in tests.
  struct Moments {
    Array first;   // Adam m / SGD velocity
    Array second;  // Adam v
    long steps = 0;
  };
  const std::map<std::string, Moments>& moments() const { return moments_; }

 private:
  Kind kind_ = Kind::adam;
  double lr_ = 1e-3;
  AdamOptions adam_;
  SgdOptions sgd_;
  std::map<std::string, Moments> moments_;
};

double cosine_lr(int epoch, int total_epochs, double lr_max, double lr_min);

}  // namespace dnas3d
