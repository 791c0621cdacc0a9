#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dnas3d/ops.hpp"
#include "dnas3d/random.hpp"
#include "dnas3d/search_space.hpp"
#include "dnas3d/tensor.hpp"

namespace dnas3d {

struct NamedState {
  std::string name;
  BatchNormState* state;
};

// Flat views over a module tree, in construction order.
struct ModuleRefs {
  std::vector<Parameter*> params;
  std::vector<NamedState> bn_states;
};

// Weight ~ Normal(0, sqrt(2 / fan_in)).
Parameter he_normal(std::string name, Shape shape, std::size_t fan_in, Rng& rng);

class BatchNorm3d {
 public:
  BatchNorm3d(const std::string& prefix, std::size_t channels);
  Tensor forward(const Tensor& x, Mode mode);
  void collect(ModuleRefs& refs);

  Parameter gamma, beta;
  BatchNormState state;
  std::string name;
};

/// Conv3D (dense or depthwise) followed by BN3D and an optional ReLU6.
class ConvBn {
 public:
  ConvBn(const std::string& prefix, int in_ch, int out_ch, int kernel, int stride, bool depthwise,
         bool activation, Rng& rng);
  Tensor forward(const Tensor& x, Mode mode);
  void collect(ModuleRefs& refs);

  Parameter weight;
  BatchNorm3d bn;
  int kernel, stride;
  bool depthwise, activation;
};

class Linear {
 public:
  Linear(const std::string& prefix, int in_features, int out_features, Rng& rng);
  Tensor forward(const Tensor& x) const;
  void collect(ModuleRefs& refs);

  Parameter weight, bias;
};

class Block {
 public:
  virtual ~Block() = default;
  virtual Tensor forward(const Tensor& x, Mode mode) = 0;
  virtual void collect(ModuleRefs& refs) = 0;
  virtual bool has_residual() const = 0;
};

/// Pointwise expand -> depthwise KxKxK (stride s) -> pointwise project, with
/// an identity residual when stride is 1 and channel counts match.
class MBConvBlock final : public Block {
 public:
  MBConvBlock(const std::string& prefix, int in_ch, int out_ch, int kernel, int expansion,
              int stride, Rng& rng);
  Tensor forward(const Tensor& x, Mode mode) override;
  void collect(ModuleRefs& refs) override;
  bool has_residual() const override { return residual_; }

  int inner_channels() const { return expand.weight.tensor.shape()[0]; }

  ConvBn expand, dwise, project;

 private:
  bool residual_;
};

/// Identity, or a 1x1x1 stride-s conv + BN projection when shapes change.
class SkipBlock final : public Block {
 public:
  SkipBlock(const std::string& prefix, int in_ch, int out_ch, int stride, Rng& rng);
  Tensor forward(const Tensor& x, Mode mode) override;
  void collect(ModuleRefs& refs) override;
  bool has_residual() const override { return false; }
  bool is_identity() const { return projection_ == nullptr; }

 private:
  std::unique_ptr<ConvBn> projection_;
};

std::unique_ptr<Block> make_block(const std::string& prefix, const PositionSpec& pos,
                                  int candidate, Rng& rng);

std::size_t count_params(const ModuleRefs& refs);

}  // namespace dnas3d
