#include "dnas3d/layers.hpp"

#include <cmath>

#include "dnas3d/errors.hpp"

namespace dnas3d {

Parameter he_normal(std::string name, Shape shape, std::size_t fan_in, Rng& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / double(fan_in)));
  Array a(std::move(shape));
  for (double& v : a.data()) v = dist(rng);
  return {std::move(name), Tensor(std::move(a), true)};
}

BatchNorm3d::BatchNorm3d(const std::string& prefix, std::size_t channels)
    : gamma{prefix + ".gamma", Tensor(Array(Shape{channels}, 1.0), true)},
      beta{prefix + ".beta", Tensor(Array(Shape{channels}, 0.0), true)},
      state(channels),
      name(prefix) {}

Tensor BatchNorm3d::forward(const Tensor& x, Mode mode) {
  return batchnorm3d(x, gamma.tensor, beta.tensor, state, mode);
}

void BatchNorm3d::collect(ModuleRefs& refs) {
  refs.params.push_back(&gamma);
  refs.params.push_back(&beta);
  refs.bn_states.push_back({name, &state});
}

ConvBn::ConvBn(const std::string& prefix, int in_ch, int out_ch, int kernel_, int stride_,
               bool depthwise_, bool activation_, Rng& rng)
    : weight(depthwise_
                 ? he_normal(prefix + ".conv.weight",
                             Shape{std::size_t(out_ch), 1, std::size_t(kernel_),
                                   std::size_t(kernel_), std::size_t(kernel_)},
                             std::size_t(kernel_ * kernel_ * kernel_), rng)
                 : he_normal(prefix + ".conv.weight",
                             Shape{std::size_t(out_ch), std::size_t(in_ch), std::size_t(kernel_),
                                   std::size_t(kernel_), std::size_t(kernel_)},
                             std::size_t(in_ch * kernel_ * kernel_ * kernel_), rng)),
      bn(prefix + ".bn", std::size_t(out_ch)),
      kernel(kernel_),
      stride(stride_),
      depthwise(depthwise_),
      activation(activation_) {
  if (depthwise && in_ch != out_ch) throw ConfigError("depthwise conv needs in_ch == out_ch");
  if (kernel % 2 == 0) throw ConfigError("kernel size must be odd");
}

Tensor ConvBn::forward(const Tensor& x, Mode mode) {
  const int pad = (kernel - 1) / 2;
  Tensor y = depthwise ? depthwise_conv3d(x, weight.tensor, stride, pad)
                       : conv3d(x, weight.tensor, stride, pad);
  y = bn.forward(y, mode);
  return activation ? relu6(y) : y;
}

void ConvBn::collect(ModuleRefs& refs) {
  refs.params.push_back(&weight);
  bn.collect(refs);
}

Linear::Linear(const std::string& prefix, int in_features, int out_features, Rng& rng)
    : weight(he_normal(prefix + ".weight", Shape{std::size_t(out_features), std::size_t(in_features)},
                       std::size_t(in_features), rng)),
      bias{prefix + ".bias", Tensor(Array(Shape{std::size_t(out_features)}, 0.0), true)} {}

Tensor Linear::forward(const Tensor& x) const { return linear(x, weight.tensor, bias.tensor); }

void Linear::collect(ModuleRefs& refs) {
  refs.params.push_back(&weight);
  refs.params.push_back(&bias);
}

MBConvBlock::MBConvBlock(const std::string& prefix, int in_ch, int out_ch, int kernel,
                         int expansion, int stride, Rng& rng)
    : expand(prefix + ".expand", in_ch, in_ch * expansion, 1, 1, false, true, rng),
      dwise(prefix + ".dwise", in_ch * expansion, in_ch * expansion, kernel, stride, true, true, rng),
      project(prefix + ".project", in_ch * expansion, out_ch, 1, 1, false, false, rng),
      residual_(stride == 1 && in_ch == out_ch) {}

Tensor MBConvBlock::forward(const Tensor& x, Mode mode) {
  Tensor y = project.forward(dwise.forward(expand.forward(x, mode), mode), mode);
  return residual_ ? add(y, x) : y;
}

void MBConvBlock::collect(ModuleRefs& refs) {
  expand.collect(refs);
  dwise.collect(refs);
  project.collect(refs);
}

SkipBlock::SkipBlock(const std::string& prefix, int in_ch, int out_ch, int stride, Rng& rng) {
  if (stride != 1 || in_ch != out_ch)
    projection_ = std::make_unique<ConvBn>(prefix + ".proj", in_ch, out_ch, 1, stride, false, false, rng);
}

Tensor SkipBlock::forward(const Tensor& x, Mode mode) {
  return projection_ ? projection_->forward(x, mode) : x;
}

void SkipBlock::collect(ModuleRefs& refs) {
  if (projection_) projection_->collect(refs);
}

std::unique_ptr<Block> make_block(const std::string& prefix, const PositionSpec& pos,
                                  int candidate, Rng& rng) {
  const CandidateOp& op = candidate_op(candidate);
  if (op.kind == OpKind::skip)
    return std::make_unique<SkipBlock>(prefix, pos.in_channels, pos.out_channels, pos.stride, rng);
  return std::make_unique<MBConvBlock>(prefix, pos.in_channels, pos.out_channels, op.kernel,
                                       op.expansion, pos.stride, rng);
}

std::size_t count_params(const ModuleRefs& refs) {
  std::size_t n = 0;
  for (const Parameter* p : refs.params) n += p->tensor.size();
  return n;
}

}  // namespace dnas3d
