#include "dnas3d/network.hpp"

#include "dnas3d/errors.hpp"

namespace dnas3d {

namespace {

std::string position_prefix(const PositionSpec& p) {
  return "cell" + std::to_string(p.cell) + ".block" + std::to_string(p.block);
}

ForwardOutput run_head(Linear& head, Tensor features) {
  ForwardOutput out;
  out.logits = head.forward(global_avg_pool3d(features));
  out.features = std::move(features);
  return out;
}

}  // namespace

void check_network_input(const Tensor& input) {
  if (input.shape().size() != 5 || input.shape()[1] != 1)
    throw DimensionError("network input must be [B,1,D,H,W], got " + shape_str(input.shape()));
}

Supernet::Supernet(const SupernetConfig& config, std::uint64_t seed)
    : config_(config), positions_(config.positions()) {
  Rng rng = make_rng(seed, Stream::init);
  stem_ = std::make_unique<ConvBn>("stem", 1, config_.stem_channels, 3, 1, false, true, rng);
  candidates_.resize(positions_.size());
  for (std::size_t p = 0; p < positions_.size(); ++p)
    for (int k = 0; k < int(kNumCandidates); ++k)
      candidates_[p][std::size_t(k)] =
          make_block(position_prefix(positions_[p]) + ".op" + std::to_string(k), positions_[p], k, rng);
  head_ = std::make_unique<Linear>("head", config_.final_channels(), config_.num_classes, rng);
  alpha_ = {"alpha", Tensor(Array(Shape{positions_.size(), kNumCandidates}, 0.0), true)};
}

void Supernet::check_selections(std::span<const int> selections) const {
  if (selections.size() != positions_.size())
    throw ArgumentError("expected " + std::to_string(positions_.size()) + " selections, got " +
                        std::to_string(selections.size()));
  for (int s : selections)
    if (s < 0 || s >= int(kNumCandidates))
      throw ArgumentError("selection index " + std::to_string(s) + " out of range [0,8)");
}

ForwardOutput Supernet::forward(const Tensor& input, std::span<const int> selections, Mode mode,
                                std::span<const Tensor> gates) {
  check_network_input(input);
  check_selections(selections);
  if (!gates.empty() && gates.size() != selections.size())
    throw ArgumentError("need one gate per block position");
  Tensor x = stem_->forward(input, mode);
  for (std::size_t p = 0; p < positions_.size(); ++p) {
    x = candidates_[p][std::size_t(selections[p])]->forward(x, mode);
    if (!gates.empty()) x = scale(x, gates[p]);
  }
  return run_head(*head_, std::move(x));
}

Block& Supernet::candidate(int position, int op) {
  return *candidates_.at(std::size_t(position)).at(std::size_t(op));
}

ModuleRefs Supernet::refs() {
  ModuleRefs r;
  stem_->collect(r);
  for (auto& pos : candidates_)
    for (auto& op : pos) op->collect(r);
  head_->collect(r);
  return r;
}

ModuleRefs Supernet::refs_for(std::span<const int> selections) {
  check_selections(selections);
  ModuleRefs r;
  stem_->collect(r);
  for (std::size_t p = 0; p < candidates_.size(); ++p) candidates_[p][std::size_t(selections[p])]->collect(r);
  head_->collect(r);
  return r;
}

void Supernet::set_weights_requires_grad(bool on) {
  for (Parameter* p : refs().params) p->tensor.set_requires_grad(on);
}

std::size_t Supernet::param_count() { return count_params(refs()); }

ChildNet::ChildNet(const ArchDescriptor& arch, std::uint64_t seed) : arch_(arch) {
  arch_.validate();
  Rng rng = make_rng(seed, Stream::init);
  const auto& cfg = arch_.config;
  stem_ = std::make_unique<ConvBn>("stem", 1, cfg.stem_channels, 3, 1, false, true, rng);
  const auto positions = cfg.positions();
  for (std::size_t p = 0; p < positions.size(); ++p)
    blocks_.push_back(make_block(position_prefix(positions[p]), positions[p], arch_.choices[p], rng));
  head_ = std::make_unique<Linear>("head", cfg.final_channels(), cfg.num_classes, rng);
}

ForwardOutput ChildNet::forward(const Tensor& input, Mode mode) {
  check_network_input(input);
  Tensor x = stem_->forward(input, mode);
  for (auto& b : blocks_) x = b->forward(x, mode);
  return run_head(*head_, std::move(x));
}

ModuleRefs ChildNet::refs() {
  ModuleRefs r;
  stem_->collect(r);
  for (auto& b : blocks_) b->collect(r);
  head_->collect(r);
  return r;
}

std::size_t ChildNet::param_count() { return count_params(refs()); }

std::vector<std::string> ChildNet::layer_structure() {
  std::vector<std::string> out;
  for (const Parameter* p : refs().params) out.push_back(p->name + " " + shape_str(p->tensor.shape()));
  return out;
}

ChildNet derive_child(const SupernetConfig& config, const ArchDescriptor& arch, std::uint64_t seed) {
  if (!(arch.config == config))
    throw ConfigError("architecture descriptor was built for a different supernet config");
  if (int(arch.choices.size()) != config.num_positions())
    throw ConfigError("architecture descriptor length does not match the config");
  return ChildNet(arch, seed);
}

}  // namespace dnas3d
