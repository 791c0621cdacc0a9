#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dnas3d/layers.hpp"

namespace dnas3d {

struct ForwardOutput {
  Tensor logits;    // [B, num_classes]
  Tensor features;  // last cell output, before global average pooling
};

/// Weight-sharing supernet: every block position holds all 8 candidate ops
/// with independent weights, plus the architecture logits alpha [P, 8].
class Supernet {
 public:
  Supernet(const SupernetConfig& config, std::uint64_t seed);

  const SupernetConfig& config() const { return config_; }
  const std::vector<PositionSpec>& positions() const { return positions_; }
  int num_positions() const { return int(positions_.size()); }

  /// Runs stem, the selected candidate at each position, and the head.
  /// When `gates` is non-empty each selected block output is multiplied by
  /// gates[p] (a one-element tensor).
  ForwardOutput forward(const Tensor& input, std::span<const int> selections, Mode mode,
                        std::span<const Tensor> gates = {});

  Parameter& alpha() { return alpha_; }
  const Parameter& alpha() const { return alpha_; }
  Block& candidate(int position, int op);
  ConvBn& stem() { return *stem_; }
  Linear& head() { return *head_; }

  // All shared weights (alpha excluded) and BN states.
  ModuleRefs refs();
  // Stem, head and the selected candidates only.
  ModuleRefs refs_for(std::span<const int> selections);
  void set_weights_requires_grad(bool on);
  std::size_t param_count();

 private:
  void check_selections(std::span<const int> selections) const;

  SupernetConfig config_;
  std::vector<PositionSpec> positions_;
  std::unique_ptr<ConvBn> stem_;
  std::vector<std::array<std::unique_ptr<Block>, kNumCandidates>> candidates_;
  std::unique_ptr<Linear> head_;
  Parameter alpha_;
};

inline Supernet build_supernet(const SupernetConfig& config, std::uint64_t seed) {
  return Supernet(config, seed);
}

/// Standalone network containing only the chosen op per position.
class ChildNet {
 public:
  ChildNet(const ArchDescriptor& arch, std::uint64_t seed);

  const ArchDescriptor& arch() const { return arch_; }
  ArchDescriptor& arch() { return arch_; }
  ForwardOutput forward(const Tensor& input, Mode mode);

  ModuleRefs refs();
  std::size_t param_count();
  Linear& head() { return *head_; }
  Block& block(int position) { return *blocks_.at(std::size_t(position)); }

  // "name shape" per parameter, in order; equal for structurally equal nets.
  std::vector<std::string> layer_structure();

 private:
  ArchDescriptor arch_;
  std::unique_ptr<ConvBn> stem_;
  std::vector<std::unique_ptr<Block>> blocks_;
  std::unique_ptr<Linear> head_;
};

// Throws ConfigError when `arch` was not produced for `config`.
ChildNet derive_child(const SupernetConfig& config, const ArchDescriptor& arch, std::uint64_t seed);

void check_network_input(const Tensor& input);

}  // namespace dnas3d
