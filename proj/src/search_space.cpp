#include "dnas3d/search_space.hpp"

#include <fstream>
#include <numeric>
#include <sstream>

#include "dnas3d/errors.hpp"
#include "dnas3d/random.hpp"

namespace dnas3d {

Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t salt) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(stream),
                    std::uint32_t(salt), std::uint32_t(salt >> 32)};
  return Rng(seq);
}

std::string CandidateOp::name() const {
  if (kind == OpKind::skip) return "skip";
  return "mbconv_k" + std::to_string(kernel) + "_e" + std::to_string(expansion);
}

const std::array<CandidateOp, kNumCandidates>& candidate_ops() {
  static const std::array<CandidateOp, kNumCandidates> ops{{
      {OpKind::mbconv, 3, 3},
      {OpKind::mbconv, 3, 4},
      {OpKind::mbconv, 3, 6},
      {OpKind::mbconv, 5, 3},
      {OpKind::mbconv, 5, 4},
      {OpKind::mbconv, 7, 3},
      {OpKind::mbconv, 7, 4},
      {OpKind::skip, 0, 0},
  }};
  return ops;
}

const CandidateOp& candidate_op(int index) {
  if (index < 0 || index >= int(kNumCandidates))
    throw ArgumentError("candidate index " + std::to_string(index) + " out of range [0,8)");
  return candidate_ops()[std::size_t(index)];
}

std::vector<int> preset_channels(ChannelPreset preset) {
  if (preset == ChannelPreset::large) return {32, 64, 128, 256, 512, 1024};
  return {24, 40, 80, 96, 192, 320};
}

ChannelPreset parse_preset(const std::string& name) {
  if (name == "small") return ChannelPreset::small;
  if (name == "large") return ChannelPreset::large;
  throw ArgumentError("unknown channel preset '" + name + "' (expected small or large)");
}

SupernetConfig SupernetConfig::with_preset(ChannelPreset preset) {
  SupernetConfig c;
  c.channels_per_cell = preset_channels(preset);
  return c;
}

void SupernetConfig::validate() const {
  if (num_cells < 1) throw ConfigError("num_cells must be >= 1");
  if (int(blocks_per_cell.size()) != num_cells)
    throw ConfigError("blocks_per_cell has " + std::to_string(blocks_per_cell.size()) +
                      " entries for " + std::to_string(num_cells) + " cells");
  if (int(channels_per_cell.size()) != num_cells)
    throw ConfigError("channels_per_cell has " + std::to_string(channels_per_cell.size()) +
                      " entries for " + std::to_string(num_cells) + " cells");
  for (int b : blocks_per_cell)
    if (b < 1) throw ConfigError("every cell needs at least one block");
  for (int c : channels_per_cell)
    if (c < 1) throw ConfigError("channel counts must be positive");
  for (int s : stride2_cells)
    if (s < 0 || s >= num_cells) throw ConfigError("stride2 cell index out of range");
  if (stem_channels < 1) throw ConfigError("stem_channels must be positive");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  for (int d : input_shape)
    if (d < 1) throw ConfigError("input shape dims must be positive");
}

int SupernetConfig::num_positions() const {
  return std::accumulate(blocks_per_cell.begin(), blocks_per_cell.end(), 0);
}

std::vector<PositionSpec> SupernetConfig::positions() const {
  validate();
  std::vector<PositionSpec> out;
  int in = stem_channels;
  for (int c = 0; c < num_cells; ++c) {
    for (int b = 0; b < blocks_per_cell[std::size_t(c)]; ++b) {
      PositionSpec p;
      p.cell = c;
      p.block = b;
      p.in_channels = b == 0 ? in : channels_per_cell[std::size_t(c)];
      p.out_channels = channels_per_cell[std::size_t(c)];
      p.stride = (b == 0 && stride2_cells.contains(c)) ? 2 : 1;
      out.push_back(p);
    }
    in = channels_per_cell[std::size_t(c)];
  }
  return out;
}

int SupernetConfig::final_channels() const { return channels_per_cell.back(); }

std::array<int, 3> SupernetConfig::feature_shape(const std::array<int, 3>& input) const {
  auto dims = input;
  for (int c = 0; c < num_cells; ++c)
    if (stride2_cells.contains(c))
      for (int& d : dims) d = (d - 1) / 2 + 1;
  return dims;
}

void ArchDescriptor::validate() const {
  config.validate();
  if (int(choices.size()) != config.num_positions())
    throw ConfigError("architecture has " + std::to_string(choices.size()) +
                      " choices for " + std::to_string(config.num_positions()) + " block positions");
  for (int c : choices)
    if (c < 0 || c >= int(kNumCandidates)) throw ConfigError("choice index out of range");
}

boost::multiprecision::cpp_int count_search_space(const SupernetConfig& config) {
  boost::multiprecision::cpp_int n = 1;
  for (int i = 0; i < config.num_positions(); ++i) n *= int(kNumCandidates);
  return n;
}

double model_size_mb(std::size_t param_count) {
  return double(param_count) * 4.0 / double(1u << 20);
}

}  // namespace dnas3d
