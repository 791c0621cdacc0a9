#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <nlohmann/json.hpp>

namespace dnas3d {

enum class OpKind { mbconv, skip };

struct CandidateOp {
  OpKind kind = OpKind::skip;
  int kernel = 0;     // MBConv only
  int expansion = 0;  // MBConv only

  std::string name() const;
  friend bool operator==(const CandidateOp&, const CandidateOp&) = default;
};

inline constexpr std::size_t kNumCandidates = 8;
inline constexpr int kSkipIndex = 7;

// Index order: 3x3x3 MBConv{3,4,6}, 5x5x5 MBConv{3,4}, 7x7x7 MBConv{3,4}, Skip.
const std::array<CandidateOp, kNumCandidates>& candidate_ops();
const CandidateOp& candidate_op(int index);

enum class ChannelPreset { small, large };

struct PositionSpec {
  int cell = 0;
  int block = 0;
  int in_channels = 0;
  int out_channels = 0;
  int stride = 1;
};

struct SupernetConfig {
  int num_cells = 6;
  std::vector<int> blocks_per_cell{4, 4, 4, 4, 4, 1};
  std::vector<int> channels_per_cell{24, 40, 80, 96, 192, 320};
  std::set<int> stride2_cells{1, 2, 3, 4};
  int stem_channels = 32;
  int num_classes = 3;
  std::array<int, 3> input_shape{16, 64, 64};  // slices, height, width

  static SupernetConfig with_preset(ChannelPreset preset);

  // Throws ConfigError when inconsistent.
  void validate() const;
  int num_positions() const;
  std::vector<PositionSpec> positions() const;
  int final_channels() const;
  // Spatial dims of the last cell's output for a given input.
  std::array<int, 3> feature_shape(const std::array<int, 3>& input) const;

  friend bool operator==(const SupernetConfig&, const SupernetConfig&) = default;
};

ChannelPreset parse_preset(const std::string& name);
std::vector<int> preset_channels(ChannelPreset preset);

struct Provenance {
  int search_epoch = -1;
  double val_accuracy = 0.0;
  double val_loss = 0.0;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// One candidate index per block position, plus where it came from.
struct ArchDescriptor {
  SupernetConfig config;
  std::vector<int> choices;
  Provenance provenance;

  void validate() const;
  friend bool operator==(const ArchDescriptor&, const ArchDescriptor&) = default;
};

inline constexpr int kArchFormatVersion = 1;

nlohmann::json to_json(const SupernetConfig& config);
SupernetConfig supernet_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ArchDescriptor& arch);
ArchDescriptor arch_from_json(const nlohmann::json& j);

// Pretty-printed JSON, keys sorted, trailing newline.
std::string serialize_arch(const ArchDescriptor& arch);
ArchDescriptor parse_arch(const std::string& text);
void save_arch(const std::string& path, const ArchDescriptor& arch);
ArchDescriptor load_arch(const std::string& path);

/// 8^(total block positions).
boost::multiprecision::cpp_int count_search_space(const SupernetConfig& config);

// Parameter bytes reported as float32: count * 4 / 2^20.
double model_size_mb(std::size_t param_count);

}  // namespace dnas3d
