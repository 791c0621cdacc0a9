#pragma once

#include <filesystem>

#include "dnas3d/data.hpp"
#include "dnas3d/network.hpp"

namespace dnas3d {

nlohmann::json to_json(const TransformConfig& t);
TransformConfig transform_config_from_json(const nlohmann::json& j);

struct Checkpoint {
  ArchDescriptor arch;
  TransformConfig transforms;
  std::vector<std::string> class_names;
};

// Binary file: "DNCK", u32 version, u64 metadata length, JSON metadata,
// u32 entry count, then per entry a name, shape and little-endian f64 values.
// BN running statistics are stored alongside parameters.
void save_checkpoint(const std::filesystem::path& path, ChildNet& net, const TransformConfig& transforms,
                     const std::vector<std::string>& class_names = {});

// Rebuilds the network from the stored architecture and loads every tensor.
// Throws FormatError on corruption and when names or shapes do not match.
std::pair<ChildNet, Checkpoint> load_checkpoint(const std::filesystem::path& path);

}  // namespace dnas3d
