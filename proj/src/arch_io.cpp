#include <fstream>
#include <sstream>

#include "dnas3d/errors.hpp"
#include "dnas3d/search_space.hpp"

namespace dnas3d {

using nlohmann::json;

json to_json(const SupernetConfig& c) {
  return json{{"num_cells", c.num_cells},
              {"blocks_per_cell", c.blocks_per_cell},
              {"channels_per_cell", c.channels_per_cell},
              {"stride2_cells", std::vector<int>(c.stride2_cells.begin(), c.stride2_cells.end())},
              {"stem_channels", c.stem_channels},
              {"num_classes", c.num_classes},
              {"input_shape", c.input_shape}};
}

SupernetConfig supernet_config_from_json(const json& j) {
  SupernetConfig c;
  c.num_cells = j.at("num_cells").get<int>();
  c.blocks_per_cell = j.at("blocks_per_cell").get<std::vector<int>>();
  c.channels_per_cell = j.at("channels_per_cell").get<std::vector<int>>();
  auto s2 = j.at("stride2_cells").get<std::vector<int>>();
  c.stride2_cells = std::set<int>(s2.begin(), s2.end());
  c.stem_channels = j.at("stem_channels").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  c.input_shape = j.at("input_shape").get<std::array<int, 3>>();
  c.validate();
  return c;
}

json to_json(const ArchDescriptor& a) {
  json ops = json::array();
  for (int c : a.choices) ops.push_back(candidate_op(c).name());
  return json{{"format_version", kArchFormatVersion},
              {"config", to_json(a.config)},
              {"choices", a.choices},
              {"ops", ops},
              {"provenance",
               {{"search_epoch", a.provenance.search_epoch},
                {"val_accuracy", a.provenance.val_accuracy},
                {"val_loss", a.provenance.val_loss}}}};
}

ArchDescriptor arch_from_json(const json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kArchFormatVersion)
      throw ConfigError("unsupported architecture format_version " + std::to_string(version));
    ArchDescriptor a;
    a.config = supernet_config_from_json(j.at("config"));
    a.choices = j.at("choices").get<std::vector<int>>();
    const auto& p = j.at("provenance");
    a.provenance.search_epoch = p.at("search_epoch").get<int>();
    a.provenance.val_accuracy = p.at("val_accuracy").get<double>();
    a.provenance.val_loss = p.at("val_loss").get<double>();
    a.validate();
    return a;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed architecture descriptor: ") + e.what());
  }
}

std::string serialize_arch(const ArchDescriptor& arch) { return to_json(arch).dump(2) + "\n"; }

ArchDescriptor parse_arch(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("architecture descriptor is not valid JSON: ") + e.what());
  }
  return arch_from_json(j);
}

void save_arch(const std::string& path, const ArchDescriptor& arch) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os << serialize_arch(arch);
  if (!os) throw IoError("write failed for " + path);
}

ArchDescriptor load_arch(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_arch(ss.str());
}

}  // namespace dnas3d
