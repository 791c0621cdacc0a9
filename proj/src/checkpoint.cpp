#include "dnas3d/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "dnas3d/errors.hpp"

namespace dnas3d {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'D', 'N', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("checkpoint truncated", pos_);
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::map<std::string, const Array*> entry_views(ChildNet& net, std::vector<Array>& scratch) {
  auto refs = net.refs();
  std::map<std::string, const Array*> out;
  scratch.reserve(refs.bn_states.size());
  for (auto* p : refs.params) out[p->name] = &p->tensor.value();
  for (const auto& s : refs.bn_states) {
    out[s.name + ".running_mean"] = &s.state->running_mean;
    out[s.name + ".running_var"] = &s.state->running_var;
    scratch.emplace_back(Shape{1}, s.state->initialized ? 1.0 : 0.0);
    out[s.name + ".initialized"] = &scratch.back();
  }
  return out;
}

}  // namespace

json to_json(const TransformConfig& t) {
  return json{{"target_slices", t.target_slices},
              {"resize", t.resize},
              {"center_crop", t.center_crop},
              {"normalize", t.normalize},
              {"train_random_flip", t.train_random_flip}};
}

TransformConfig transform_config_from_json(const json& j) {
  try {
    TransformConfig t;
    t.target_slices = j.at("target_slices").get<int>();
    t.resize = j.at("resize").get<std::array<int, 2>>();
    t.center_crop = j.at("center_crop").get<std::array<int, 2>>();
    t.normalize = j.at("normalize").get<bool>();
    t.train_random_flip = j.at("train_random_flip").get<bool>();
    t.validate();
    return t;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed transform config: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, ChildNet& net, const TransformConfig& transforms,
                     const std::vector<std::string>& class_names) {
  std::vector<Array> scratch;
  const auto entries = entry_views(net, scratch);
  const std::string meta =
      json{{"arch", to_json(net.arch())}, {"transforms", to_json(transforms)}, {"class_names", class_names}}.dump();

  std::string out(kMagic, 4);
  put(out, kVersion);
  put(out, std::uint64_t(meta.size()));
  out += meta;
  put(out, std::uint32_t(entries.size()));
  for (const auto& [name, a] : entries) {
    put(out, std::uint32_t(name.size()));
    out += name;
    put(out, std::uint32_t(a->rank()));
    for (auto d : a->shape()) put(out, std::uint64_t(d));
    for (double v : a->data()) put(out, v);
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os.write(out.data(), std::streamsize(out.size()));
  if (!os) throw IoError("write failed: " + path.string());
}

std::pair<ChildNet, Checkpoint> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  Reader r(bytes);
  if (r.take(4) != std::string(kMagic, 4)) throw FormatError("not a checkpoint (bad magic)", 0);
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);

  const auto meta_len = r.get<std::uint64_t>();
  const std::size_t meta_at = r.pos();
  Checkpoint ck;
  try {
    const json meta = json::parse(r.take(std::size_t(meta_len)));
    ck.arch = arch_from_json(meta.at("arch"));
    ck.transforms = transform_config_from_json(meta.at("transforms"));
    ck.class_names = meta.at("class_names").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad checkpoint metadata: ") + e.what(), meta_at);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("bad checkpoint metadata: ") + e.what(), meta_at);
  }

  ChildNet net(ck.arch, 0);
  auto refs = net.refs();
  std::map<std::string, Array*> params;
  std::map<std::string, BatchNormState*> states;
  for (auto* p : refs.params) params[p->name] = &p->tensor.mutable_value();
  for (const auto& s : refs.bn_states) states[s.name] = s.state;

  const auto count = r.get<std::uint32_t>();
  std::size_t expected = params.size() + 3 * states.size();
  if (count != expected)
    throw FormatError("checkpoint holds " + std::to_string(count) + " tensors, network expects " +
                          std::to_string(expected),
                      r.pos());
  std::size_t seen = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t at = r.pos();
    const std::string name = r.take(r.get<std::uint32_t>());
    Shape shape(r.get<std::uint32_t>());
    for (auto& d : shape) d = std::size_t(r.get<std::uint64_t>());
    const std::size_t n = shape_numel(shape);
    std::vector<double> vals(n);
    for (auto& v : vals) v = r.get<double>();

    Array* target = nullptr;
    std::string base = name;
    std::string field;
    if (auto it = params.find(name); it != params.end()) {
      target = it->second;
    } else if (auto dot = name.rfind('.'); dot != std::string::npos) {
      base = name.substr(0, dot);
      field = name.substr(dot + 1);
      if (auto st = states.find(base); st != states.end()) {
        if (field == "running_mean") target = &st->second->running_mean;
        else if (field == "running_var") target = &st->second->running_var;
        else if (field == "initialized") {
          if (n != 1) throw FormatError("bad BN flag " + name, at);
          st->second->initialized = vals[0] != 0.0;
          ++seen;
          continue;
        }
      }
    }
    if (!target) throw FormatError("unknown tensor " + name, at);
    if (target->shape() != shape)
      throw FormatError("shape mismatch for " + name + ": stored " + shape_str(shape) + ", expected " +
                            shape_str(target->shape()),
                        at);
    *target = Array(shape, std::move(vals));
    ++seen;
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint", r.pos());
  if (seen != expected) throw FormatError("checkpoint is missing tensors", r.pos());
  return {std::move(net), std::move(ck)};
}

}  // namespace dnas3d
