#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dnas3d/data.hpp"
#include "dnas3d/errors.hpp"

namespace dnas3d {

static_assert(std::endian::native == std::endian::little, "V3D1 codec assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'V', '3', 'D', '1'};
constexpr std::size_t kHeaderBytes = 16;

void put_u32(std::vector<char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::vector<char>& in, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(in[off + std::size_t(i)])) << (8 * i);
  return v;
}

}  // namespace

std::vector<char> encode_volume(const Array& voxels) {
  if (voxels.rank() != 3) throw DimensionError("volume must be [slices,height,width], got " + shape_str(voxels.shape()));
  std::vector<char> out(kMagic, kMagic + 4);
  for (std::size_t d : voxels.shape()) put_u32(out, std::uint32_t(d));
  out.reserve(kHeaderBytes + 4 * voxels.size());
  for (double v : voxels.data()) {
    const auto bits = std::bit_cast<std::uint32_t>(float(v));
    put_u32(out, bits);
  }
  return out;
}

Array decode_volume(const std::vector<char>& bytes) {
  if (bytes.size() < 4) throw FormatError("truncated V3D1 header", bytes.size());
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad magic, expected V3D1", 0);
  if (bytes.size() < kHeaderBytes) throw FormatError("truncated V3D1 header", bytes.size());
  Shape shape;
  for (int i = 0; i < 3; ++i) {
    const std::uint32_t d = get_u32(bytes, 4 + 4 * std::size_t(i));
    if (d == 0) throw FormatError("zero dimension in V3D1 header", 4 + 4 * std::size_t(i));
    shape.push_back(d);
  }
  const std::size_t n = shape_numel(shape);
  const std::size_t expected = kHeaderBytes + 4 * n;
  if (bytes.size() < expected)
    throw FormatError("truncated V3D1 payload: header dims " + shape_str(shape) + " need " +
                          std::to_string(expected) + " bytes",
                      bytes.size());
  if (bytes.size() > expected)
    throw FormatError("V3D1 payload longer than header dims " + shape_str(shape), expected);
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t off = kHeaderBytes + 4 * i;
    const float f = std::bit_cast<float>(get_u32(bytes, off));
    if (!std::isfinite(f)) throw FormatError("non-finite voxel value", off);
    data[i] = f;
  }
  return Array(std::move(shape), std::move(data));
}

void save_volume(const std::filesystem::path& path, const Array& voxels) {
  const auto bytes = encode_volume(voxels);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os.write(bytes.data(), std::streamsize(bytes.size()));
  if (!os) throw IoError("write failed for " + path.string());
}

Volume load_volume(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  Volume v;
  v.voxels = decode_volume(bytes);
  v.id = path.stem().string();
  return v;
}

}  // namespace dnas3d
