#include "dcw/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dcw {

using nlohmann::json;

namespace detail {

void encode_le(const void* src, size_t elem_size, size_t count,
               std::vector<uint8_t>& out) {
  out.resize(elem_size * count);
  const auto* s = static_cast<const uint8_t*>(src);
  // x86 and every other platform we target is little-endian; byte-swap here
  // if that ever changes
  static_assert(std::endian::native == std::endian::little,
                "checkpoint encoding assumes a little-endian host");
  std::memcpy(out.data(), s, out.size());
}

void decode_le(const std::vector<uint8_t>& bytes, size_t elem_size, size_t count,
               void* dst) {
  if (bytes.size() != elem_size * count)
    throw std::runtime_error("checkpoint: array byte count mismatch");
  std::memcpy(dst, bytes.data(), bytes.size());
}

}  // namespace detail

void Checkpoint::save(const std::string& path) const {
  json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["step"] = step;
  manifest["epoch"] = epoch;
  manifest["pos"] = pos;
  manifest["config"] = config;
  manifest["rng"] = rng;
  json arr = json::array();
  uint64_t offset = 0;
  for (const auto& [name, a] : arrays) {
    arr.push_back({{"name", name},
                   {"shape", a.shape},
                   {"dtype", a.dtype},
                   {"offset", offset},
                   {"bytes", a.bytes.size()}});
    offset += a.bytes.size();
  }
  manifest["arrays"] = std::move(arr);
  const std::string m = manifest.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out.write(kMagic, 9);
  uint64_t mlen = m.size();
  uint8_t lenbuf[8];
  for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<uint8_t>(mlen >> (8 * i));
  out.write(reinterpret_cast<const char*>(lenbuf), 8);
  out.write(m.data(), static_cast<std::streamsize>(m.size()));
  for (const auto& [name, a] : arrays)
    out.write(reinterpret_cast<const char*>(a.bytes.data()),
              static_cast<std::streamsize>(a.bytes.size()));
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot read " + path);
  char magic[9];
  if (!in.read(magic, 9) || std::memcmp(magic, kMagic, 9) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  uint8_t lenbuf[8];
  if (!in.read(reinterpret_cast<char*>(lenbuf), 8))
    throw std::runtime_error("checkpoint: truncated manifest length in " + path);
  uint64_t mlen = 0;
  for (int i = 0; i < 8; ++i) mlen |= static_cast<uint64_t>(lenbuf[i]) << (8 * i);
  std::string m(mlen, '\0');
  if (!in.read(m.data(), static_cast<std::streamsize>(mlen)))
    throw std::runtime_error("checkpoint: truncated manifest in " + path);
  json manifest = json::parse(m, nullptr, false);
  if (manifest.is_discarded())
    throw std::runtime_error("checkpoint: corrupt manifest in " + path);
  const int version = manifest.value("format_version", -1);
  if (version != kFormatVersion)
    throw std::runtime_error("checkpoint: format version " +
                             std::to_string(version) + " unsupported (expected " +
                             std::to_string(kFormatVersion) + ")");
  Checkpoint ck;
  ck.step = manifest.value("step", int64_t(0));
  ck.epoch = manifest.value("epoch", 0);
  ck.pos = manifest.value("pos", 0);
  ck.config = manifest.value("config", json::object());
  ck.rng = manifest.value("rng", json::object());
  for (const auto& entry : manifest["arrays"]) {
    const std::string name = entry["name"].get<std::string>();
    Array a;
    a.shape = entry["shape"].get<std::vector<int>>();
    a.dtype = entry["dtype"].get<std::string>();
    const uint64_t nbytes = entry["bytes"].get<uint64_t>();
    a.bytes.resize(nbytes);
    if (!in.read(reinterpret_cast<char*>(a.bytes.data()),
                 static_cast<std::streamsize>(nbytes)))
      throw std::runtime_error("checkpoint: truncated array '" + name + "' in " +
                               path);
    ck.arrays[name] = std::move(a);
  }
  return ck;
}

}  // namespace dcw
