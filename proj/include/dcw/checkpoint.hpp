#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace dcw {

/// Named-array persistence container: a JSON manifest (names, shapes, dtypes,
/// byte offsets, format version) followed by contiguous little-endian raw
/// arrays. Round-trips are bit-exact; version or size mismatches are
/// rejected, never coerced.
class Checkpoint {
 public:
  static constexpr int kFormatVersion = 1;
  static constexpr const char* kMagic = "DCWCKPT1\n";

  struct Array {
    std::vector<int> shape;
    std::string dtype;  // "f64" | "f32" | "i64"
    std::vector<uint8_t> bytes;
  };

  int64_t step = 0;
  int epoch = 0;
  int pos = 0;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json rng = nlohmann::json::object();
  std::map<std::string, Array> arrays;

  template <class T>
  void put(const std::string& name, const std::vector<int>& shape,
           const std::vector<T>& values);

  template <class T>
  std::vector<T> get(const std::string& name,
                     std::vector<int>* shape = nullptr) const;

  bool has(const std::string& name) const { return arrays.count(name) > 0; }

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

namespace detail {

template <class T>
struct DtypeName;
template <>
struct DtypeName<double> {
  static constexpr const char* value = "f64";
};
template <>
struct DtypeName<float> {
  static constexpr const char* value = "f32";
};
template <>
struct DtypeName<int64_t> {
  static constexpr const char* value = "i64";
};

void encode_le(const void* src, size_t elem_size, size_t count,
               std::vector<uint8_t>& out);
void decode_le(const std::vector<uint8_t>& bytes, size_t elem_size, size_t count,
               void* dst);

}  // namespace detail

template <class T>
void Checkpoint::put(const std::string& name, const std::vector<int>& shape,
                     const std::vector<T>& values) {
  Array a;
  a.shape = shape;
  a.dtype = detail::DtypeName<T>::value;
  detail::encode_le(values.data(), sizeof(T), values.size(), a.bytes);
  arrays[name] = std::move(a);
}

template <class T>
std::vector<T> Checkpoint::get(const std::string& name,
                               std::vector<int>* shape) const {
  auto it = arrays.find(name);
  if (it == arrays.end())
    throw std::runtime_error("checkpoint: no array named '" + name + "'");
  const Array& a = it->second;
  if (a.dtype != detail::DtypeName<T>::value)
    throw std::runtime_error("checkpoint: array '" + name + "' has dtype " +
                             a.dtype + ", requested " +
                             detail::DtypeName<T>::value);
  std::vector<T> out(a.bytes.size() / sizeof(T));
  detail::decode_le(a.bytes, sizeof(T), out.size(), out.data());
  if (shape) *shape = a.shape;
  return out;
}

}  // namespace dcw
