#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "drifa/param.hpp"

namespace drifa {

// Binary checkpoint format, explicitly little-endian:
//   magic "DRIF", version u32
//   repeated records: name_len u32, name bytes, dtype u8 (1=f32, 2=f64),
//                     rank u32, dims u32..., raw values
// Loading is strict: names, shapes and dtype must match the model exactly.

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64_bits(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct ByteReader {
  const std::string& data;
  std::size_t pos = 0;

  bool done() const { return pos >= data.size(); }

  std::uint8_t u8() {
    if (pos + 1 > data.size()) fail(ErrorKind::CheckpointCorrupt, "checkpoint: truncated file");
    return static_cast<std::uint8_t>(data[pos++]);
  }

  std::uint32_t u32() {
    if (pos + 4 > data.size()) fail(ErrorKind::CheckpointCorrupt, "checkpoint: truncated file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data[pos++])) << (8 * i);
    return v;
  }

  std::uint64_t bits(int bytes) {
    if (pos + static_cast<std::size_t>(bytes) > data.size())
      fail(ErrorKind::CheckpointCorrupt, "checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i)
      v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data[pos++])) << (8 * i);
    return v;
  }

  std::string str(std::size_t len) {
    if (pos + len > data.size()) fail(ErrorKind::CheckpointCorrupt, "checkpoint: truncated file");
    std::string s = data.substr(pos, len);
    pos += len;
    return s;
  }
};

template <typename T>
constexpr std::uint8_t dtype_tag() {
  return sizeof(T) == 4 ? 1 : 2;
}

template <typename T>
std::uint64_t value_bits(T v) {
  if constexpr (sizeof(T) == 4) {
    std::uint32_t b;
    std::memcpy(&b, &v, 4);
    return b;
  } else {
    std::uint64_t b;
    std::memcpy(&b, &v, 8);
    return b;
  }
}

template <typename T>
T bits_value(std::uint64_t b) {
  T v;
  if constexpr (sizeof(T) == 4) {
    std::uint32_t w = static_cast<std::uint32_t>(b);
    std::memcpy(&v, &w, 4);
  } else {
    std::memcpy(&v, &b, 8);
  }
  return v;
}

}  // namespace detail

inline constexpr char kCheckpointMagic[4] = {'D', 'R', 'I', 'F'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
std::string serialize_checkpoint(const std::vector<NamedParameter<T>>& params) {
  std::string out;
  out.append(kCheckpointMagic, 4);
  detail::put_u32(out, kCheckpointVersion);
  for (const auto& np : params) {
    detail::put_u32(out, static_cast<std::uint32_t>(np.name.size()));
    out.append(np.name);
    out.push_back(static_cast<char>(detail::dtype_tag<T>()));
    const TensorNode<T>& t = *np.param->tensor;
    detail::put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t d : t.shape) detail::put_u32(out, static_cast<std::uint32_t>(d));
    for (const T& v : t.values) detail::put_u64_bits(out, detail::value_bits(v), sizeof(T));
  }
  return out;
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<NamedParameter<T>>& params) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::DataNotFound, "checkpoint: cannot write " + path.string());
  const std::string data = serialize_checkpoint(params);
  f.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!f) fail(ErrorKind::DataNotFound, "checkpoint: write failed for " + path.string());
}

template <typename T>
void deserialize_checkpoint(const std::string& data, std::vector<NamedParameter<T>>& params) {
  detail::ByteReader r{data};
  if (r.str(4) != std::string(kCheckpointMagic, 4))
    fail(ErrorKind::CheckpointCorrupt, "checkpoint: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    fail(ErrorKind::CheckpointCorrupt,
         "checkpoint: unsupported version " + std::to_string(version));

  std::map<std::string, std::pair<Shape, std::vector<T>>> records;
  while (!r.done()) {
    const std::uint32_t name_len = r.u32();
    std::string name = r.str(name_len);
    const std::uint8_t dtype = r.u8();
    if (dtype != detail::dtype_tag<T>())
      fail(ErrorKind::CheckpointCorrupt,
           "checkpoint: dtype mismatch for '" + name + "' (tag " + std::to_string(dtype) + ")");
    const std::uint32_t rank = r.u32();
    Shape shape(rank);
    for (auto& d : shape) d = r.u32();
    std::vector<T> values(shape_size(shape));
    for (auto& v : values) v = detail::bits_value<T>(r.bits(sizeof(T)));
    if (!records.emplace(std::move(name), std::make_pair(std::move(shape), std::move(values))).second)
      fail(ErrorKind::CheckpointCorrupt, "checkpoint: duplicate parameter record");
  }

  if (records.size() != params.size())
    fail(ErrorKind::CheckpointCorrupt,
         "checkpoint: holds " + std::to_string(records.size()) + " parameters, model has " +
             std::to_string(params.size()));
  for (auto& np : params) {
    auto it = records.find(np.name);
    if (it == records.end())
      fail(ErrorKind::CheckpointCorrupt, "checkpoint: missing parameter '" + np.name + "'");
    TensorNode<T>& t = *np.param->tensor;
    if (it->second.first != t.shape)
      fail(ErrorKind::CheckpointCorrupt,
           "checkpoint: shape " + shape_str(it->second.first) + " for '" + np.name +
               "', model expects " + shape_str(t.shape));
    t.values = std::move(it->second.second);
  }
}

template <typename T>
void load_checkpoint(const std::filesystem::path& path, std::vector<NamedParameter<T>>& params) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::DataNotFound, "checkpoint: cannot read " + path.string());
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  deserialize_checkpoint(data, params);
}

}  // namespace drifa
