// Copyright 2026 The lfdcu Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "lfdcu/errors.hpp"
#include "lfdcu/io/config.hpp"
#include "lfdcu/unfold.hpp"

namespace lfdcu::io {

inline constexpr char kWeightMagic[8] = {'L', 'F', 'D', 'C', 'U', 'W', 'T', '1'};
inline constexpr std::uint32_t kWeightVersion = 1;

namespace detail {

inline void put_le(std::string& out, std::uint64_t x, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

inline std::uint64_t get_le(const std::string& in, std::size_t pos, int bytes) {
  std::uint64_t x = 0;
  for (int i = 0; i < bytes; ++i)
    x |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return x;
}

inline std::uint32_t crc32_of(const std::string& bytes, std::size_t pos, std::size_t len) {
  uLong crc = crc32(0L, Z_NULL, 0);
  const auto* p = reinterpret_cast<const Bytef*>(bytes.data() + pos);
  while (len > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(len, 1u << 30));
    crc = crc32(crc, p, chunk);
    p += chunk;
    len -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace detail

/// Serialises every parameter as float64 and writes the file atomically.
/// Returns the payload CRC-32.
template <typename T>
std::uint32_t save_weights(const Model<T>& model, const std::filesystem::path& path) {
  auto params = const_cast<Model<T>&>(model).named_parameters();
  std::string payload;
  Json entries = Json::array();
  for (auto& [name, var] : params) {
    const Tensor<T>& v = var.value();
    entries.push_back(
        {{"name", name}, {"shape", v.shape()}, {"offset", payload.size()}});
    for (T x : v.values())
      detail::put_le(payload, std::bit_cast<std::uint64_t>(static_cast<double>(x)), 8);
  }
  const std::uint32_t crc = detail::crc32_of(payload, 0, payload.size());
  const Json header{{"config", to_json(model.config)},
                    {"entries", entries},
                    {"payload_bytes", payload.size()},
                    {"payload_crc32", crc}};
  const std::string head = header.dump();
  std::string out(kWeightMagic, sizeof(kWeightMagic));
  detail::put_le(out, kWeightVersion, 4);
  detail::put_le(out, head.size(), 8);
  out += head;
  out += payload;
  write_file_atomic(path, out);
  return crc;
}

struct WeightHeader {
  ModelConfig config;
  Json entries;
  std::size_t payload_offset = 0;
};

namespace detail {

inline WeightHeader parse_weight_file(const std::string& bytes, const std::string& where) {
  constexpr std::size_t kFixed = sizeof(kWeightMagic) + 4 + 8;
  if (bytes.size() < sizeof(kWeightMagic) ||
      std::memcmp(bytes.data(), kWeightMagic, sizeof(kWeightMagic)) != 0)
    throw FormatError(where + " is not a weight file");
  if (bytes.size() < kFixed) throw ChecksumError(where + " is truncated");
  const auto version = static_cast<std::uint32_t>(get_le(bytes, 8, 4));
  if (version != kWeightVersion)
    throw FormatError(where + ": unsupported weight format version " +
                      std::to_string(version));
  const std::uint64_t head_len = get_le(bytes, 12, 8);
  if (head_len > bytes.size() - kFixed) throw ChecksumError(where + " is truncated");
  Json header;
  try {
    header = Json::parse(bytes.substr(kFixed, head_len));
  } catch (const Json::parse_error& e) {
    throw FormatError(where + ": corrupt header: " + e.what());
  }
  WeightHeader h;
  h.payload_offset = kFixed + head_len;
  try {
    const std::size_t payload_bytes = header.at("payload_bytes").get<std::size_t>();
    const std::uint32_t crc = header.at("payload_crc32").get<std::uint32_t>();
    if (bytes.size() - h.payload_offset != payload_bytes)
      throw ChecksumError(where + ": payload holds " +
                          std::to_string(bytes.size() - h.payload_offset) +
                          " bytes, header declares " + std::to_string(payload_bytes));
    if (crc32_of(bytes, h.payload_offset, payload_bytes) != crc)
      throw ChecksumError(where + ": payload checksum mismatch");
    h.config = model_config_from_json(header.at("config"));
    h.entries = header.at("entries");
  } catch (const Json::exception& e) {
    throw FormatError(where + ": malformed header: " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(where + ": stored config invalid: " + e.what());
  }
  return h;
}

inline std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace detail

/// Loads a model and checks it against `expected`; any difference in the
/// architecture is reported as ShapeError.
template <typename T = double>
Model<T> load_weights(const std::filesystem::path& path, const ModelConfig& expected) {
  const std::string bytes = detail::read_all(path);
  const WeightHeader h = detail::parse_weight_file(bytes, path.string());
  if (!(h.config == expected))
    throw ShapeError(path.string() + ": stored config " + to_json(h.config).dump() +
                     " does not match " + to_json(expected).dump());
  Model<T> model = Model<T>::make(expected, 0);
  std::map<std::string, Var<T>> by_name;
  for (auto& [name, var] : model.named_parameters()) by_name.emplace(name, var);

  std::set<std::string> seen;
  const std::size_t payload_bytes = bytes.size() - h.payload_offset;
  try {
    for (const auto& e : h.entries) {
      const std::string name = e.at("name").get<std::string>();
      const Shape shape = e.at("shape").get<Shape>();
      const std::size_t offset = e.at("offset").get<std::size_t>();
      auto it = by_name.find(name);
      if (it == by_name.end()) throw ShapeError("unexpected parameter " + name);
      if (!seen.insert(name).second) throw ShapeError("duplicate parameter " + name);
      Tensor<T>& dst = it->second.mutable_value();
      if (dst.shape() != shape)
        throw ShapeError(name + " has shape " + shape_str(shape) + ", model expects " +
                         shape_str(dst.shape()));
      if (offset + 8 * dst.size() > payload_bytes)
        throw FormatError(name + " extends past the payload");
      for (std::size_t i = 0; i < dst.size(); ++i)
        dst[i] = static_cast<T>(std::bit_cast<double>(
            detail::get_le(bytes, h.payload_offset + offset + 8 * i, 8)));
    }
  } catch (const Json::exception& e) {
    throw FormatError(path.string() + ": malformed entry: " + e.what());
  }
  if (seen.size() != by_name.size())
    throw ShapeError(path.string() + " lacks " + std::to_string(by_name.size() - seen.size()) +
                     " parameter(s)");
  return model;
}

/// Loads a model using the config stored in the file.
template <typename T = double>
Model<T> load_weights(const std::filesystem::path& path) {
  const std::string bytes = detail::read_all(path);
  const WeightHeader h = detail::parse_weight_file(bytes, path.string());
  return load_weights<T>(path, h.config);
}

}  // namespace lfdcu::io
