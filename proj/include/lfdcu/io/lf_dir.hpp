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

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <regex>
#include <set>
#include <string>

#include "lfdcu/errors.hpp"
#include "lfdcu/io/config.hpp"
#include "lfdcu/io/png.hpp"
#include "lfdcu/lightfield.hpp"

namespace lfdcu::io {

inline constexpr const char* kManifestName = "lf.json";

struct LfManifest {
  std::size_t u = 0, v = 0, s = 0, t = 0, c = 0;
  int bit_depth = 8;
  double value_scale = 255.0;
  std::string provenance;

  Json to_json() const {
    return Json{{"U", u},         {"V", v},
                {"S", s},         {"T", t},
                {"C", c},         {"bit_depth", bit_depth},
                {"value_scale", value_scale}, {"provenance", provenance}};
  }

  static LfManifest from_json(const Json& j) {
    LfManifest m;
    try {
      m.u = j.at("U").get<std::size_t>();
      m.v = j.at("V").get<std::size_t>();
      m.s = j.at("S").get<std::size_t>();
      m.t = j.at("T").get<std::size_t>();
      m.c = j.at("C").get<std::size_t>();
      m.bit_depth = j.value("bit_depth", 8);
      m.value_scale = j.value("value_scale", m.bit_depth == 16 ? 65535.0 : 255.0);
      m.provenance = j.value("provenance", std::string{});
    } catch (const Json::exception& e) {
      throw FormatError(std::string("malformed light-field manifest: ") + e.what());
    }
    if (m.u == 0 || m.v == 0 || m.s == 0 || m.t == 0 || (m.c != 1 && m.c != 3))
      throw FormatError("manifest dimensions are invalid");
    if (!(m.value_scale > 0)) throw FormatError("manifest value_scale must be positive");
    return m;
  }

  bool operator==(const LfManifest&) const = default;
};

inline std::string view_filename(std::size_t u, std::size_t v) {
  return "view_" + std::to_string(u) + "_" + std::to_string(v) + ".png";
}

template <typename T>
struct LoadedLf {
  LightField4D<T> lf;
  LfManifest manifest;
};

template <typename T = double>
LoadedLf<T> load_lf_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  const LfManifest m = LfManifest::from_json(read_json_file(dir / kManifestName));

  static const std::regex pattern(R"(view_(\d+)_(\d+)\.png)");
  std::set<std::size_t> us, vs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch match;
    const std::string name = entry.path().filename().string();
    if (!std::regex_match(name, match, pattern)) continue;
    const std::size_t u = std::stoul(match[1]);
    const std::size_t v = std::stoul(match[2]);
    if (u >= m.u || v >= m.v)
      throw ManifestMismatchError(name + " lies outside the manifest's " +
                                  std::to_string(m.u) + "x" + std::to_string(m.v) +
                                  " angular grid");
    us.insert(u);
    vs.insert(v);
  }
  if (us.size() != m.u || vs.size() != m.v)
    throw ManifestMismatchError("manifest declares " + std::to_string(m.u) + "x" +
                                std::to_string(m.v) + " views but files cover " +
                                std::to_string(us.size()) + "x" +
                                std::to_string(vs.size()));

  Tensor<T> data(Dims5{m.u, m.v, m.s, m.t, m.c});
  for (std::size_t u = 0; u < m.u; ++u) {
    for (std::size_t v = 0; v < m.v; ++v) {
      const fs::path p = dir / view_filename(u, v);
      if (!fs::exists(p)) throw MissingViewError("missing view " + p.string());
      const RawImage img = read_png(p);
      if (img.rows != m.s || img.cols != m.t || img.channels != m.c)
        throw ManifestMismatchError(p.string() + " does not match manifest size");
      const double scale = img.bit_depth == 16 ? 65535.0 : 255.0;
      std::size_t i = 0;
      for (std::size_t s = 0; s < m.s; ++s)
        for (std::size_t t = 0; t < m.t; ++t)
          for (std::size_t c = 0; c < m.c; ++c)
            data.at(u, v, s, t, c) = static_cast<T>(img.samples[i++] / scale);
    }
  }
  return {LightField4D<T>(std::move(data), m.provenance), m};
}

/// Writes view_{u}_{v}.png files and lf.json. Values must lie in [0, 1].
template <typename T>
LfManifest save_lf_dir(const LightField4D<T>& lf, const std::filesystem::path& dir,
                       int bit_depth = 16) {
  namespace fs = std::filesystem;
  if (bit_depth != 8 && bit_depth != 16) throw ConfigError("bit depth must be 8 or 16");
  const Dims5 d = lf.dims();
  for (T x : lf.data().values())
    if (x < T(0) || x > T(1)) throw RangeError("light field value outside [0,1]");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string());

  const double scale = bit_depth == 16 ? 65535.0 : 255.0;
  RawImage img;
  img.rows = d.s;
  img.cols = d.t;
  img.channels = d.c;
  img.bit_depth = bit_depth;
  img.samples.resize(d.s * d.t * d.c);
  for (std::size_t u = 0; u < d.u; ++u) {
    for (std::size_t v = 0; v < d.v; ++v) {
      std::size_t i = 0;
      for (std::size_t s = 0; s < d.s; ++s)
        for (std::size_t t = 0; t < d.t; ++t)
          for (std::size_t c = 0; c < d.c; ++c)
            img.samples[i++] = static_cast<std::uint16_t>(
                std::lround(static_cast<double>(lf(u, v, s, t, c)) * scale));
      const fs::path target = dir / view_filename(u, v);
      fs::path tmp = target;
      tmp += ".tmp";
      write_png(tmp, img);
      fs::rename(tmp, target, ec);
      if (ec) throw IoError("cannot rename into " + target.string());
    }
  }
  LfManifest m{d.u, d.v, d.s, d.t, d.c, bit_depth, scale, lf.meta()};
  write_file_atomic(dir / kManifestName, m.to_json().dump(2) + "\n");
  return m;
}

}  // namespace lfdcu::io
