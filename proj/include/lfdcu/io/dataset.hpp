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

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "lfdcu/errors.hpp"
#include "lfdcu/io/lf_dir.hpp"
#include "lfdcu/metrics.hpp"

namespace lfdcu::io {

/// A paired dataset is a directory of scenes, each holding `input/` (low
/// light) and `target/` (normal light) light-field directories. Scenes are
/// returned in name order.
template <typename T = double>
std::vector<Sample<T>> load_dataset(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw IoError(root.string() + " is not a directory");
  std::vector<fs::path> scenes;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && fs::is_directory(e.path() / "input")) scenes.push_back(e.path());
  std::sort(scenes.begin(), scenes.end());
  if (scenes.empty()) throw DataError(root.string() + " holds no scene/input directories");
  std::vector<Sample<T>> out;
  for (const auto& dir : scenes) {
    if (!fs::is_directory(dir / "target"))
      throw MissingViewError(dir.string() + " has no target directory");
    auto in = load_lf_dir<T>(dir / "input").lf;
    auto gt = load_lf_dir<T>(dir / "target").lf;
    if (in.dims() != gt.dims())
      throw ShapeError(dir.string() + ": input and target sizes differ");
    out.push_back({dir.filename().string(), std::move(in), std::move(gt)});
  }
  return out;
}

template <typename T>
void save_sample(const Sample<T>& s, const std::filesystem::path& root, int bit_depth = 16) {
  save_lf_dir(s.input, root / s.name / "input", bit_depth);
  save_lf_dir(s.target, root / s.name / "target", bit_depth);
}

}  // namespace lfdcu::io
