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

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include "lfdcu/errors.hpp"
#include "lfdcu/tensor.hpp"

namespace lfdcu {

namespace detail {

template <typename T>
void check_finite(const Tensor<T>& t, const char* what) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i])) {
      throw NonFiniteError(std::string(what) + ": non-finite value at flat index " +
                           std::to_string(i));
    }
  }
}

}  // namespace detail

/// A 4D light field stored as a 5-axis array [u, v, s, t, c].
///
/// (u, v) index the view, (s, t) the pixel row and column, c the colour
/// channel. C must be 1 or 3. Values are finite; image-valued instances
/// additionally lie in [0, 1], which make_lightfield can enforce.
template <typename T>
class LightField4D {
 public:
  LightField4D() = default;

  /// Wraps `data` after checking axis count, channel count and finiteness.
  explicit LightField4D(Tensor<T> data, std::string meta = {})
      : data_(std::move(data)), meta_(std::move(meta)) {
    if (data_.rank() != 5) {
      throw DimensionError("light field needs 5 axes [u,v,s,t,c], got " +
                           shape_str(data_.shape()));
    }
    const Dims5 d = data_.dims5();
    if (d.u == 0 || d.v == 0 || d.s == 0 || d.t == 0) {
      throw DimensionError("light field axes must be non-empty, got " +
                           shape_str(data_.shape()));
    }
    if (d.c != 1 && d.c != 3) {
      throw DimensionError("light field channel count must be 1 or 3, got " +
                           std::to_string(d.c));
    }
    detail::check_finite(data_, "light field");
  }

  const Tensor<T>& data() const { return data_; }
  Tensor<T>& mutable_data() { return data_; }
  Tensor<T> release() && { return std::move(data_); }
  Dims5 dims() const { return data_.dims5(); }
  const std::string& meta() const { return meta_; }
  void set_meta(std::string meta) { meta_ = std::move(meta); }

  const T& operator()(std::size_t u, std::size_t v, std::size_t s,
                      std::size_t t, std::size_t c) const {
    return data_.at(u, v, s, t, c);
  }

  template <typename U>
  LightField4D<U> cast() const {
    return LightField4D<U>(data_.template cast<U>(), meta_);
  }

 private:
  Tensor<T> data_{Dims5{}};
  std::string meta_;
};

/// Multi-channel features laid out like a light field: [u, v, s, t, f].
template <typename T>
class FeatureField {
 public:
  FeatureField() = default;
  explicit FeatureField(Tensor<T> data) : data_(std::move(data)) {
    if (data_.rank() != 5) {
      throw DimensionError("feature field needs 5 axes, got " +
                           shape_str(data_.shape()));
    }
    if (data_.dim(4) == 0) throw DimensionError("feature field has no channels");
    detail::check_finite(data_, "feature field");
  }

  const Tensor<T>& data() const { return data_; }
  Dims5 dims() const { return data_.dims5(); }
  std::size_t channels() const { return data_.dim(4); }

 private:
  Tensor<T> data_{Dims5{}};
};

/// Makes a light field from a raw 5-axis array.
template <typename T>
LightField4D<T> make_lightfield(Tensor<T> raw, bool validate_range) {
  LightField4D<T> lf(std::move(raw));
  if (validate_range) {
    for (T x : lf.data().values()) {
      if (x < T(0) || x > T(1)) {
        throw RangeError("light field value " + std::to_string(x) +
                         " lies outside [0,1]");
      }
    }
  }
  return lf;
}

/// Copy of view (u, v) as a 3-axis image [s, t, c].
template <typename T>
Tensor<T> extract_sai(const LightField4D<T>& lf, std::size_t u, std::size_t v) {
  const Dims5 d = lf.dims();
  if (u >= d.u || v >= d.v) {
    throw IndexError("view (" + std::to_string(u) + "," + std::to_string(v) +
                     ") outside angular grid " + std::to_string(d.u) + "x" +
                     std::to_string(d.v));
  }
  Tensor<T> out(Shape{d.s, d.t, d.c});
  const std::size_t block = d.s * d.t * d.c;
  const T* src = lf.data().data() + (u * d.v + v) * block;
  std::copy(src, src + block, out.data());
  return out;
}

enum class EpiOrientation { kHorizontal, kVertical };

/// A 2D epipolar-plane slice.
///
/// Horizontal slices fix (v, s) and run u along rows, t along columns.
/// Vertical slices fix (u, t) and run v along rows, s along columns.
template <typename T>
struct EpiSlice {
  EpiOrientation orientation = EpiOrientation::kHorizontal;
  std::size_t fixed_angular = 0;
  std::size_t fixed_spatial = 0;
  std::size_t channel = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  T operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

template <typename T>
EpiSlice<T> extract_epi(const LightField4D<T>& lf, EpiOrientation orientation,
                        std::size_t fixed_angular, std::size_t fixed_spatial,
                        std::size_t channel) {
  const Dims5 d = lf.dims();
  const bool horizontal = orientation == EpiOrientation::kHorizontal;
  const std::size_t ang_lim = horizontal ? d.v : d.u;
  const std::size_t sp_lim = horizontal ? d.s : d.t;
  if (fixed_angular >= ang_lim || fixed_spatial >= sp_lim || channel >= d.c) {
    throw IndexError("EPI index out of range for light field " +
                     shape_str(lf.data().shape()));
  }
  EpiSlice<T> epi;
  epi.orientation = orientation;
  epi.fixed_angular = fixed_angular;
  epi.fixed_spatial = fixed_spatial;
  epi.channel = channel;
  epi.rows = horizontal ? d.u : d.v;
  epi.cols = horizontal ? d.t : d.s;
  epi.data.resize(epi.rows * epi.cols);
  for (std::size_t r = 0; r < epi.rows; ++r) {
    for (std::size_t c = 0; c < epi.cols; ++c) {
      epi.data[r * epi.cols + c] =
          horizontal ? lf(r, fixed_angular, fixed_spatial, c, channel)
                     : lf(fixed_angular, r, c, fixed_spatial, channel);
    }
  }
  return epi;
}

/// The 2D plane a convolution slides over.
enum class Plane { kSpatial, kAngular, kEpiH, kEpiV };

inline const char* plane_name(Plane p) {
  switch (p) {
    case Plane::kSpatial: return "spatial";
    case Plane::kAngular: return "angular";
    case Plane::kEpiH: return "epi_h";
    case Plane::kEpiV: return "epi_v";
  }
  return "?";
}

/// Grid axes (0=u, 1=v, 2=s, 3=t) for a plane: {batch0, batch1, row, col}.
inline std::array<std::size_t, 4> plane_axes(Plane p) {
  switch (p) {
    case Plane::kSpatial: return {0, 1, 2, 3};
    case Plane::kAngular: return {2, 3, 0, 1};
    case Plane::kEpiH: return {1, 2, 0, 3};
    case Plane::kEpiV: return {0, 3, 1, 2};
  }
  return {0, 1, 2, 3};
}

/// Describes how a feature field was permuted into a batch of planes.
struct PlaneLayout {
  Plane plane = Plane::kSpatial;
  Dims5 source;
  std::array<std::size_t, 4> axes{};
};

/// A stack of 2D slices [batch, rows, cols, channels].
template <typename T>
struct PlaneBatch {
  Tensor<T> slices;
  PlaneLayout layout;

  std::size_t count() const { return slices.dim(0); }
};

namespace detail {

inline std::array<std::size_t, 4> grid_extent(const Dims5& d) {
  return {d.u, d.v, d.s, d.t};
}

// Visits every grid position; `fn(src_offset, dst_offset)` in units of
// positions (multiply by channel count for element offsets).
template <typename Fn>
void for_each_permuted(const Dims5& d, const std::array<std::size_t, 4>& axes,
                       Fn&& fn) {
  const auto ext = grid_extent(d);
  const std::array<std::size_t, 4> src_stride = {d.v * d.s * d.t, d.s * d.t,
                                                 d.t, 1};
  const std::array<std::size_t, 4> pext = {ext[axes[0]], ext[axes[1]],
                                           ext[axes[2]], ext[axes[3]]};
  std::size_t dst = 0;
  for (std::size_t a = 0; a < pext[0]; ++a)
    for (std::size_t b = 0; b < pext[1]; ++b)
      for (std::size_t r = 0; r < pext[2]; ++r)
        for (std::size_t c = 0; c < pext[3]; ++c, ++dst) {
          const std::size_t src = a * src_stride[axes[0]] +
                                  b * src_stride[axes[1]] +
                                  r * src_stride[axes[2]] +
                                  c * src_stride[axes[3]];
          fn(src, dst);
        }
}

}  // namespace detail

/// Rearranges a feature field into a batch of 2D slices over `plane`.
///
/// A 2D convolution over every slice then acts over (s,t) for spatial,
/// (u,v) for angular, (u,t) for epi_h and (v,s) for epi_v.
template <typename T>
PlaneBatch<T> views_as_plane_batch(const Tensor<T>& f, Plane plane) {
  const Dims5 d = f.dims5();
  const auto axes = plane_axes(plane);
  const auto ext = detail::grid_extent(d);
  PlaneBatch<T> out;
  out.layout = {plane, d, axes};
  out.slices = Tensor<T>(
      Shape{ext[axes[0]] * ext[axes[1]], ext[axes[2]], ext[axes[3]], d.c});
  const T* src = f.data();
  T* dst = out.slices.data();
  detail::for_each_permuted(d, axes, [&](std::size_t s, std::size_t t) {
    std::copy(src + s * d.c, src + (s + 1) * d.c, dst + t * d.c);
  });
  return out;
}

template <typename T>
PlaneBatch<T> views_as_plane_batch(const FeatureField<T>& f, Plane plane) {
  return views_as_plane_batch(f.data(), plane);
}

/// Inverse of views_as_plane_batch. Channel count may differ from the source
/// (e.g. after a convolution changed it).
template <typename T>
Tensor<T> restore_plane_batch(const PlaneBatch<T>& batch) {
  Dims5 d = batch.layout.source;
  d.c = batch.slices.dim(3);
  Tensor<T> out(d);
  const T* src = batch.slices.data();
  T* dst = out.data();
  detail::for_each_permuted(d, batch.layout.axes,
                            [&](std::size_t s, std::size_t t) {
                              std::copy(src + t * d.c, src + (t + 1) * d.c,
                                        dst + s * d.c);
                            });
  return out;
}

/// Index of the centre view; floor for even angular sizes.
inline std::pair<std::size_t, std::size_t> center_view(const Dims5& d) {
  return {d.u / 2, d.v / 2};
}

/// Grayscale (unweighted channel mean) of the centre view as an S x T matrix.
template <typename T>
Tensor<T> matricize_center_sai(const LightField4D<T>& lf) {
  const Dims5 d = lf.dims();
  const auto [uc, vc] = center_view(d);
  Tensor<T> m(Shape{d.s, d.t});
  for (std::size_t s = 0; s < d.s; ++s) {
    for (std::size_t t = 0; t < d.t; ++t) {
      T acc{};
      for (std::size_t c = 0; c < d.c; ++c) acc += lf(uc, vc, s, t, c);
      m[s * d.t + t] = acc / static_cast<T>(d.c);
    }
  }
  return m;
}

}  // namespace lfdcu
