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
#include <array>
#include <cmath>
#include <cstddef>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "lfdcu/autodiff.hpp"
#include "lfdcu/errors.hpp"
#include "lfdcu/lightfield.hpp"
#include "lfdcu/tensor.hpp"

namespace lfdcu::ops {

using ad::Var;

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<T> y = a.value();
  const T* bv = b.value().data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  return ad::make_result<T>(std::move(y), {a, b}, [](ad::Node<T>& n) {
    for (auto& p : n.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  Tensor<T> y = a.value();
  const T* bv = b.value().data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  return ad::make_result<T>(std::move(y), {a, b}, [](ad::Node<T>& n) {
    for (std::size_t k = 0; k < 2; ++k) {
      auto& p = n.parents[k];
      if (!p->requires_grad) continue;
      auto& g = p->grad_buffer();
      const T sign = k == 0 ? T(1) : T(-1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * n.grad[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  Tensor<T> y = a.value();
  const T* bv = b.value().data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  return ad::make_result<T>(std::move(y), {a, b}, [](ad::Node<T>& n) {
    auto& pa = n.parents[0];
    auto& pb = n.parents[1];
    if (pa->requires_grad) {
      auto& g = pa->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * pb->value[i];
    }
    if (pb->requires_grad) {
      auto& g = pb->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * pa->value[i];
    }
  });
}

/// Multiplies a [..., C] field by a single-channel [..., 1] map.
template <typename T>
Var<T> mul_bcast_channels(const Var<T>& x, const Var<T>& m) {
  const Shape& xs = x.shape();
  Shape ms = xs;
  ms.back() = 1;
  require_same_shape(m.shape(), ms, "mul_bcast_channels");
  const std::size_t C = xs.back();
  const std::size_t P = x.value().size() / C;
  Tensor<T> y = x.value();
  for (std::size_t p = 0; p < P; ++p) {
    const T s = m.value()[p];
    for (std::size_t c = 0; c < C; ++c) y[p * C + c] *= s;
  }
  return ad::make_result<T>(std::move(y), {x, m}, [C, P](ad::Node<T>& n) {
    auto& px = n.parents[0];
    auto& pm = n.parents[1];
    if (px->requires_grad) {
      auto& g = px->grad_buffer();
      for (std::size_t p = 0; p < P; ++p)
        for (std::size_t c = 0; c < C; ++c)
          g[p * C + c] += n.grad[p * C + c] * pm->value[p];
    }
    if (pm->requires_grad) {
      auto& g = pm->grad_buffer();
      for (std::size_t p = 0; p < P; ++p) {
        T acc{};
        for (std::size_t c = 0; c < C; ++c)
          acc += n.grad[p * C + c] * px->value[p * C + c];
        g[p] += acc;
      }
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& x, T k) {
  Tensor<T> y = x.value();
  for (auto& v : y.values()) v *= k;
  return ad::make_result<T>(std::move(y), {x}, [k](ad::Node<T>& n) {
    auto& g = n.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += k * n.grad[i];
  });
}

/// x + k for a constant k.
template <typename T>
Var<T> shift(const Var<T>& x, T k) {
  Tensor<T> y = x.value();
  for (auto& v : y.values()) v += k;
  return ad::make_result<T>(std::move(y), {x}, [](ad::Node<T>& n) {
    auto& g = n.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  });
}

/// Multiplies a tensor by a rank-0 Var.
template <typename T>
Var<T> mul_scalar(const Var<T>& x, const Var<T>& s) {
  if (s.value().size() != 1) throw ShapeError("mul_scalar needs a scalar factor");
  const T k = s.value().item();
  Tensor<T> y = x.value();
  for (auto& v : y.values()) v *= k;
  return ad::make_result<T>(std::move(y), {x, s}, [](ad::Node<T>& n) {
    auto& px = n.parents[0];
    auto& ps = n.parents[1];
    const T k = ps->value.item();
    if (px->requires_grad) {
      auto& g = px->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += k * n.grad[i];
    }
    if (ps->requires_grad) {
      T acc{};
      for (std::size_t i = 0; i < n.grad.size(); ++i) acc += n.grad[i] * px->value[i];
      ps->grad_buffer()[0] += acc;
    }
  });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
  Tensor<T> y = x.value();
  const bool rec = ad::branch_recording();
  for (auto& v : y.values()) {
    if (rec) ad::record_branch(v > T(0));
    if (!(v > T(0))) v *= slope;
  }
  return ad::make_result<T>(std::move(y), {x}, [slope](ad::Node<T>& n) {
    auto& p = n.parents[0];
    auto& g = p->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] += p->value[i] > T(0) ? n.grad[i] : slope * n.grad[i];
  });
}

/// Clamps to [lo, hi]; gradient passes only where lo <= x <= hi.
template <typename T>
Var<T> clamp(const Var<T>& x, T lo, T hi) {
  Tensor<T> y = x.value();
  const bool rec = ad::branch_recording();
  for (auto& v : y.values()) {
    if (rec) ad::record_branch(v < lo ? 0 : (v > hi ? 2 : 1));
    v = std::clamp(v, lo, hi);
  }
  return ad::make_result<T>(std::move(y), {x}, [lo, hi](ad::Node<T>& n) {
    auto& p = n.parents[0];
    auto& g = p->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T v = p->value[i];
      if (v >= lo && v <= hi) g[i] += n.grad[i];
    }
  });
}

/// Max over the last axis, keeping it as size 1. Ties go to the first index.
template <typename T>
Var<T> max_channels(const Var<T>& x) {
  const Shape& xs = x.shape();
  const std::size_t C = xs.back();
  const std::size_t P = x.value().size() / C;
  Shape ys = xs;
  ys.back() = 1;
  Tensor<T> y(ys);
  std::vector<std::size_t> arg(P);
  const bool rec = ad::branch_recording();
  for (std::size_t p = 0; p < P; ++p) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < C; ++c)
      if (x.value()[p * C + c] > x.value()[p * C + best]) best = c;
    arg[p] = best;
    y[p] = x.value()[p * C + best];
    if (rec) ad::record_branch(best);
  }
  return ad::make_result<T>(std::move(y), {x},
                            [C, arg = std::move(arg)](ad::Node<T>& n) {
                              auto& g = n.parents[0]->grad_buffer();
                              for (std::size_t p = 0; p < arg.size(); ++p)
                                g[p * C + arg[p]] += n.grad[p];
                            });
}

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels of nothing");
  Shape base = parts.front().shape();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const auto& v : parts) {
    Shape s = v.shape();
    widths.push_back(s.back());
    total += s.back();
    s.back() = base.back();
    require_same_shape(s, base, "concat_channels");
  }
  const std::size_t P = parts.front().value().size() / base.back();
  Shape ys = base;
  ys.back() = total;
  Tensor<T> y(ys);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const std::size_t w = widths[k];
    const T* src = parts[k].value().data();
    for (std::size_t p = 0; p < P; ++p)
      std::copy(src + p * w, src + (p + 1) * w, y.data() + p * total + off);
    off += w;
  }
  return ad::make_result<T>(std::move(y), parts,
                            [P, total, widths](ad::Node<T>& n) {
                              std::size_t off = 0;
                              for (std::size_t k = 0; k < widths.size(); ++k) {
                                const std::size_t w = widths[k];
                                auto& p = n.parents[k];
                                if (p->requires_grad) {
                                  auto& g = p->grad_buffer();
                                  for (std::size_t q = 0; q < P; ++q)
                                    for (std::size_t c = 0; c < w; ++c)
                                      g[q * w + c] += n.grad[q * total + off + c];
                                }
                                off += w;
                              }
                            });
}

template <typename T>
Var<T> mean_all(const Var<T>& x) {
  T acc{};
  for (T v : x.value().values()) acc += v;
  const T inv = T(1) / static_cast<T>(x.value().size());
  return ad::make_result<T>(Tensor<T>::scalar(acc * inv), {x},
                            [inv](ad::Node<T>& n) {
                              auto& g = n.parents[0]->grad_buffer();
                              const T gy = n.grad[0] * inv;
                              for (auto& v : g.values()) v += gy;
                            });
}

/// Quotient of two scalars.
template <typename T>
Var<T> div_scalar(const Var<T>& a, const Var<T>& b) {
  const T av = a.value().item(), bv = b.value().item();
  return ad::make_result<T>(Tensor<T>::scalar(av / bv), {a, b},
                            [](ad::Node<T>& n) {
                              const T av = n.parents[0]->value.item();
                              const T bv = n.parents[1]->value.item();
                              if (n.parents[0]->requires_grad)
                                n.parents[0]->grad_buffer()[0] += n.grad[0] / bv;
                              if (n.parents[1]->requires_grad)
                                n.parents[1]->grad_buffer()[0] -=
                                    n.grad[0] * av / (bv * bv);
                            });
}

/// log(1 + exp(x)), elementwise.
template <typename T>
Var<T> softplus(const Var<T>& x) {
  Tensor<T> y = x.value();
  for (auto& v : y.values())
    v = v > T(30) ? v : static_cast<T>(std::log1p(std::exp(static_cast<double>(v))));
  return ad::make_result<T>(std::move(y), {x}, [](ad::Node<T>& n) {
    auto& p = n.parents[0];
    auto& g = p->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = static_cast<double>(p->value[i]);
      g[i] += n.grad[i] * static_cast<T>(1.0 / (1.0 + std::exp(-v)));
    }
  });
}

inline double softplus_inverse(double y) { return std::log(std::expm1(y)); }

// ---------------------------------------------------------------------------
// Convolution over one 2D plane of a [u,v,s,t,c] field.

namespace detail {

struct ConvGeometry {
  std::array<std::size_t, 4> ext;     // grid extent (u, v, s, t)
  std::array<std::size_t, 4> stride;  // grid strides in positions
  std::size_t row_axis, col_axis;
  std::size_t kh, kw;
  std::size_t cin, cout;

  ConvGeometry(const Dims5& d, Plane plane, std::size_t kh_, std::size_t kw_,
               std::size_t cin_, std::size_t cout_)
      : ext{d.u, d.v, d.s, d.t},
        stride{d.v * d.s * d.t, d.s * d.t, d.t, 1},
        kh(kh_), kw(kw_), cin(cin_), cout(cout_) {
    const auto axes = plane_axes(plane);
    row_axis = axes[2];
    col_axis = axes[3];
  }
};

// Calls fn(p, tap, q) for every output position p and every kernel tap whose
// source position q lies inside the grid. Taps are visited in row-major
// kernel order.
template <typename Fn>
void for_each_tap(const ConvGeometry& g, Fn&& fn) {
  const std::ptrdiff_t rh = static_cast<std::ptrdiff_t>(g.kh / 2);
  const std::ptrdiff_t rw = static_cast<std::ptrdiff_t>(g.kw / 2);
  const auto er = static_cast<std::ptrdiff_t>(g.ext[g.row_axis]);
  const auto ec = static_cast<std::ptrdiff_t>(g.ext[g.col_axis]);
  const auto sr = static_cast<std::ptrdiff_t>(g.stride[g.row_axis]);
  const auto sc = static_cast<std::ptrdiff_t>(g.stride[g.col_axis]);
  std::array<std::size_t, 4> coord{};
  std::size_t p = 0;
  for (coord[0] = 0; coord[0] < g.ext[0]; ++coord[0])
    for (coord[1] = 0; coord[1] < g.ext[1]; ++coord[1])
      for (coord[2] = 0; coord[2] < g.ext[2]; ++coord[2])
        for (coord[3] = 0; coord[3] < g.ext[3]; ++coord[3], ++p) {
          const auto cr = static_cast<std::ptrdiff_t>(coord[g.row_axis]);
          const auto cc = static_cast<std::ptrdiff_t>(coord[g.col_axis]);
          std::size_t tap = 0;
          for (std::ptrdiff_t a = -rh; a <= rh; ++a) {
            const bool row_ok = cr + a >= 0 && cr + a < er;
            for (std::ptrdiff_t b = -rw; b <= rw; ++b, ++tap) {
              if (!row_ok || cc + b < 0 || cc + b >= ec) continue;
              const auto q = static_cast<std::size_t>(
                  static_cast<std::ptrdiff_t>(p) + a * sr + b * sc);
              fn(p, tap, q);
            }
          }
        }
}

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::size_t positions_of(const ConvGeometry& g) {
  return g.ext[0] * g.ext[1] * g.ext[2] * g.ext[3];
}

// Patch matrix [positions, kh*kw*cin], zero where a tap leaves the grid.
template <typename T>
RowMatrix<T> im2col(const ConvGeometry& g, const T* x) {
  const std::size_t taps = g.kh * g.kw;
  const std::size_t k = taps * g.cin;
  RowMatrix<T> col = RowMatrix<T>::Zero(static_cast<Eigen::Index>(positions_of(g)),
                                        static_cast<Eigen::Index>(k));
  T* out = col.data();
  for_each_tap(g, [&](std::size_t p, std::size_t tap, std::size_t q) {
    std::copy(x + q * g.cin, x + (q + 1) * g.cin, out + p * k + tap * g.cin);
  });
  return col;
}

template <typename T>
void conv_forward(const ConvGeometry& g, const T* x, const T* w, const T* b, T* y) {
  using Map = Eigen::Map<RowMatrix<T>>;
  using CMap = Eigen::Map<const RowMatrix<T>>;
  const auto n = static_cast<Eigen::Index>(positions_of(g));
  const auto k = static_cast<Eigen::Index>(g.kh * g.kw * g.cin);
  const auto co = static_cast<Eigen::Index>(g.cout);
  Map out(y, n, co);
  const Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bias(b, co);
  out.rowwise() = bias;
  const CMap wm(w, k, co);
  if (g.kh * g.kw == 1) {
    out.noalias() += CMap(x, n, k) * wm;
  } else {
    out.noalias() += im2col(g, x) * wm;
  }
}

template <typename T>
void conv_backward(const ConvGeometry& g, const T* x, const T* w, const T* gy, T* gx,
                   T* gw, T* gb) {
  using Map = Eigen::Map<RowMatrix<T>>;
  using CMap = Eigen::Map<const RowMatrix<T>>;
  const auto n = static_cast<Eigen::Index>(positions_of(g));
  const auto k = static_cast<Eigen::Index>(g.kh * g.kw * g.cin);
  const auto co = static_cast<Eigen::Index>(g.cout);
  const CMap gym(gy, n, co);
  if (gb) {
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(gb, co) += gym.colwise().sum();
  }
  const bool pointwise = g.kh * g.kw == 1;
  if (gw) {
    if (pointwise) {
      Map(gw, k, co).noalias() += CMap(x, n, k).transpose() * gym;
    } else {
      Map(gw, k, co).noalias() += im2col(g, x).transpose() * gym;
    }
  }
  if (gx) {
    const CMap wm(w, k, co);
    if (pointwise) {
      Map(gx, n, k).noalias() += gym * wm.transpose();
    } else {
      const RowMatrix<T> gcol = gym * wm.transpose();
      const T* src = gcol.data();
      const std::size_t kk = static_cast<std::size_t>(k);
      for_each_tap(g, [&](std::size_t p, std::size_t tap, std::size_t q) {
        const T* s = src + p * kk + tap * g.cin;
        T* d = gx + q * g.cin;
        for (std::size_t i = 0; i < g.cin; ++i) d[i] += s[i];
      });
    }
  }
}

}  // namespace detail

/// Zero-padded, stride-1, size-preserving convolution over `plane`.
///
/// x: [U,V,S,T,cin], weight: [kh,kw,cin,cout] (odd kh, kw; cross-correlation,
/// kernel row runs along the plane's row axis), bias: [cout].
template <typename T>
Var<T> conv_plane(const Var<T>& x, const Var<T>& weight, const Var<T>& bias,
                  Plane plane) {
  const Dims5 d = x.value().dims5();
  const Shape& ws = weight.shape();
  if (ws.size() != 4 || ws[0] % 2 == 0 || ws[1] % 2 == 0) {
    throw ShapeError("conv weight must be [kh,kw,cin,cout] with odd kernel, got " +
                     shape_str(ws));
  }
  if (ws[2] != d.c) {
    throw ShapeError("conv expects " + std::to_string(ws[2]) +
                     " input channels, got " + std::to_string(d.c));
  }
  if (bias.shape() != Shape{ws[3]}) throw ShapeError("conv bias shape mismatch");
  const detail::ConvGeometry geo(d, plane, ws[0], ws[1], ws[2], ws[3]);
  Dims5 od = d;
  od.c = ws[3];
  Tensor<T> y(od);
  detail::conv_forward(geo, x.value().data(), weight.value().data(),
                       bias.value().data(), y.data());
  return ad::make_result<T>(std::move(y), {x, weight, bias}, [geo](ad::Node<T>& n) {
    auto& px = n.parents[0];
    auto& pw = n.parents[1];
    auto& pb = n.parents[2];
    detail::conv_backward(geo, px->value.data(), pw->value.data(), n.grad.data(),
                          px->requires_grad ? px->grad_buffer().data() : nullptr,
                          pw->requires_grad ? pw->grad_buffer().data() : nullptr,
                          pb->requires_grad ? pb->grad_buffer().data() : nullptr);
  });
}

// ---------------------------------------------------------------------------
// View aggregation

/// sum_i beta_i * x[view i] -> [1,1,S,T,C].
template <typename T>
Var<T> ray_fuse(const Var<T>& x, const Var<T>& beta) {
  const Dims5 d = x.value().dims5();
  if (beta.value().size() != d.views()) {
    throw ShapeError("ray fusion needs " + std::to_string(d.views()) +
                     " weights, got " + std::to_string(beta.value().size()));
  }
  const std::size_t block = d.s * d.t * d.c;
  Tensor<T> y(Dims5{1, 1, d.s, d.t, d.c});
  for (std::size_t i = 0; i < d.views(); ++i) {
    const T bi = beta.value()[i];
    const T* src = x.value().data() + i * block;
    for (std::size_t k = 0; k < block; ++k) y[k] += bi * src[k];
  }
  return ad::make_result<T>(std::move(y), {x, beta}, [d, block](ad::Node<T>& n) {
    auto& px = n.parents[0];
    auto& pb = n.parents[1];
    for (std::size_t i = 0; i < d.views(); ++i) {
      if (px->requires_grad) {
        T* gx = px->grad_buffer().data() + i * block;
        const T bi = pb->value[i];
        for (std::size_t k = 0; k < block; ++k) gx[k] += bi * n.grad[k];
      }
      if (pb->requires_grad) {
        const T* src = px->value.data() + i * block;
        T acc{};
        for (std::size_t k = 0; k < block; ++k) acc += src[k] * n.grad[k];
        pb->grad_buffer()[i] += acc;
      }
    }
  });
}

/// Repeats a [1,1,S,T,C] field to every view of a U x V grid.
template <typename T>
Var<T> broadcast_views(const Var<T>& y1, std::size_t U, std::size_t V) {
  const Dims5 d = y1.value().dims5();
  if (d.u != 1 || d.v != 1) throw ShapeError("broadcast_views needs a single view");
  const std::size_t block = d.s * d.t * d.c;
  Tensor<T> y(Dims5{U, V, d.s, d.t, d.c});
  for (std::size_t i = 0; i < U * V; ++i)
    std::copy(y1.value().data(), y1.value().data() + block, y.data() + i * block);
  return ad::make_result<T>(std::move(y), {y1}, [U, V, block](ad::Node<T>& n) {
    auto& g = n.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < U * V; ++i)
      for (std::size_t k = 0; k < block; ++k) g[k] += n.grad[i * block + k];
  });
}

// ---------------------------------------------------------------------------
// Losses

/// mean |x - target| over all elements.
template <typename T>
Var<T> l1_mean(const Var<T>& x, const Tensor<T>& target) {
  require_same_shape(x.shape(), target.shape(), "l1_mean");
  double acc = 0.0;
  const bool rec = ad::branch_recording();
  for (std::size_t i = 0; i < target.size(); ++i) {
    const T diff = x.value()[i] - target[i];
    if (rec) ad::record_branch(diff > T(0) ? 2 : (diff < T(0) ? 0 : 1));
    acc += std::abs(static_cast<double>(diff));
  }
  const T inv = T(1) / static_cast<T>(target.size());
  return ad::make_result<T>(
      Tensor<T>::scalar(static_cast<T>(acc) * inv), {x},
      [inv, target](ad::Node<T>& n) {
        auto& p = n.parents[0];
        auto& g = p->grad_buffer();
        const T gy = n.grad[0] * inv;
        for (std::size_t i = 0; i < g.size(); ++i) {
          const T diff = p->value[i] - target[i];
          g[i] += diff > T(0) ? gy : (diff < T(0) ? -gy : T(0));
        }
      });
}

/// Standard SSIM constants: 11-tap Gaussian window with sigma 1.5,
/// K1 = 0.01, K2 = 0.03, dynamic range 1.
struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double range = 1.0;
};

namespace detail {

// Gaussian filter along one axis, renormalised over the in-bounds taps so a
// constant image stays constant up to the border.
class SsimFilter {
 public:
  SsimFilter(const SsimParams& p, std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), radius_(p.window / 2) {
    taps_.resize(static_cast<std::size_t>(p.window));
    double sum = 0.0;
    for (int k = -radius_; k <= radius_; ++k) {
      const double v = std::exp(-0.5 * k * k / (p.sigma * p.sigma));
      taps_[static_cast<std::size_t>(k + radius_)] = v;
      sum += v;
    }
    for (auto& v : taps_) v /= sum;
    zr_ = norms(rows);
    zc_ = norms(cols);
  }

  void apply(const std::vector<double>& in, std::vector<double>& out) const {
    std::vector<double> tmp(in.size());
    pass(in, tmp, true, false);
    pass(tmp, out, false, false);
  }

  void apply_transpose(const std::vector<double>& in,
                       std::vector<double>& out) const {
    std::vector<double> tmp(in.size());
    pass(in, tmp, true, true);
    pass(tmp, out, false, true);
  }

 private:
  std::vector<double> norms(std::size_t n) const {
    std::vector<double> z(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (int k = -radius_; k <= radius_; ++k) {
        const auto j = static_cast<std::ptrdiff_t>(i) + k;
        if (j >= 0 && j < static_cast<std::ptrdiff_t>(n))
          z[i] += taps_[static_cast<std::size_t>(k + radius_)];
      }
    return z;
  }

  // Forward: out[i] = sum_k g[k] in[i+k] / z[i]. Transpose: out[j] = sum_k
  // g[k] in[j-k] / z[j-k].
  void pass(const std::vector<double>& in, std::vector<double>& out,
            bool along_rows, bool transpose) const {
    const std::size_t n = along_rows ? rows_ : cols_;
    const auto& z = along_rows ? zr_ : zc_;
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) {
        const std::size_t i = along_rows ? r : c;
        double acc = 0.0;
        for (int k = -radius_; k <= radius_; ++k) {
          const auto j = static_cast<std::ptrdiff_t>(i) + (transpose ? -k : k);
          if (j < 0 || j >= static_cast<std::ptrdiff_t>(n)) continue;
          const std::size_t rr = along_rows ? static_cast<std::size_t>(j) : r;
          const std::size_t cc = along_rows ? c : static_cast<std::size_t>(j);
          const double w = taps_[static_cast<std::size_t>(k + radius_)];
          acc += transpose ? w * in[rr * cols_ + cc] / z[static_cast<std::size_t>(j)]
                           : w * in[rr * cols_ + cc];
        }
        out[r * cols_ + c] = transpose ? acc : acc / z[i];
      }
  }

  std::size_t rows_, cols_;
  int radius_;
  std::vector<double> taps_;
  std::vector<double> zr_, zc_;
};

// Mean SSIM of one plane; optionally the gradient with respect to x.
inline double ssim_plane(const std::vector<double>& x,
                         const std::vector<double>& y, std::size_t rows,
                         std::size_t cols, const SsimParams& p,
                         std::vector<double>* grad_x) {
  const SsimFilter filt(p, rows, cols);
  const std::size_t n = rows * cols;
  std::vector<double> xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  std::vector<double> mx(n), my(n), sxx(n), syy(n), sxy(n);
  filt.apply(x, mx);
  filt.apply(y, my);
  filt.apply(xx, sxx);
  filt.apply(yy, syy);
  filt.apply(xy, sxy);
  const double c1 = std::pow(p.k1 * p.range, 2);
  const double c2 = std::pow(p.k2 * p.range, 2);
  std::vector<double> dmx, dsxx, dsxy;
  if (grad_x) {
    dmx.resize(n);
    dsxx.resize(n);
    dsxy.resize(n);
  }
  double total = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cxy = sxy[i] - mx[i] * my[i];
    const double a1 = 2 * mx[i] * my[i] + c1, a2 = 2 * cxy + c2;
    const double b1 = mx[i] * mx[i] + my[i] * my[i] + c1, b2 = vx + vy + c2;
    const double f = a1 * a2 / (b1 * b2);
    total += f;
    if (grad_x) {
      dmx[i] = inv_n * ((2 * my[i] * a2 - 2 * my[i] * a1) / (b1 * b2) -
                        f * (2 * mx[i] / b1 - 2 * mx[i] / b2));
      dsxx[i] = inv_n * (-f / b2);
      dsxy[i] = inv_n * (2 * a1 / (b1 * b2));
    }
  }
  if (grad_x) {
    std::vector<double> t1(n), t2(n), t3(n);
    filt.apply_transpose(dmx, t1);
    filt.apply_transpose(dsxx, t2);
    filt.apply_transpose(dsxy, t3);
    grad_x->resize(n);
    for (std::size_t i = 0; i < n; ++i)
      (*grad_x)[i] = t1[i] + 2 * x[i] * t2[i] + y[i] * t3[i];
  }
  return total / static_cast<double>(n);
}

// Mean SSIM over every (view, channel) plane of two [U,V,S,T,C] arrays.
template <typename T>
double ssim_fields(const Tensor<T>& a, const Tensor<T>& b, const SsimParams& p,
                   std::type_identity_t<Tensor<T>>* grad_a) {
  require_same_shape(a.shape(), b.shape(), "ssim");
  const Dims5 d = a.dims5();
  const std::size_t plane = d.s * d.t;
  std::vector<double> xa(plane), xb(plane), g;
  double total = 0.0;
  const double planes = static_cast<double>(d.views() * d.c);
  for (std::size_t view = 0; view < d.views(); ++view) {
    for (std::size_t c = 0; c < d.c; ++c) {
      const std::size_t base = view * plane * d.c + c;
      for (std::size_t k = 0; k < plane; ++k) {
        xa[k] = static_cast<double>(a[base + k * d.c]);
        xb[k] = static_cast<double>(b[base + k * d.c]);
      }
      total += ssim_plane(xa, xb, d.s, d.t, p, grad_a ? &g : nullptr);
      if (grad_a) {
        for (std::size_t k = 0; k < plane; ++k)
          (*grad_a)[base + k * d.c] += static_cast<T>(g[k] / planes);
      }
    }
  }
  return total / planes;
}

}  // namespace detail

/// Differentiable mean SSIM between x and a fixed target, averaged over views
/// and channels.
template <typename T>
Var<T> ssim_mean(const Var<T>& x, const Tensor<T>& target,
                 const SsimParams& p = {}) {
  const double s = detail::ssim_fields(x.value(), target, p, nullptr);
  return ad::make_result<T>(Tensor<T>::scalar(static_cast<T>(s)), {x},
                            [target, p](ad::Node<T>& n) {
                              auto& px = n.parents[0];
                              Tensor<T> g(px->value.shape());
                              detail::ssim_fields(px->value, target, p, &g);
                              auto& acc = px->grad_buffer();
                              for (std::size_t i = 0; i < g.size(); ++i)
                                acc[i] += n.grad[0] * g[i];
                            });
}

}  // namespace lfdcu::ops
