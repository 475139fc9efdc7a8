#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "pfkd/errors.hpp"
#include "pfkd/rng.hpp"
#include "pfkd/tensor.hpp"

// Reverse-mode primitives. Each op computes its value eagerly and, when a
// tape is active and an operand tracks gradients, records a closure that
// accumulates d(loss)/d(input) from d(loss)/d(output). Accumulation orders
// are fixed (plain ascending loops), so identical inputs and seeds replay to
// bitwise-identical values and gradients.

namespace pfkd {

// ---------------------------------------------------------------------------
// Small GEMM kernels, deterministic accumulation order.
// ---------------------------------------------------------------------------

// C[M,N] += A[M,K] * B[K,N]
template <typename T>
inline void gemm_acc_nn(std::int64_t m, std::int64_t n, std::int64_t k,
                        const T* a, const T* b, T* c) {
  for (std::int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (std::int64_t p = 0; p < k; ++p) {
      const T aip = arow[p];
      const T* brow = b + p * n;
      for (std::int64_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// C[M,N] += A[M,K] * B[N,K]^T
template <typename T>
inline void gemm_acc_nt(std::int64_t m, std::int64_t n, std::int64_t k,
                        const T* a, const T* b, T* c) {
  for (std::int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (std::int64_t j = 0; j < n; ++j) {
      const T* brow = b + j * k;
      T acc = T(0);
      for (std::int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C[M,N] += A[K,M]^T * B[K,N]
template <typename T>
inline void gemm_acc_tn(std::int64_t m, std::int64_t n, std::int64_t k,
                        const T* a, const T* b, T* c) {
  for (std::int64_t p = 0; p < k; ++p) {
    const T* arow = a + p * m;
    const T* brow = b + p * n;
    for (std::int64_t i = 0; i < m; ++i) {
      const T api = arow[i];
      T* crow = c + i * n;
      for (std::int64_t j = 0; j < n; ++j) crow[j] += api * brow[j];
    }
  }
}

namespace detail {

// Suffix broadcast: b may either match a's shape exactly or match a trailing
// run of a's extents, in which case it repeats cyclically over the flat data.
template <typename T>
inline void check_suffix_broadcast(const Tensor<T>& a, const Tensor<T>& b) {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (bs.size() > as.size())
    throw std::invalid_argument("broadcast operand rank exceeds target rank");
  const std::size_t off = as.size() - bs.size();
  for (std::size_t i = 0; i < bs.size(); ++i)
    if (bs[i] != as[off + i])
      throw std::invalid_argument("shape mismatch: " + shape_str(as) + " vs " + shape_str(bs));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_suffix_broadcast(a, b);
  Tensor<T> out(a.shape());
  const std::int64_t n = a.size(), bn = b.size();
  const T* av = a.data();
  const T* bv = b.data();
  T* ov = out.data();
  for (std::int64_t i = 0; i < n; ++i) ov[i] = av[i] + bv[i % bn];
  if (detail::tracking<T>({&a, &b})) {
    auto A = a.impl(), B = b.impl(), O = out.impl();
    current_tape<T>()->record({O}, [A, B, O, n, bn] {
      if (A->requires_grad)
        for (std::int64_t i = 0; i < n; ++i) A->g[i] += O->g[i];
      if (B->requires_grad)
        for (std::int64_t i = 0; i < n; ++i) B->g[i % bn] += O->g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_suffix_broadcast(a, b);
  Tensor<T> out(a.shape());
  const std::int64_t n = a.size(), bn = b.size();
  const T* av = a.data();
  const T* bv = b.data();
  T* ov = out.data();
  for (std::int64_t i = 0; i < n; ++i) ov[i] = av[i] - bv[i % bn];
  if (detail::tracking<T>({&a, &b})) {
    auto A = a.impl(), B = b.impl(), O = out.impl();
    current_tape<T>()->record({O}, [A, B, O, n, bn] {
      if (A->requires_grad)
        for (std::int64_t i = 0; i < n; ++i) A->g[i] += O->g[i];
      if (B->requires_grad)
        for (std::int64_t i = 0; i < n; ++i) B->g[i % bn] -= O->g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_suffix_broadcast(a, b);
  Tensor<T> out(a.shape());
  const std::int64_t n = a.size(), bn = b.size();
  const T* av = a.data();
  const T* bv = b.data();
  T* ov = out.data();
  for (std::int64_t i = 0; i < n; ++i) ov[i] = av[i] * bv[i % bn];
  if (detail::tracking<T>({&a, &b})) {
    auto A = a.impl(), B = b.impl(), O = out.impl();
    current_tape<T>()->record({O}, [A, B, O, n, bn] {
      if (A->requires_grad)
        for (std::int64_t i = 0; i < n; ++i) A->g[i] += O->g[i] * B->v[i % bn];
      if (B->requires_grad)
        for (std::int64_t i = 0; i < n; ++i) B->g[i % bn] += O->g[i] * A->v[i];
    });
  }
  return out;
}

// out = scale * x + shift, elementwise with scalar coefficients.
template <typename T>
Tensor<T> affine(const Tensor<T>& x, T scale, T shift) {
  Tensor<T> out(x.shape());
  const std::int64_t n = x.size();
  const T* xv = x.data();
  T* ov = out.data();
  for (std::int64_t i = 0; i < n; ++i) ov[i] = scale * xv[i] + shift;
  if (detail::tracking<T>({&x})) {
    auto X = x.impl(), O = out.impl();
    current_tape<T>()->record({O}, [X, O, n, scale] {
      if (X->requires_grad)
        for (std::int64_t i = 0; i < n; ++i) X->g[i] += scale * O->g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  const std::int64_t n = x.size();
  const T* xv = x.data();
  T* ov = out.data();
  for (std::int64_t i = 0; i < n; ++i) ov[i] = std::log(xv[i]);
  if (detail::tracking<T>({&x})) {
    auto X = x.impl(), O = out.impl();
    current_tape<T>()->record({O}, [X, O, n] {
      if (X->requires_grad)
        for (std::int64_t i = 0; i < n; ++i) X->g[i] += O->g[i] / X->v[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  const std::int64_t n = x.size();
  const T* xv = x.data();
  T* ov = out.data();
  for (std::int64_t i = 0; i < n; ++i) ov[i] = std::exp(xv[i]);
  if (detail::tracking<T>({&x})) {
    auto X = x.impl(), O = out.impl();
    current_tape<T>()->record({O}, [X, O, n] {
      if (X->requires_grad)
        for (std::int64_t i = 0; i < n; ++i) X->g[i] += O->g[i] * O->v[i];
    });
  }
  return out;
}

// x^p for real p; inputs must stay in the domain where the power is smooth.
template <typename T>
Tensor<T> pow_scalar(const Tensor<T>& x, T p) {
  Tensor<T> out(x.shape());
  const std::int64_t n = x.size();
  const T* xv = x.data();
  T* ov = out.data();
  for (std::int64_t i = 0; i < n; ++i) ov[i] = std::pow(xv[i], p);
  if (detail::tracking<T>({&x})) {
    auto X = x.impl(), O = out.impl();
    current_tape<T>()->record({O}, [X, O, n, p] {
      if (X->requires_grad)
        for (std::int64_t i = 0; i < n; ++i)
          X->g[i] += O->g[i] * p * std::pow(X->v[i], p - T(1));
    });
  }
  return out;
}

// max(x, floor); the gradient passes only where x > floor.
template <typename T>
Tensor<T> clamp_min(const Tensor<T>& x, T floor_value) {
  Tensor<T> out(x.shape());
  const std::int64_t n = x.size();
  const T* xv = x.data();
  T* ov = out.data();
  for (std::int64_t i = 0; i < n; ++i) ov[i] = xv[i] < floor_value ? floor_value : xv[i];
  if (detail::tracking<T>({&x})) {
    auto X = x.impl(), O = out.impl();
    current_tape<T>()->record({O}, [X, O, n, floor_value] {
      if (X->requires_grad)
        for (std::int64_t i = 0; i < n; ++i)
          if (X->v[i] > floor_value) X->g[i] += O->g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  const std::int64_t n = x.size();
  const T* xv = x.data();
  T* ov = out.data();
  const T inv_sqrt2 = T(1) / std::sqrt(T(2));
  for (std::int64_t i = 0; i < n; ++i)
    ov[i] = T(0.5) * xv[i] * (T(1) + std::erf(xv[i] * inv_sqrt2));
  if (detail::tracking<T>({&x})) {
    auto X = x.impl(), O = out.impl();
    current_tape<T>()->record({O}, [X, O, n, inv_sqrt2] {
      if (!X->requires_grad) return;
      const T inv_sqrt2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
      for (std::int64_t i = 0; i < n; ++i) {
        const T v = X->v[i];
        const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
        const T pdf = inv_sqrt2pi * std::exp(T(-0.5) * v * v);
        X->g[i] += O->g[i] * (cdf + v * pdf);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Matrix products
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw std::invalid_argument("matmul expects [M,K] x [K,N], got " + shape_str(a.shape()) +
                                " x " + shape_str(b.shape()));
  const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> out({m, n});
  gemm_acc_nn(m, n, k, a.data(), b.data(), out.data());
  if (detail::tracking<T>({&a, &b})) {
    auto A = a.impl(), B = b.impl(), O = out.impl();
    current_tape<T>()->record({O}, [A, B, O, m, n, k] {
      if (A->requires_grad) gemm_acc_nt(m, k, n, O->g.data(), B->v.data(), A->g.data());
      if (B->requires_grad) gemm_acc_tn(k, n, m, A->v.data(), O->g.data(), B->g.data());
    });
  }
  return out;
}

// Batched matmul over a leading group axis. With transpose_b, b is [G,N,K].
template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool transpose_b = false) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0))
    throw std::invalid_argument("bmm expects matching [G,...] operands");
  const std::int64_t g = a.dim(0), m = a.dim(1), k = a.dim(2);
  const std::int64_t n = transpose_b ? b.dim(1) : b.dim(2);
  const std::int64_t bk = transpose_b ? b.dim(2) : b.dim(1);
  if (bk != k) throw std::invalid_argument("bmm inner extents differ");
  Tensor<T> out({g, m, n});
  const std::int64_t as = m * k, bs = b.dim(1) * b.dim(2), os = m * n;
  for (std::int64_t i = 0; i < g; ++i) {
    if (transpose_b)
      gemm_acc_nt(m, n, k, a.data() + i * as, b.data() + i * bs, out.data() + i * os);
    else
      gemm_acc_nn(m, n, k, a.data() + i * as, b.data() + i * bs, out.data() + i * os);
  }
  if (detail::tracking<T>({&a, &b})) {
    auto A = a.impl(), B = b.impl(), O = out.impl();
    current_tape<T>()->record({O}, [A, B, O, g, m, n, k, as, bs, os, transpose_b] {
      for (std::int64_t i = 0; i < g; ++i) {
        const T* og = O->g.data() + i * os;
        if (A->requires_grad) {
          // dA = dO * B (nt when B untransposed, nn when transposed)
          if (transpose_b)
            gemm_acc_nn(m, k, n, og, B->v.data() + i * bs, A->g.data() + i * as);
          else
            gemm_acc_nt(m, k, n, og, B->v.data() + i * bs, A->g.data() + i * as);
        }
        if (B->requires_grad) {
          if (transpose_b)
            gemm_acc_tn(n, k, m, og, A->v.data() + i * as, B->g.data() + i * bs);
          else
            gemm_acc_tn(k, n, m, A->v.data() + i * as, og, B->g.data() + i * bs);
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Layout ops (all explicit copies; backward applies the inverse index map)
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.size())
    throw std::invalid_argument("reshape cannot change element count");
  Tensor<T> out = Tensor<T>::from(std::move(new_shape),
                                  std::vector<T>(x.values().begin(), x.values().end()));
  if (detail::tracking<T>({&x})) {
    auto X = x.impl(), O = out.impl();
    const std::int64_t n = x.size();
    current_tape<T>()->record({O}, [X, O, n] {
      if (X->requires_grad)
        for (std::int64_t i = 0; i < n; ++i) X->g[i] += O->g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b, std::int64_t axis) {
  if (a.rank() != b.rank()) throw std::invalid_argument("concat rank mismatch");
  for (std::int64_t i = 0; i < a.rank(); ++i)
    if (i != axis && a.dim(i) != b.dim(i))
      throw std::invalid_argument("concat extents differ off the concat axis");
  Shape os = a.shape();
  os[static_cast<std::size_t>(axis)] += b.dim(axis);
  std::int64_t outer = 1, inner = 1;
  for (std::int64_t i = 0; i < axis; ++i) outer *= a.dim(i);
  for (std::int64_t i = axis + 1; i < a.rank(); ++i) inner *= a.dim(i);
  const std::int64_t ablk = a.dim(axis) * inner, bblk = b.dim(axis) * inner;
  Tensor<T> out(os);
  T* ov = out.data();
  const T* av = a.data();
  const T* bv = b.data();
  for (std::int64_t o = 0; o < outer; ++o) {
    std::copy(av + o * ablk, av + (o + 1) * ablk, ov + o * (ablk + bblk));
    std::copy(bv + o * bblk, bv + (o + 1) * bblk, ov + o * (ablk + bblk) + ablk);
  }
  if (detail::tracking<T>({&a, &b})) {
    auto A = a.impl(), B = b.impl(), O = out.impl();
    current_tape<T>()->record({O}, [A, B, O, outer, ablk, bblk] {
      for (std::int64_t o = 0; o < outer; ++o) {
        const T* og = O->g.data() + o * (ablk + bblk);
        if (A->requires_grad)
          for (std::int64_t i = 0; i < ablk; ++i) A->g[o * ablk + i] += og[i];
        if (B->requires_grad)
          for (std::int64_t i = 0; i < bblk; ++i) B->g[o * bblk + i] += og[ablk + i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::int64_t axis, std::int64_t start, std::int64_t len) {
  if (axis < 0 || axis >= x.rank() || start < 0 || len <= 0 || start + len > x.dim(axis))
    throw std::invalid_argument("slice bounds out of range");
  Shape os = x.shape();
  os[static_cast<std::size_t>(axis)] = len;
  std::int64_t outer = 1, inner = 1;
  for (std::int64_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::int64_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const std::int64_t xblk = x.dim(axis) * inner, oblk = len * inner;
  Tensor<T> out(os);
  T* ov = out.data();
  const T* xv = x.data();
  for (std::int64_t o = 0; o < outer; ++o)
    std::copy(xv + o * xblk + start * inner, xv + o * xblk + (start + len) * inner, ov + o * oblk);
  if (detail::tracking<T>({&x})) {
    auto X = x.impl(), O = out.impl();
    current_tape<T>()->record({O}, [X, O, outer, xblk, oblk, start, inner] {
      if (!X->requires_grad) return;
      for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t i = 0; i < oblk; ++i)
          X->g[o * xblk + start * inner + i] += O->g[o * oblk + i];
    });
  }
  return out;
}

// Tile x along a fresh leading axis of extent `lead`.
template <typename T>
Tensor<T> broadcast_leading(const Tensor<T>& x, std::int64_t lead) {
  Shape os;
  os.push_back(lead);
  for (auto d : x.shape()) os.push_back(d);
  Tensor<T> out(os);
  const std::int64_t n = x.size();
  for (std::int64_t o = 0; o < lead; ++o)
    std::copy(x.data(), x.data() + n, out.data() + o * n);
  if (detail::tracking<T>({&x})) {
    auto X = x.impl(), O = out.impl();
    current_tape<T>()->record({O}, [X, O, lead, n] {
      if (!X->requires_grad) return;
      for (std::int64_t o = 0; o < lead; ++o)
        for (std::int64_t i = 0; i < n; ++i) X->g[i] += O->g[o * n + i];
    });
  }
  return out;
}

// [B,T,H*Dh] -> [B*H,T,Dh], grouping the per-head columns.
template <typename T>
Tensor<T> split_heads(const Tensor<T>& x, std::int64_t heads) {
  if (x.rank() != 3 || x.dim(2) % heads != 0)
    throw std::invalid_argument("split_heads requires [B,T,H*Dh]");
  const std::int64_t b = x.dim(0), t = x.dim(1), dh = x.dim(2) / heads;
  Tensor<T> out({b * heads, t, dh});
  const T* xv = x.data();
  T* ov = out.data();
  for (std::int64_t bi = 0; bi < b; ++bi)
    for (std::int64_t h = 0; h < heads; ++h)
      for (std::int64_t ti = 0; ti < t; ++ti)
        std::copy(xv + (bi * t + ti) * heads * dh + h * dh,
                  xv + (bi * t + ti) * heads * dh + (h + 1) * dh,
                  ov + ((bi * heads + h) * t + ti) * dh);
  if (detail::tracking<T>({&x})) {
    auto X = x.impl(), O = out.impl();
    current_tape<T>()->record({O}, [X, O, b, t, heads, dh] {
      if (!X->requires_grad) return;
      for (std::int64_t bi = 0; bi < b; ++bi)
        for (std::int64_t h = 0; h < heads; ++h)
          for (std::int64_t ti = 0; ti < t; ++ti)
            for (std::int64_t d = 0; d < dh; ++d)
              X->g[(bi * t + ti) * heads * dh + h * dh + d] +=
                  O->g[((bi * heads + h) * t + ti) * dh + d];
    });
  }
  return out;
}

// [B*H,T,Dh] -> [B,T,H*Dh], inverse of split_heads.
template <typename T>
Tensor<T> merge_heads(const Tensor<T>& x, std::int64_t heads) {
  if (x.rank() != 3 || x.dim(0) % heads != 0)
    throw std::invalid_argument("merge_heads requires [B*H,T,Dh]");
  const std::int64_t b = x.dim(0) / heads, t = x.dim(1), dh = x.dim(2);
  Tensor<T> out({b, t, heads * dh});
  const T* xv = x.data();
  T* ov = out.data();
  for (std::int64_t bi = 0; bi < b; ++bi)
    for (std::int64_t h = 0; h < heads; ++h)
      for (std::int64_t ti = 0; ti < t; ++ti)
        std::copy(xv + ((bi * heads + h) * t + ti) * dh,
                  xv + ((bi * heads + h) * t + ti + 1) * dh,
                  ov + (bi * t + ti) * heads * dh + h * dh);
  if (detail::tracking<T>({&x})) {
    auto X = x.impl(), O = out.impl();
    current_tape<T>()->record({O}, [X, O, b, t, heads, dh] {
      if (!X->requires_grad) return;
      for (std::int64_t bi = 0; bi < b; ++bi)
        for (std::int64_t h = 0; h < heads; ++h)
          for (std::int64_t ti = 0; ti < t; ++ti)
            for (std::int64_t d = 0; d < dh; ++d)
              X->g[((bi * heads + h) * t + ti) * dh + d] +=
                  O->g[(bi * t + ti) * heads * dh + h * dh + d];
    });
  }
  return out;
}

// out[i] = x[i, index[i]] for a 2D x.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<std::int64_t>& index) {
  if (x.rank() != 2 || static_cast<std::int64_t>(index.size()) != x.dim(0))
    throw std::invalid_argument("gather_rows expects [B,C] and B indices");
  const std::int64_t b = x.dim(0), c = x.dim(1);
  for (auto ix : index)
    if (ix < 0 || ix >= c) throw std::invalid_argument("gather_rows index out of range");
  Tensor<T> out({b});
  for (std::int64_t i = 0; i < b; ++i) out.data()[i] = x.data()[i * c + index[i]];
  if (detail::tracking<T>({&x})) {
    auto X = x.impl(), O = out.impl();
    current_tape<T>()->record({O}, [X, O, index, b, c] {
      if (!X->requires_grad) return;
      for (std::int64_t i = 0; i < b; ++i) X->g[i * c + index[i]] += O->g[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  const std::int64_t n = x.size();
  T acc = T(0);
  for (std::int64_t i = 0; i < n; ++i) acc += x.data()[i];
  Tensor<T> out = Tensor<T>::scalar(acc);
  if (detail::tracking<T>({&x})) {
    auto X = x.impl(), O = out.impl();
    current_tape<T>()->record({O}, [X, O, n] {
      if (X->requires_grad)
        for (std::int64_t i = 0; i < n; ++i) X->g[i] += O->g[0];
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  const std::int64_t n = x.size();
  T acc = T(0);
  for (std::int64_t i = 0; i < n; ++i) acc += x.data()[i];
  Tensor<T> out = Tensor<T>::scalar(acc / static_cast<T>(n));
  if (detail::tracking<T>({&x})) {
    auto X = x.impl(), O = out.impl();
    current_tape<T>()->record({O}, [X, O, n] {
      if (X->requires_grad) {
        const T w = O->g[0] / static_cast<T>(n);
        for (std::int64_t i = 0; i < n; ++i) X->g[i] += w;
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Softmax family
// ---------------------------------------------------------------------------

namespace detail {

struct AxisSpan {
  std::int64_t outer, n, inner;
};

template <typename T>
inline AxisSpan axis_span(const Tensor<T>& x, std::int64_t axis) {
  if (axis < 0) axis += x.rank();
  if (axis < 0 || axis >= x.rank()) throw std::invalid_argument("axis out of range");
  AxisSpan s{1, x.dim(axis), 1};
  for (std::int64_t i = 0; i < axis; ++i) s.outer *= x.dim(i);
  for (std::int64_t i = axis + 1; i < x.rank(); ++i) s.inner *= x.dim(i);
  return s;
}

}  // namespace detail

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::int64_t axis = -1) {
  const auto sp = detail::axis_span(x, axis);
  Tensor<T> out(x.shape());
  const T* xv = x.data();
  T* ov = out.data();
  for (std::int64_t o = 0; o < sp.outer; ++o)
    for (std::int64_t in = 0; in < sp.inner; ++in) {
      const std::int64_t base = o * sp.n * sp.inner + in;
      T mx = xv[base];
      for (std::int64_t k = 0; k < sp.n; ++k) {
        const T v = xv[base + k * sp.inner];
        if (std::isnan(v)) throw NumericError("softmax: NaN input");
        mx = std::max(mx, v);
      }
      T denom = T(0);
      for (std::int64_t k = 0; k < sp.n; ++k) {
        const T e = std::exp(xv[base + k * sp.inner] - mx);
        ov[base + k * sp.inner] = e;
        denom += e;
      }
      for (std::int64_t k = 0; k < sp.n; ++k) ov[base + k * sp.inner] /= denom;
    }
  if (detail::tracking<T>({&x})) {
    auto X = x.impl(), O = out.impl();
    current_tape<T>()->record({O}, [X, O, sp] {
      if (!X->requires_grad) return;
      for (std::int64_t o = 0; o < sp.outer; ++o)
        for (std::int64_t in = 0; in < sp.inner; ++in) {
          const std::int64_t base = o * sp.n * sp.inner + in;
          T dot = T(0);
          for (std::int64_t k = 0; k < sp.n; ++k) {
            const std::int64_t ix = base + k * sp.inner;
            dot += O->g[ix] * O->v[ix];
          }
          for (std::int64_t k = 0; k < sp.n; ++k) {
            const std::int64_t ix = base + k * sp.inner;
            X->g[ix] += O->v[ix] * (O->g[ix] - dot);
          }
        }
    });
  }
  return out;
}

template <typename T>
Tensor<T> log_softmax(const Tensor<T>& x, std::int64_t axis = -1) {
  const auto sp = detail::axis_span(x, axis);
  Tensor<T> out(x.shape());
  const T* xv = x.data();
  T* ov = out.data();
  for (std::int64_t o = 0; o < sp.outer; ++o)
    for (std::int64_t in = 0; in < sp.inner; ++in) {
      const std::int64_t base = o * sp.n * sp.inner + in;
      T mx = xv[base];
      for (std::int64_t k = 0; k < sp.n; ++k) {
        const T v = xv[base + k * sp.inner];
        if (std::isnan(v)) throw NumericError("log_softmax: NaN input");
        mx = std::max(mx, v);
      }
      T denom = T(0);
      for (std::int64_t k = 0; k < sp.n; ++k) denom += std::exp(xv[base + k * sp.inner] - mx);
      const T lse = mx + std::log(denom);
      for (std::int64_t k = 0; k < sp.n; ++k)
        ov[base + k * sp.inner] = xv[base + k * sp.inner] - lse;
    }
  if (detail::tracking<T>({&x})) {
    auto X = x.impl(), O = out.impl();
    current_tape<T>()->record({O}, [X, O, sp] {
      if (!X->requires_grad) return;
      for (std::int64_t o = 0; o < sp.outer; ++o)
        for (std::int64_t in = 0; in < sp.inner; ++in) {
          const std::int64_t base = o * sp.n * sp.inner + in;
          T gsum = T(0);
          for (std::int64_t k = 0; k < sp.n; ++k) gsum += O->g[base + k * sp.inner];
          for (std::int64_t k = 0; k < sp.n; ++k) {
            const std::int64_t ix = base + k * sp.inner;
            X->g[ix] += O->g[ix] - std::exp(O->v[ix]) * gsum;
          }
        }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Neural-net primitives
// ---------------------------------------------------------------------------

// PReLU with one learned slope per channel (extent of `channel_axis`).
// The x = 0 kink takes the positive branch (slope 1).
template <typename T>
Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& alpha, std::int64_t channel_axis) {
  const auto sp = detail::axis_span(x, channel_axis);
  if (alpha.rank() != 1 || alpha.dim(0) != sp.n)
    throw std::invalid_argument("prelu: alpha extent " + shape_str(alpha.shape()) +
                                " does not match channel extent " + std::to_string(sp.n));
  Tensor<T> out(x.shape());
  const T* xv = x.data();
  const T* av = alpha.data();
  T* ov = out.data();
  for (std::int64_t o = 0; o < sp.outer; ++o)
    for (std::int64_t c = 0; c < sp.n; ++c) {
      const std::int64_t base = (o * sp.n + c) * sp.inner;
      const T a = av[c];
      for (std::int64_t i = 0; i < sp.inner; ++i) {
        const T v = xv[base + i];
        ov[base + i] = v < T(0) ? a * v : v;
      }
    }
  if (detail::tracking<T>({&x, &alpha})) {
    auto X = x.impl(), A = alpha.impl(), O = out.impl();
    current_tape<T>()->record({O}, [X, A, O, sp] {
      for (std::int64_t o = 0; o < sp.outer; ++o)
        for (std::int64_t c = 0; c < sp.n; ++c) {
          const std::int64_t base = (o * sp.n + c) * sp.inner;
          const T a = A->v[c];
          for (std::int64_t i = 0; i < sp.inner; ++i) {
            const T v = X->v[base + i];
            const T og = O->g[base + i];
            if (X->requires_grad) X->g[base + i] += v < T(0) ? a * og : og;
            if (A->requires_grad && v < T(0)) A->g[c] += og * v;
          }
        }
    });
  }
  return out;
}

namespace detail {

// Expand one [C,H,W] image into columns [C*kh*kw, H*W] with zero padding.
template <typename T>
inline void im2col(const T* img, std::int64_t c, std::int64_t h, std::int64_t w,
                   std::int64_t kh, std::int64_t kw, T* col) {
  const std::int64_t ph = (kh - 1) / 2, pw = (kw - 1) / 2, hw = h * w;
  std::int64_t row = 0;
  for (std::int64_t ci = 0; ci < c; ++ci)
    for (std::int64_t ki = 0; ki < kh; ++ki)
      for (std::int64_t kj = 0; kj < kw; ++kj, ++row) {
        T* dst = col + row * hw;
        for (std::int64_t y = 0; y < h; ++y) {
          const std::int64_t sy = y + ki - ph;
          if (sy < 0 || sy >= h) {
            std::fill(dst + y * w, dst + (y + 1) * w, T(0));
            continue;
          }
          const T* src = img + (ci * h + sy) * w;
          for (std::int64_t x = 0; x < w; ++x) {
            const std::int64_t sx = x + kj - pw;
            dst[y * w + x] = (sx < 0 || sx >= w) ? T(0) : src[sx];
          }
        }
      }
}

// Scatter columns [C*kh*kw, H*W] back into a [C,H,W] gradient image.
template <typename T>
inline void col2im_acc(const T* col, std::int64_t c, std::int64_t h, std::int64_t w,
                       std::int64_t kh, std::int64_t kw, T* img) {
  const std::int64_t ph = (kh - 1) / 2, pw = (kw - 1) / 2, hw = h * w;
  std::int64_t row = 0;
  for (std::int64_t ci = 0; ci < c; ++ci)
    for (std::int64_t ki = 0; ki < kh; ++ki)
      for (std::int64_t kj = 0; kj < kw; ++kj, ++row) {
        const T* src = col + row * hw;
        for (std::int64_t y = 0; y < h; ++y) {
          const std::int64_t sy = y + ki - ph;
          if (sy < 0 || sy >= h) continue;
          T* dst = img + (ci * h + sy) * w;
          for (std::int64_t x = 0; x < w; ++x) {
            const std::int64_t sx = x + kj - pw;
            if (sx >= 0 && sx < w) dst[sx] += src[y * w + x];
          }
        }
      }
}

}  // namespace detail

// 2D convolution, stride 1, "same" zero padding, odd kernel extents.
// x: [N,Cin,H,W], kernels: [Cout,Cin,kh,kw], bias: [Cout] -> [N,Cout,H,W].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernels, const Tensor<T>& bias) {
  if (x.rank() != 4 || kernels.rank() != 4)
    throw std::invalid_argument("conv2d expects 4D input and kernels");
  if (x.dim(1) != kernels.dim(1))
    throw std::invalid_argument("conv2d channel mismatch: input Cin=" + std::to_string(x.dim(1)) +
                                ", kernels Cin=" + std::to_string(kernels.dim(1)));
  const std::int64_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::int64_t cout = kernels.dim(0), kh = kernels.dim(2), kw = kernels.dim(3);
  if (kh % 2 == 0 || kw % 2 == 0)
    throw std::invalid_argument("conv2d same-padding needs odd kernel extents");
  if (bias.rank() != 1 || bias.dim(0) != cout)
    throw std::invalid_argument("conv2d bias extent must equal Cout");
  const std::int64_t ck = cin * kh * kw, hw = h * w;
  Tensor<T> out({n, cout, h, w});
  std::vector<T> col(static_cast<std::size_t>(ck * hw));
  for (std::int64_t i = 0; i < n; ++i) {
    detail::im2col(x.data() + i * cin * hw, cin, h, w, kh, kw, col.data());
    T* on = out.data() + i * cout * hw;
    gemm_acc_nn(cout, hw, ck, kernels.data(), col.data(), on);
    for (std::int64_t co = 0; co < cout; ++co) {
      const T b = bias.data()[co];
      for (std::int64_t p = 0; p < hw; ++p) on[co * hw + p] += b;
    }
  }
  if (detail::tracking<T>({&x, &kernels, &bias})) {
    auto X = x.impl(), K = kernels.impl(), B = bias.impl(), O = out.impl();
    current_tape<T>()->record({O}, [X, K, B, O, n, cin, h, w, cout, kh, kw, ck, hw] {
      std::vector<T> col(static_cast<std::size_t>(ck * hw));
      std::vector<T> dcol(static_cast<std::size_t>(ck * hw));
      for (std::int64_t i = 0; i < n; ++i) {
        const T* og = O->g.data() + i * cout * hw;
        if (K->requires_grad) {
          detail::im2col(X->v.data() + i * cin * hw, cin, h, w, kh, kw, col.data());
          gemm_acc_nt(cout, ck, hw, og, col.data(), K->g.data());
        }
        if (X->requires_grad) {
          std::fill(dcol.begin(), dcol.end(), T(0));
          gemm_acc_tn(ck, hw, cout, K->v.data(), og, dcol.data());
          detail::col2im_acc(dcol.data(), cin, h, w, kh, kw, X->g.data() + i * cin * hw);
        }
        if (B->requires_grad)
          for (std::int64_t co = 0; co < cout; ++co) {
            T acc = T(0);
            for (std::int64_t p = 0; p < hw; ++p) acc += og[co * hw + p];
            B->g[co] += acc;
          }
      }
    });
  }
  return out;
}

// Non-overlapping max pooling, stride equal to the window, floor semantics on
// odd trailing extents. Gradient routes to the argmax; ties go to the first
// element in row-major window order.
template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& x, std::int64_t win_h, std::int64_t win_w) {
  if (x.rank() != 4) throw std::invalid_argument("maxpool2d expects [N,C,H,W]");
  const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h < win_h || w < win_w)
    throw std::invalid_argument("maxpool2d: pooled extent smaller than window");
  const std::int64_t ho = h / win_h, wo = w / win_w;
  Tensor<T> out({n, c, ho, wo});
  std::vector<std::int64_t> argmax(static_cast<std::size_t>(out.size()));
  const T* xv = x.data();
  T* ov = out.data();
  std::int64_t oi = 0;
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t ci = 0; ci < c; ++ci) {
      const T* plane = xv + (i * c + ci) * h * w;
      for (std::int64_t y = 0; y < ho; ++y)
        for (std::int64_t xo = 0; xo < wo; ++xo, ++oi) {
          std::int64_t best = (y * win_h) * w + xo * win_w;
          T bv = plane[best];
          for (std::int64_t dy = 0; dy < win_h; ++dy)
            for (std::int64_t dx = 0; dx < win_w; ++dx) {
              const std::int64_t ix = (y * win_h + dy) * w + xo * win_w + dx;
              if (plane[ix] > bv) {
                bv = plane[ix];
                best = ix;
              }
            }
          ov[oi] = bv;
          argmax[static_cast<std::size_t>(oi)] = (i * c + ci) * h * w + best;
        }
    }
  if (detail::tracking<T>({&x})) {
    auto X = x.impl(), O = out.impl();
    const std::int64_t total = out.size();
    current_tape<T>()->record({O}, [X, O, argmax = std::move(argmax), total] {
      if (!X->requires_grad) return;
      for (std::int64_t i = 0; i < total; ++i) X->g[argmax[static_cast<std::size_t>(i)]] += O->g[i];
    });
  }
  return out;
}

// Per-channel batch normalization over [N,C,H,W]. Training mode normalizes by
// batch statistics (population variance) and updates the running buffers in
// place with the given momentum; eval mode normalizes by the running buffers.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     Tensor<T>& running_mean, Tensor<T>& running_var, bool training,
                     T momentum = T(0.1), T eps = T(1e-5)) {
  if (x.rank() != 4) throw std::invalid_argument("batch_norm expects [N,C,H,W]");
  const std::int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (gamma.dim(0) != c || beta.dim(0) != c || running_mean.dim(0) != c || running_var.dim(0) != c)
    throw std::invalid_argument("batch_norm parameter extents must equal C");
  if (training && n < 2)
    throw std::invalid_argument("batch_norm: training mode requires batch size >= 2");
  const std::int64_t m = n * hw;
  std::vector<T> mean_c(static_cast<std::size_t>(c)), var_c(static_cast<std::size_t>(c));
  if (training) {
    for (std::int64_t ci = 0; ci < c; ++ci) {
      T s = T(0);
      for (std::int64_t i = 0; i < n; ++i) {
        const T* p = x.data() + (i * c + ci) * hw;
        for (std::int64_t j = 0; j < hw; ++j) s += p[j];
      }
      const T mu = s / static_cast<T>(m);
      T sq = T(0);
      for (std::int64_t i = 0; i < n; ++i) {
        const T* p = x.data() + (i * c + ci) * hw;
        for (std::int64_t j = 0; j < hw; ++j) sq += (p[j] - mu) * (p[j] - mu);
      }
      mean_c[static_cast<std::size_t>(ci)] = mu;
      var_c[static_cast<std::size_t>(ci)] = sq / static_cast<T>(m);
      running_mean.data()[ci] = (T(1) - momentum) * running_mean.data()[ci] + momentum * mu;
      running_var.data()[ci] =
          (T(1) - momentum) * running_var.data()[ci] + momentum * var_c[static_cast<std::size_t>(ci)];
    }
  } else {
    for (std::int64_t ci = 0; ci < c; ++ci) {
      mean_c[static_cast<std::size_t>(ci)] = running_mean.data()[ci];
      var_c[static_cast<std::size_t>(ci)] = running_var.data()[ci];
    }
  }
  Tensor<T> out(x.shape());
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t ci = 0; ci < c; ++ci) {
      const T mu = mean_c[static_cast<std::size_t>(ci)];
      const T r = T(1) / std::sqrt(var_c[static_cast<std::size_t>(ci)] + eps);
      const T g = gamma.data()[ci], b = beta.data()[ci];
      const T* p = x.data() + (i * c + ci) * hw;
      T* q = out.data() + (i * c + ci) * hw;
      for (std::int64_t j = 0; j < hw; ++j) q[j] = g * (p[j] - mu) * r + b;
    }
  if (detail::tracking<T>({&x, &gamma, &beta})) {
    auto X = x.impl(), G = gamma.impl(), B = beta.impl(), O = out.impl();
    current_tape<T>()->record(
        {O}, [X, G, B, O, n, c, hw, m, training, eps, mean_c = std::move(mean_c),
              var_c = std::move(var_c)] {
          for (std::int64_t ci = 0; ci < c; ++ci) {
            const T mu = mean_c[static_cast<std::size_t>(ci)];
            const T r = T(1) / std::sqrt(var_c[static_cast<std::size_t>(ci)] + eps);
            const T g = G->v[ci];
            // Channel-wide sums of dy and dy*xhat.
            T sum_dy = T(0), sum_dyx = T(0);
            for (std::int64_t i = 0; i < n; ++i) {
              const std::int64_t base = (i * c + ci) * hw;
              for (std::int64_t j = 0; j < hw; ++j) {
                const T dy = O->g[base + j];
                sum_dy += dy;
                sum_dyx += dy * (X->v[base + j] - mu) * r;
              }
            }
            if (G->requires_grad) G->g[ci] += sum_dyx;
            if (B->requires_grad) B->g[ci] += sum_dy;
            if (X->requires_grad) {
              if (training) {
                const T inv_m = T(1) / static_cast<T>(m);
                for (std::int64_t i = 0; i < n; ++i) {
                  const std::int64_t base = (i * c + ci) * hw;
                  for (std::int64_t j = 0; j < hw; ++j) {
                    const T xhat = (X->v[base + j] - mu) * r;
                    X->g[base + j] +=
                        g * r * (O->g[base + j] - inv_m * sum_dy - xhat * inv_m * sum_dyx);
                  }
                }
              } else {
                for (std::int64_t i = 0; i < n; ++i) {
                  const std::int64_t base = (i * c + ci) * hw;
                  for (std::int64_t j = 0; j < hw; ++j) X->g[base + j] += g * r * O->g[base + j];
                }
              }
            }
          }
        });
  }
  return out;
}

// Layer normalization over the trailing axis with learned gamma/beta.
// Shift invariant: layer_norm(x + c) == layer_norm(x).
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(1e-5)) {
  const std::int64_t d = x.dim(x.rank() - 1);
  if (gamma.dim(0) != d || beta.dim(0) != d)
    throw std::invalid_argument("layer_norm parameter extents must equal the trailing axis");
  const std::int64_t rows = x.size() / d;
  Tensor<T> out(x.shape());
  std::vector<T> mean_r(static_cast<std::size_t>(rows)), rstd_r(static_cast<std::size_t>(rows));
  for (std::int64_t rI = 0; rI < rows; ++rI) {
    const T* p = x.data() + rI * d;
    T s = T(0);
    for (std::int64_t j = 0; j < d; ++j) s += p[j];
    const T mu = s / static_cast<T>(d);
    T sq = T(0);
    for (std::int64_t j = 0; j < d; ++j) sq += (p[j] - mu) * (p[j] - mu);
    const T r = T(1) / std::sqrt(sq / static_cast<T>(d) + eps);
    mean_r[static_cast<std::size_t>(rI)] = mu;
    rstd_r[static_cast<std::size_t>(rI)] = r;
    T* q = out.data() + rI * d;
    for (std::int64_t j = 0; j < d; ++j) q[j] = gamma.data()[j] * (p[j] - mu) * r + beta.data()[j];
  }
  if (detail::tracking<T>({&x, &gamma, &beta})) {
    auto X = x.impl(), G = gamma.impl(), B = beta.impl(), O = out.impl();
    current_tape<T>()->record(
        {O}, [X, G, B, O, rows, d, mean_r = std::move(mean_r), rstd_r = std::move(rstd_r)] {
          for (std::int64_t rI = 0; rI < rows; ++rI) {
            const T mu = mean_r[static_cast<std::size_t>(rI)];
            const T r = rstd_r[static_cast<std::size_t>(rI)];
            const std::int64_t base = rI * d;
            T sum_dyg = T(0), sum_dygx = T(0);
            for (std::int64_t j = 0; j < d; ++j) {
              const T xhat = (X->v[base + j] - mu) * r;
              const T dyg = O->g[base + j] * G->v[j];
              sum_dyg += dyg;
              sum_dygx += dyg * xhat;
              if (G->requires_grad) G->g[j] += O->g[base + j] * xhat;
              if (B->requires_grad) B->g[j] += O->g[base + j];
            }
            if (X->requires_grad) {
              const T inv_d = T(1) / static_cast<T>(d);
              for (std::int64_t j = 0; j < d; ++j) {
                const T xhat = (X->v[base + j] - mu) * r;
                const T dyg = O->g[base + j] * G->v[j];
                X->g[base + j] += r * (dyg - inv_d * sum_dyg - xhat * inv_d * sum_dygx);
              }
            }
          }
        });
  }
  return out;
}

// Inverted dropout: surviving entries are scaled by 1/(1-rate) during
// training so eval mode is the identity.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, bool training, RngStream& rng) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout rate must be in [0,1)");
  if (!training || rate == 0.0) return x;
  const std::int64_t n = x.size();
  const T scale = T(1.0 / (1.0 - rate));
  std::vector<T> mask(static_cast<std::size_t>(n));
  Tensor<T> out(x.shape());
  for (std::int64_t i = 0; i < n; ++i) {
    mask[static_cast<std::size_t>(i)] = rng.uniform() < rate ? T(0) : scale;
    out.data()[i] = x.data()[i] * mask[static_cast<std::size_t>(i)];
  }
  if (detail::tracking<T>({&x})) {
    auto X = x.impl(), O = out.impl();
    current_tape<T>()->record({O}, [X, O, n, mask = std::move(mask)] {
      if (!X->requires_grad) return;
      for (std::int64_t i = 0; i < n; ++i) X->g[i] += O->g[i] * mask[static_cast<std::size_t>(i)];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Multi-head attention
// ---------------------------------------------------------------------------

template <typename T>
struct AttentionParams {
  Tensor<T> wq, bq, wk, bk, wv, bv;  // [d, H*Dh], [H*Dh]
  Tensor<T> wo, bo;                  // [H*Dh, d_out], [d_out]
};

// Scaled dot-product attention over [B,T,d] with `heads` heads. Per-head
// weights softmax(Q K^T / sqrt(Dh)) sum to one across keys.
template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& x, const AttentionParams<T>& p,
                               std::int64_t heads) {
  if (x.rank() != 3) throw std::invalid_argument("attention expects [B,T,d]");
  const std::int64_t b = x.dim(0), t = x.dim(1), d = x.dim(2);
  if (t == 0) throw std::invalid_argument("attention: empty sequence");
  const std::int64_t dh_total = p.wq.dim(1);
  if (dh_total % heads != 0)
    throw std::invalid_argument("attention: projection width not divisible by head count");
  const std::int64_t dh = dh_total / heads;
  auto flat = reshape(x, {b * t, d});
  auto q = split_heads(reshape(add(matmul(flat, p.wq), p.bq), {b, t, dh_total}), heads);
  auto k = split_heads(reshape(add(matmul(flat, p.wk), p.bk), {b, t, dh_total}), heads);
  auto v = split_heads(reshape(add(matmul(flat, p.wv), p.bv), {b, t, dh_total}), heads);
  auto scores = affine(bmm(q, k, /*transpose_b=*/true), T(1) / std::sqrt(static_cast<T>(dh)), T(0));
  auto attn = softmax(scores, -1);
  auto ctx = merge_heads(bmm(attn, v), heads);
  auto projected = add(matmul(reshape(ctx, {b * t, dh_total}), p.wo), p.bo);
  return reshape(projected, {b, t, p.wo.dim(1)});
}

// Linear layer helper: y = x W + b for x [B,in], W [in,out], b [out].
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  return add(matmul(x, w), b);
}

}  // namespace pfkd
