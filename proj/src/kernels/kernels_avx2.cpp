// AVX2 + FMA variants. This translation unit is compiled with -mavx2 -mfma and
// must only be entered after the dispatcher has confirmed CPU support.

#include "reachbound/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cmath>

namespace reachbound::kernels::avx2 {
namespace {

template <class T>
struct Vec;

template <>
struct Vec<float> {
  using reg = __m256;
  static constexpr std::size_t width = 8;
  static reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
  static reg set1(float v) { return _mm256_set1_ps(v); }
  static reg zero() { return _mm256_setzero_ps(); }
  static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_ps(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_ps(a, b); }
  static reg div(reg a, reg b) { return _mm256_div_ps(a, b); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_ps(a, b, c); }
  static reg max(reg a, reg b) { return _mm256_max_ps(a, b); }
  static reg sqrt(reg a) { return _mm256_sqrt_ps(a); }
  static reg gt_mask(reg a, reg b) { return _mm256_cmp_ps(a, b, _CMP_GT_OQ); }
  static reg and_(reg a, reg b) { return _mm256_and_ps(a, b); }
  static float hsum(reg v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 sh = _mm_movehdup_ps(lo);
    __m128 s = _mm_add_ps(lo, sh);
    sh = _mm_movehl_ps(sh, s);
    s = _mm_add_ss(s, sh);
    return _mm_cvtss_f32(s);
  }
};

template <>
struct Vec<double> {
  using reg = __m256d;
  static constexpr std::size_t width = 4;
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
  static reg set1(double v) { return _mm256_set1_pd(v); }
  static reg zero() { return _mm256_setzero_pd(); }
  static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_pd(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_pd(a, b); }
  static reg div(reg a, reg b) { return _mm256_div_pd(a, b); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_pd(a, b, c); }
  static reg max(reg a, reg b) { return _mm256_max_pd(a, b); }
  static reg sqrt(reg a) { return _mm256_sqrt_pd(a); }
  static reg gt_mask(reg a, reg b) { return _mm256_cmp_pd(a, b, _CMP_GT_OQ); }
  static reg and_(reg a, reg b) { return _mm256_and_pd(a, b); }
  static double hsum(reg v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d h = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, h));
  }
};

// R rows x (2 * width) columns register tile.
template <class T, int R>
inline void gemm_tile2(std::size_t n, std::size_t lda, std::size_t k, const T* a, const T* b, T* c,
                       bool accumulate) {
  using V = Vec<T>;
  constexpr std::size_t W = V::width;
  typename V::reg acc0[R], acc1[R];
  for (int r = 0; r < R; ++r) {
    acc0[r] = V::zero();
    acc1[r] = V::zero();
  }
  for (std::size_t p = 0; p < k; ++p) {
    const typename V::reg b0 = V::load(b + p * n);
    const typename V::reg b1 = V::load(b + p * n + W);
    for (int r = 0; r < R; ++r) {
      const typename V::reg av = V::set1(a[std::size_t(r) * lda + p]);
      acc0[r] = V::fmadd(av, b0, acc0[r]);
      acc1[r] = V::fmadd(av, b1, acc1[r]);
    }
  }
  for (int r = 0; r < R; ++r) {
    T* crow = c + std::size_t(r) * n;
    if (accumulate) {
      acc0[r] = V::add(acc0[r], V::load(crow));
      acc1[r] = V::add(acc1[r], V::load(crow + W));
    }
    V::store(crow, acc0[r]);
    V::store(crow + W, acc1[r]);
  }
}

template <class T, int R>
inline void gemm_tile1(std::size_t n, std::size_t lda, std::size_t k, const T* a, const T* b, T* c,
                       bool accumulate) {
  using V = Vec<T>;
  typename V::reg acc[R];
  for (int r = 0; r < R; ++r) acc[r] = V::zero();
  for (std::size_t p = 0; p < k; ++p) {
    const typename V::reg b0 = V::load(b + p * n);
    for (int r = 0; r < R; ++r)
      acc[r] = V::fmadd(V::set1(a[std::size_t(r) * lda + p]), b0, acc[r]);
  }
  for (int r = 0; r < R; ++r) {
    T* crow = c + std::size_t(r) * n;
    if (accumulate) acc[r] = V::add(acc[r], V::load(crow));
    V::store(crow, acc[r]);
  }
}

template <class T, int R>
inline void gemm_tail_cols(std::size_t n, std::size_t j0, std::size_t lda, std::size_t k,
                           const T* a, const T* b, T* c, bool accumulate) {
  for (int r = 0; r < R; ++r) {
    for (std::size_t j = j0; j < n; ++j) {
      T acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += a[std::size_t(r) * lda + p] * b[p * n + j];
      T* cij = c + std::size_t(r) * n + j;
      *cij = accumulate ? *cij + acc : acc;
    }
  }
}

template <class T, int R>
inline void gemm_rows(std::size_t n, std::size_t lda, std::size_t k, const T* a, const T* b, T* c,
                      bool accumulate) {
  constexpr std::size_t W = Vec<T>::width;
  std::size_t j = 0;
  for (; j + 2 * W <= n; j += 2 * W) gemm_tile2<T, R>(n, lda, k, a, b + j, c + j, accumulate);
  for (; j + W <= n; j += W) gemm_tile1<T, R>(n, lda, k, a, b + j, c + j, accumulate);
  if (j < n) gemm_tail_cols<T, R>(n, j, lda, k, a, b, c, accumulate);
}

template <class T>
void gemm_impl(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
               bool accumulate) {
  if (k == 0) {
    if (!accumulate) std::fill(c, c + m * n, T(0));
    return;
  }
  // long inner dimensions are split so a block of B stays cache resident
  constexpr int R = 6;
  constexpr std::size_t KC = 256;
  for (std::size_t p = 0; p < k; p += KC) {
    const std::size_t kc = std::min(KC, k - p);
    const bool acc = accumulate || p > 0;
    const T* bp = b + p * n;
    std::size_t i = 0;
    for (; i + R <= m; i += R) gemm_rows<T, R>(n, k, kc, a + i * k + p, bp, c + i * n, acc);
    for (; i < m; ++i) gemm_rows<T, 1>(n, k, kc, a + i * k + p, bp, c + i * n, acc);
  }
}

template <class T>
void bias_act_impl(std::size_t m, std::size_t n, T* x, const T* bias, bool relu) {
  using V = Vec<T>;
  constexpr std::size_t W = V::width;
  const typename V::reg z = V::zero();
  for (std::size_t i = 0; i < m; ++i) {
    T* row = x + i * n;
    std::size_t j = 0;
    for (; j + W <= n; j += W) {
      typename V::reg v = V::add(V::load(row + j), V::load(bias + j));
      if (relu) v = V::max(v, z);
      V::store(row + j, v);
    }
    for (; j < n; ++j) {
      const T v = row[j] + bias[j];
      row[j] = relu ? std::max(v, T(0)) : v;
    }
  }
}

template <class T>
void relu_backward_impl(std::size_t len, const T* pre, T* dy) {
  using V = Vec<T>;
  constexpr std::size_t W = V::width;
  const typename V::reg z = V::zero();
  std::size_t i = 0;
  for (; i + W <= len; i += W)
    V::store(dy + i, V::and_(V::load(dy + i), V::gt_mask(V::load(pre + i), z)));
  for (; i < len; ++i)
    if (!(pre[i] > T(0))) dy[i] = T(0);
}

template <class T>
void col_sum_impl(std::size_t m, std::size_t n, const T* x, T* out, bool accumulate) {
  using V = Vec<T>;
  constexpr std::size_t W = V::width;
  if (!accumulate) std::fill(out, out + n, T(0));
  std::size_t j = 0;
  for (; j + W <= n; j += W) {
    typename V::reg acc = V::load(out + j);
    for (std::size_t i = 0; i < m; ++i) acc = V::add(acc, V::load(x + i * n + j));
    V::store(out + j, acc);
  }
  for (; j < n; ++j)
    for (std::size_t i = 0; i < m; ++i) out[j] += x[i * n + j];
}

template <class T>
void axpy_impl(std::size_t len, T alpha, const T* x, T* y) {
  using V = Vec<T>;
  constexpr std::size_t W = V::width;
  const typename V::reg a = V::set1(alpha);
  std::size_t i = 0;
  for (; i + W <= len; i += W) V::store(y + i, V::fmadd(a, V::load(x + i), V::load(y + i)));
  for (; i < len; ++i) y[i] += alpha * x[i];
}

template <class T>
T dot_impl(std::size_t len, const T* x, const T* y) {
  using V = Vec<T>;
  constexpr std::size_t W = V::width;
  typename V::reg acc0 = V::zero(), acc1 = V::zero();
  std::size_t i = 0;
  for (; i + 2 * W <= len; i += 2 * W) {
    acc0 = V::fmadd(V::load(x + i), V::load(y + i), acc0);
    acc1 = V::fmadd(V::load(x + i + W), V::load(y + i + W), acc1);
  }
  for (; i + W <= len; i += W) acc0 = V::fmadd(V::load(x + i), V::load(y + i), acc0);
  T acc = V::hsum(V::add(acc0, acc1));
  for (; i < len; ++i) acc += x[i] * y[i];
  return acc;
}

template <class T>
void edge_relu_sum_impl(const CsrView& g, std::size_t h, const T* pq, const T* bias, T* s) {
  using V = Vec<T>;
  constexpr std::size_t W = V::width;
  const std::size_t w = 2 * h;
  const typename V::reg z = V::zero();
  for (std::size_t i = 0; i < g.n_nodes; ++i) {
    T* si = s + i * h;
    const T* p = pq + i * w;
    std::size_t c = 0;
    for (; c + W <= h; c += W) {
      const typename V::reg pb = V::add(V::load(p + c), V::load(bias + c));
      typename V::reg acc = V::zero();
      for (std::uint32_t e = g.offsets[i]; e < g.offsets[i + 1]; ++e) {
        const T* q = pq + std::size_t(g.nbrs[e]) * w + h;
        acc = V::add(acc, V::max(V::add(pb, V::load(q + c)), z));
      }
      V::store(si + c, acc);
    }
    for (; c < h; ++c) {
      T acc = 0;
      for (std::uint32_t e = g.offsets[i]; e < g.offsets[i + 1]; ++e) {
        const T* q = pq + std::size_t(g.nbrs[e]) * w + h;
        acc += std::max(p[c] + bias[c] + q[c], T(0));
      }
      si[c] = acc;
    }
  }
}

template <class T>
void edge_relu_sum_backward_impl(const CsrView& g, std::size_t h, const T* pq, const T* bias,
                                 const T* ds, T* dpq, T* dbias) {
  using V = Vec<T>;
  constexpr std::size_t W = V::width;
  const std::size_t w = 2 * h;
  const typename V::reg z = V::zero();
  for (std::size_t i = 0; i < g.n_nodes; ++i) {
    const T* p = pq + i * w;
    const T* dsi = ds + i * h;
    T* dp = dpq + i * w;
    std::size_t c = 0;
    for (; c + W <= h; c += W) {
      const typename V::reg pb = V::add(V::load(p + c), V::load(bias + c));
      const typename V::reg d = V::load(dsi + c);
      typename V::reg dp_acc = V::zero();
      for (std::uint32_t e = g.offsets[i]; e < g.offsets[i + 1]; ++e) {
        const std::size_t j = g.nbrs[e];
        const typename V::reg pre = V::add(pb, V::load(pq + j * w + h + c));
        const typename V::reg gm = V::and_(d, V::gt_mask(pre, z));
        dp_acc = V::add(dp_acc, gm);
        T* dq = dpq + j * w + h + c;
        V::store(dq, V::add(V::load(dq), gm));
      }
      V::store(dp + c, V::add(V::load(dp + c), dp_acc));
      V::store(dbias + c, V::add(V::load(dbias + c), dp_acc));
    }
    for (; c < h; ++c) {
      for (std::uint32_t e = g.offsets[i]; e < g.offsets[i + 1]; ++e) {
        const std::size_t j = g.nbrs[e];
        if (p[c] + bias[c] + pq[j * w + h + c] > T(0)) {
          dp[c] += dsi[c];
          dpq[j * w + h + c] += dsi[c];
          dbias[c] += dsi[c];
        }
      }
    }
  }
}

template <class T>
void edge_relu_rows_impl(const CsrView& g, std::size_t h, const T* pq, const T* bias, T* out) {
  using V = Vec<T>;
  constexpr std::size_t W = V::width;
  const std::size_t w = 2 * h;
  const typename V::reg z = V::zero();
  for (std::size_t i = 0; i < g.n_nodes; ++i) {
    const T* p = pq + i * w;
    for (std::uint32_t e = g.offsets[i]; e < g.offsets[i + 1]; ++e) {
      const T* q = pq + std::size_t(g.nbrs[e]) * w + h;
      T* o = out + std::size_t(e) * h;
      std::size_t c = 0;
      for (; c + W <= h; c += W) {
        const typename V::reg pre = V::add(V::add(V::load(p + c), V::load(bias + c)), V::load(q + c));
        V::store(o + c, V::max(pre, z));
      }
      for (; c < h; ++c) o[c] = std::max(p[c] + bias[c] + q[c], T(0));
    }
  }
}

template <class T>
void edge_relu_rows_backward_impl(const CsrView& g, std::size_t h, const T* pq, const T* bias,
                                  const T* dout, T* dpq, T* dbias) {
  using V = Vec<T>;
  constexpr std::size_t W = V::width;
  const std::size_t w = 2 * h;
  const typename V::reg z = V::zero();
  for (std::size_t i = 0; i < g.n_nodes; ++i) {
    const T* p = pq + i * w;
    T* dp = dpq + i * w;
    for (std::uint32_t e = g.offsets[i]; e < g.offsets[i + 1]; ++e) {
      const std::size_t j = g.nbrs[e];
      const T* q = pq + j * w + h;
      T* dq = dpq + j * w + h;
      const T* d = dout + std::size_t(e) * h;
      std::size_t c = 0;
      for (; c + W <= h; c += W) {
        const typename V::reg pre = V::add(V::add(V::load(p + c), V::load(bias + c)), V::load(q + c));
        const typename V::reg gm = V::and_(V::load(d + c), V::gt_mask(pre, z));
        V::store(dp + c, V::add(V::load(dp + c), gm));
        V::store(dq + c, V::add(V::load(dq + c), gm));
        V::store(dbias + c, V::add(V::load(dbias + c), gm));
      }
      for (; c < h; ++c) {
        if (p[c] + bias[c] + q[c] > T(0)) {
          dp[c] += d[c];
          dq[c] += d[c];
          dbias[c] += d[c];
        }
      }
    }
  }
}

template <class T>
void segment_sum_impl(const CsrView& g, std::size_t h, const T* rows, T* s) {
  using V = Vec<T>;
  constexpr std::size_t W = V::width;
  for (std::size_t i = 0; i < g.n_nodes; ++i) {
    T* si = s + i * h;
    std::size_t c = 0;
    for (; c + W <= h; c += W) {
      typename V::reg acc = V::zero();
      for (std::uint32_t e = g.offsets[i]; e < g.offsets[i + 1]; ++e)
        acc = V::add(acc, V::load(rows + std::size_t(e) * h + c));
      V::store(si + c, acc);
    }
    for (; c < h; ++c) {
      T acc = 0;
      for (std::uint32_t e = g.offsets[i]; e < g.offsets[i + 1]; ++e) acc += rows[std::size_t(e) * h + c];
      si[c] = acc;
    }
  }
}

template <class T>
void adam_update_impl(std::size_t len, T* param, const T* grad, T* m, T* v, T beta1, T beta2,
                      T step_size, T eps, T v_correction) {
  using V = Vec<T>;
  constexpr std::size_t W = V::width;
  const auto b1 = V::set1(beta1), b2 = V::set1(beta2);
  const auto ob1 = V::set1(T(1) - beta1), ob2 = V::set1(T(1) - beta2);
  const auto step = V::set1(step_size), ev = V::set1(eps), vc = V::set1(v_correction);
  std::size_t i = 0;
  for (; i + W <= len; i += W) {
    const auto g = V::load(grad + i);
    const auto mi = V::add(V::mul(b1, V::load(m + i)), V::mul(ob1, g));
    const auto vi = V::add(V::mul(b2, V::load(v + i)), V::mul(ob2, V::mul(g, g)));
    V::store(m + i, mi);
    V::store(v + i, vi);
    const auto denom = V::add(V::sqrt(V::mul(vi, vc)), ev);
    V::store(param + i, V::sub(V::load(param + i), V::div(V::mul(step, mi), denom)));
  }
  for (; i < len; ++i) {
    const T g = grad[i];
    m[i] = beta1 * m[i] + (T(1) - beta1) * g;
    v[i] = beta2 * v[i] + (T(1) - beta2) * (g * g);
    param[i] -= step_size * m[i] / (std::sqrt(v[i] * v_correction) + eps);
  }
}

}  // namespace

#define REACHBOUND_AVX2_DEFS(T)                                                              \
  void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,       \
            bool accumulate) {                                                               \
    gemm_impl(m, n, k, a, b, c, accumulate);                                                 \
  }                                                                                          \
  void bias_act(std::size_t m, std::size_t n, T* x, const T* bias, bool relu) {              \
    bias_act_impl(m, n, x, bias, relu);                                                      \
  }                                                                                          \
  void relu_backward(std::size_t len, const T* pre, T* dy) { relu_backward_impl(len, pre, dy); } \
  void col_sum(std::size_t m, std::size_t n, const T* x, T* out, bool accumulate) {          \
    col_sum_impl(m, n, x, out, accumulate);                                                  \
  }                                                                                          \
  void axpy(std::size_t len, T alpha, const T* x, T* y) { axpy_impl(len, alpha, x, y); }     \
  T dot(std::size_t len, const T* x, const T* y) { return dot_impl(len, x, y); }             \
  void edge_relu_sum(const CsrView& g, std::size_t h, const T* pq, const T* bias, T* s) {    \
    edge_relu_sum_impl(g, h, pq, bias, s);                                                   \
  }                                                                                          \
  void edge_relu_sum_backward(const CsrView& g, std::size_t h, const T* pq, const T* bias,   \
                              const T* ds, T* dpq, T* dbias) {                               \
    edge_relu_sum_backward_impl(g, h, pq, bias, ds, dpq, dbias);                             \
  }                                                                                          \
  void edge_relu_rows(const CsrView& g, std::size_t h, const T* pq, const T* bias, T* out) { \
    edge_relu_rows_impl(g, h, pq, bias, out);                                                \
  }                                                                                          \
  void edge_relu_rows_backward(const CsrView& g, std::size_t h, const T* pq, const T* bias,  \
                               const T* dout, T* dpq, T* dbias) {                            \
    edge_relu_rows_backward_impl(g, h, pq, bias, dout, dpq, dbias);                          \
  }                                                                                          \
  void segment_sum(const CsrView& g, std::size_t h, const T* rows, T* s) {                   \
    segment_sum_impl(g, h, rows, s);                                                         \
  }                                                                                          \
  void adam_update(std::size_t len, T* param, const T* grad, T* m, T* v, T beta1, T beta2,   \
                   T step_size, T eps, T v_correction) {                                     \
    adam_update_impl(len, param, grad, m, v, beta1, beta2, step_size, eps, v_correction);    \
  }

REACHBOUND_AVX2_DEFS(float)
REACHBOUND_AVX2_DEFS(double)

#undef REACHBOUND_AVX2_DEFS

}  // namespace reachbound::kernels::avx2
