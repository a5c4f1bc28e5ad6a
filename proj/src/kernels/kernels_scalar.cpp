#include "reachbound/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace reachbound::kernels::scalar {
namespace {

template <class T>
void gemm_impl(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
               bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, T(0));
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class T>
void bias_act_impl(std::size_t m, std::size_t n, T* x, const T* bias, bool relu) {
  for (std::size_t i = 0; i < m; ++i) {
    T* row = x + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const T v = row[j] + bias[j];
      row[j] = relu ? std::max(v, T(0)) : v;
    }
  }
}

template <class T>
void relu_backward_impl(std::size_t len, const T* pre, T* dy) {
  for (std::size_t i = 0; i < len; ++i)
    if (!(pre[i] > T(0))) dy[i] = T(0);
}

template <class T>
void col_sum_impl(std::size_t m, std::size_t n, const T* x, T* out, bool accumulate) {
  if (!accumulate) std::fill(out, out + n, T(0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += x[i * n + j];
}

template <class T>
void axpy_impl(std::size_t len, T alpha, const T* x, T* y) {
  for (std::size_t i = 0; i < len; ++i) y[i] += alpha * x[i];
}

template <class T>
T dot_impl(std::size_t len, const T* x, const T* y) {
  T acc = 0;
  for (std::size_t i = 0; i < len; ++i) acc += x[i] * y[i];
  return acc;
}

template <class T>
void edge_relu_sum_impl(const CsrView& g, std::size_t h, const T* pq, const T* bias, T* s) {
  const std::size_t w = 2 * h;
  for (std::size_t i = 0; i < g.n_nodes; ++i) {
    T* si = s + i * h;
    std::fill(si, si + h, T(0));
    const T* p = pq + i * w;
    for (std::uint32_t e = g.offsets[i]; e < g.offsets[i + 1]; ++e) {
      const T* q = pq + std::size_t(g.nbrs[e]) * w + h;
      for (std::size_t c = 0; c < h; ++c) si[c] += std::max(p[c] + bias[c] + q[c], T(0));
    }
  }
}

template <class T>
void edge_relu_sum_backward_impl(const CsrView& g, std::size_t h, const T* pq, const T* bias,
                                 const T* ds, T* dpq, T* dbias) {
  const std::size_t w = 2 * h;
  for (std::size_t i = 0; i < g.n_nodes; ++i) {
    const T* p = pq + i * w;
    const T* dsi = ds + i * h;
    T* dp = dpq + i * w;
    for (std::uint32_t e = g.offsets[i]; e < g.offsets[i + 1]; ++e) {
      const std::size_t j = g.nbrs[e];
      const T* q = pq + j * w + h;
      T* dq = dpq + j * w + h;
      for (std::size_t c = 0; c < h; ++c) {
        if (p[c] + bias[c] + q[c] > T(0)) {
          dp[c] += dsi[c];
          dq[c] += dsi[c];
          dbias[c] += dsi[c];
        }
      }
    }
  }
}

template <class T>
void edge_relu_rows_impl(const CsrView& g, std::size_t h, const T* pq, const T* bias, T* out) {
  const std::size_t w = 2 * h;
  for (std::size_t i = 0; i < g.n_nodes; ++i) {
    const T* p = pq + i * w;
    for (std::uint32_t e = g.offsets[i]; e < g.offsets[i + 1]; ++e) {
      const T* q = pq + std::size_t(g.nbrs[e]) * w + h;
      T* o = out + std::size_t(e) * h;
      for (std::size_t c = 0; c < h; ++c) o[c] = std::max(p[c] + bias[c] + q[c], T(0));
    }
  }
}

template <class T>
void edge_relu_rows_backward_impl(const CsrView& g, std::size_t h, const T* pq, const T* bias,
                                  const T* dout, T* dpq, T* dbias) {
  const std::size_t w = 2 * h;
  for (std::size_t i = 0; i < g.n_nodes; ++i) {
    const T* p = pq + i * w;
    T* dp = dpq + i * w;
    for (std::uint32_t e = g.offsets[i]; e < g.offsets[i + 1]; ++e) {
      const std::size_t j = g.nbrs[e];
      const T* q = pq + j * w + h;
      T* dq = dpq + j * w + h;
      const T* d = dout + std::size_t(e) * h;
      for (std::size_t c = 0; c < h; ++c) {
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
  for (std::size_t i = 0; i < g.n_nodes; ++i) {
    T* si = s + i * h;
    std::fill(si, si + h, T(0));
    for (std::uint32_t e = g.offsets[i]; e < g.offsets[i + 1]; ++e) {
      const T* r = rows + std::size_t(e) * h;
      for (std::size_t c = 0; c < h; ++c) si[c] += r[c];
    }
  }
}

template <class T>
void adam_update_impl(std::size_t len, T* param, const T* grad, T* m, T* v, T beta1, T beta2,
                      T step_size, T eps, T v_correction) {
  for (std::size_t i = 0; i < len; ++i) {
    const T g = grad[i];
    m[i] = beta1 * m[i] + (T(1) - beta1) * g;
    v[i] = beta2 * v[i] + (T(1) - beta2) * (g * g);
    param[i] -= step_size * m[i] / (std::sqrt(v[i] * v_correction) + eps);
  }
}

}  // namespace

#define REACHBOUND_SCALAR_DEFS(T)                                                            \
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

REACHBOUND_SCALAR_DEFS(float)
REACHBOUND_SCALAR_DEFS(double)

#undef REACHBOUND_SCALAR_DEFS

}  // namespace reachbound::kernels::scalar
