#pragma once

// Dense and graph inner-loop kernels.
//
// Every kernel exists as a portable scalar reference (namespace `scalar`) and,
// on x86-64 builds, an AVX2/FMA variant (namespace `avx2`). The unqualified
// entry points dispatch to the variant picked at startup; the choice can be
// pinned with REACHBOUND_SIMD=scalar|avx2 or set_isa().
//
// All matrices are dense row-major with contiguous rows. Graph kernels take a
// CSR view of incoming edges: node i receives from nbrs[offsets[i]..offsets[i+1]).

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace reachbound::kernels {

enum class Isa { scalar, avx2 };

Isa active_isa();
void set_isa(Isa isa);  // throws std::invalid_argument if unsupported on this CPU
bool isa_supported(Isa isa);
std::string_view isa_name(Isa isa);
Isa parse_isa(std::string_view name);  // throws std::invalid_argument

struct CsrView {
  std::size_t n_nodes = 0;
  const std::uint32_t* offsets = nullptr;  // n_nodes + 1 entries
  const std::uint32_t* nbrs = nullptr;     // offsets[n_nodes] entries
};

#define REACHBOUND_KERNEL_DECLS(T)                                                          \
  /* c[m x n] (+)= a[m x k] * b[k x n] */                                                   \
  void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,      \
            bool accumulate);                                                               \
  /* rows of x[m x n] += bias[n], then optional ReLU */                                     \
  void bias_act(std::size_t m, std::size_t n, T* x, const T* bias, bool relu);              \
  /* dz = dy where pre > 0, else 0 (in place on dy) */                                      \
  void relu_backward(std::size_t len, const T* pre, T* dy);                                 \
  /* out[n] (+)= column sums of x[m x n] */                                                 \
  void col_sum(std::size_t m, std::size_t n, const T* x, T* out, bool accumulate);          \
  /* y += alpha * x */                                                                      \
  void axpy(std::size_t len, T alpha, const T* x, T* y);                                    \
  T dot(std::size_t len, const T* x, const T* y);                                           \
  /* s_i = sum_{j in N(i)} relu(P_i + Q_j + bias), pq rows are [P | Q], width 2h */        \
  void edge_relu_sum(const CsrView& g, std::size_t h, const T* pq, const T* bias, T* s);    \
  /* reverse of edge_relu_sum: dpq += scatter of masked ds, dbias += masked ds */           \
  void edge_relu_sum_backward(const CsrView& g, std::size_t h, const T* pq, const T* bias,  \
                              const T* ds, T* dpq, T* dbias);                               \
  /* out[e] = relu(P_i + Q_j + bias) for every incoming edge e = (i <- j), CSR order */    \
  void edge_relu_rows(const CsrView& g, std::size_t h, const T* pq, const T* bias, T* out); \
  /* dpq/dbias += reverse of edge_relu_rows given per-edge upstream grads dout */           \
  void edge_relu_rows_backward(const CsrView& g, std::size_t h, const T* pq, const T* bias, \
                               const T* dout, T* dpq, T* dbias);                            \
  /* s_i = sum of rows[e] over node i's incoming edges */                                   \
  void segment_sum(const CsrView& g, std::size_t h, const T* rows, T* s);                   \
  /* bias-corrected Adam update on a flat array; step_size already includes correction */  \
  void adam_update(std::size_t len, T* param, const T* grad, T* m, T* v, T beta1, T beta2,  \
                   T step_size, T eps, T v_correction);

namespace scalar {
REACHBOUND_KERNEL_DECLS(float)
REACHBOUND_KERNEL_DECLS(double)
}  // namespace scalar

#if REACHBOUND_WITH_AVX2
namespace avx2 {
REACHBOUND_KERNEL_DECLS(float)
REACHBOUND_KERNEL_DECLS(double)
}  // namespace avx2
#endif

REACHBOUND_KERNEL_DECLS(float)
REACHBOUND_KERNEL_DECLS(double)

#undef REACHBOUND_KERNEL_DECLS

}  // namespace reachbound::kernels
