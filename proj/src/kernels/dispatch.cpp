#include "reachbound/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace reachbound::kernels {
namespace {

bool cpu_has_avx2() {
#if REACHBOUND_WITH_AVX2 && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa best_isa() { return cpu_has_avx2() ? Isa::avx2 : Isa::scalar; }

Isa initial_isa() {
  if (const char* env = std::getenv("REACHBOUND_SIMD")) {
    const std::string v(env);
    if (v == "scalar") return Isa::scalar;
    if (v == "avx2" && cpu_has_avx2()) return Isa::avx2;
  }
  return best_isa();
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2: return cpu_has_avx2();
  }
  return false;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  if (!isa_supported(isa))
    throw std::invalid_argument("instruction set not supported: " + std::string(isa_name(isa)));
  current().store(isa, std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::avx2: return "avx2";
    default: return "scalar";
  }
}

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::scalar;
  if (name == "avx2") return Isa::avx2;
  throw std::invalid_argument("unknown instruction set: " + std::string(name));
}

#if REACHBOUND_WITH_AVX2
#define REACHBOUND_DISPATCH(fn, ...) \
  (active_isa() == Isa::avx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__))
#else
#define REACHBOUND_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

#define REACHBOUND_DISPATCH_DEFS(T)                                                          \
  void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,       \
            bool accumulate) {                                                               \
    REACHBOUND_DISPATCH(gemm, m, n, k, a, b, c, accumulate);                                 \
  }                                                                                          \
  void bias_act(std::size_t m, std::size_t n, T* x, const T* bias, bool relu) {              \
    REACHBOUND_DISPATCH(bias_act, m, n, x, bias, relu);                                      \
  }                                                                                          \
  void relu_backward(std::size_t len, const T* pre, T* dy) {                                 \
    REACHBOUND_DISPATCH(relu_backward, len, pre, dy);                                        \
  }                                                                                          \
  void col_sum(std::size_t m, std::size_t n, const T* x, T* out, bool accumulate) {          \
    REACHBOUND_DISPATCH(col_sum, m, n, x, out, accumulate);                                  \
  }                                                                                          \
  void axpy(std::size_t len, T alpha, const T* x, T* y) {                                    \
    REACHBOUND_DISPATCH(axpy, len, alpha, x, y);                                             \
  }                                                                                          \
  T dot(std::size_t len, const T* x, const T* y) { return REACHBOUND_DISPATCH(dot, len, x, y); } \
  void edge_relu_sum(const CsrView& g, std::size_t h, const T* pq, const T* bias, T* s) {    \
    REACHBOUND_DISPATCH(edge_relu_sum, g, h, pq, bias, s);                                   \
  }                                                                                          \
  void edge_relu_sum_backward(const CsrView& g, std::size_t h, const T* pq, const T* bias,   \
                              const T* ds, T* dpq, T* dbias) {                               \
    REACHBOUND_DISPATCH(edge_relu_sum_backward, g, h, pq, bias, ds, dpq, dbias);             \
  }                                                                                          \
  void edge_relu_rows(const CsrView& g, std::size_t h, const T* pq, const T* bias, T* out) { \
    REACHBOUND_DISPATCH(edge_relu_rows, g, h, pq, bias, out);                                \
  }                                                                                          \
  void edge_relu_rows_backward(const CsrView& g, std::size_t h, const T* pq, const T* bias,  \
                               const T* dout, T* dpq, T* dbias) {                            \
    REACHBOUND_DISPATCH(edge_relu_rows_backward, g, h, pq, bias, dout, dpq, dbias);          \
  }                                                                                          \
  void segment_sum(const CsrView& g, std::size_t h, const T* rows, T* s) {                   \
    REACHBOUND_DISPATCH(segment_sum, g, h, rows, s);                                         \
  }                                                                                          \
  void adam_update(std::size_t len, T* param, const T* grad, T* m, T* v, T beta1, T beta2,   \
                   T step_size, T eps, T v_correction) {                                     \
    REACHBOUND_DISPATCH(adam_update, len, param, grad, m, v, beta1, beta2, step_size, eps,   \
                        v_correction);                                                       \
  }

REACHBOUND_DISPATCH_DEFS(float)
REACHBOUND_DISPATCH_DEFS(double)

}  // namespace reachbound::kernels
