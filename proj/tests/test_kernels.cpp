#include <doctest.h>

#include <array>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "reachbound/grid.hpp"
#include "reachbound/kernels.hpp"

using namespace reachbound;

namespace {

template <class T>
std::vector<T> random_vec(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(d(rng));
  return v;
}

template <class T>
double tol() {
  return std::is_same_v<T, float> ? 2e-5 : 1e-13;
}

template <class T>
void check_close(const std::vector<T>& a, const std::vector<T>& b, double scale) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    REQUIRE(std::abs(double(a[i]) - double(b[i])) <= tol<T>() * scale);
}

// naive triple loop, independent of both variants
template <class T>
std::vector<T> ref_gemm(std::size_t m, std::size_t n, std::size_t k, const std::vector<T>& a,
                        const std::vector<T>& b) {
  std::vector<T> c(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      long double s = 0;
      for (std::size_t p = 0; p < k; ++p) s += (long double)a[i * k + p] * b[p * n + j];
      c[i * n + j] = static_cast<T>(s);
    }
  return c;
}

}  // namespace

#if REACHBOUND_WITH_AVX2

TEST_CASE_TEMPLATE("gemm: scalar and avx2 agree with a naive product", T, float, double) {
  if (!kernels::isa_supported(kernels::Isa::avx2)) return;
  std::mt19937_64 rng(1);
  for (auto [m, n, k] : std::vector<std::array<std::size_t, 3>>{
           {1, 1, 1}, {5, 7, 3}, {6, 16, 8}, {13, 33, 17}, {64, 64, 64}, {7, 129, 5}, {100, 20, 300}}) {
    const auto a = random_vec<T>(m * k, rng), b = random_vec<T>(k * n, rng);
    const auto ref = ref_gemm(m, n, k, a, b);
    std::vector<T> cs(m * n), cv(m * n);
    kernels::scalar::gemm(m, n, k, a.data(), b.data(), cs.data(), false);
    kernels::avx2::gemm(m, n, k, a.data(), b.data(), cv.data(), false);
    check_close(cs, ref, double(k));
    check_close(cv, ref, double(k));

    // accumulate mode adds onto existing contents
    auto base = random_vec<T>(m * n, rng);
    auto acc_s = base, acc_v = base;
    kernels::scalar::gemm(m, n, k, a.data(), b.data(), acc_s.data(), true);
    kernels::avx2::gemm(m, n, k, a.data(), b.data(), acc_v.data(), true);
    for (std::size_t i = 0; i < m * n; ++i) base[i] += ref[i];
    check_close(acc_s, base, double(k));
    check_close(acc_v, base, double(k));
  }
}

TEST_CASE_TEMPLATE("elementwise kernels: avx2 matches scalar", T, float, double) {
  if (!kernels::isa_supported(kernels::Isa::avx2)) return;
  std::mt19937_64 rng(2);
  for (std::size_t m : {1u, 3u, 10u})
    for (std::size_t n : {1u, 7u, 8u, 9u, 31u, 64u}) {
      const auto x0 = random_vec<T>(m * n, rng), bias = random_vec<T>(n, rng);
      for (bool relu : {false, true}) {
        auto xs = x0, xv = x0;
        kernels::scalar::bias_act(m, n, xs.data(), bias.data(), relu);
        kernels::avx2::bias_act(m, n, xv.data(), bias.data(), relu);
        CHECK(xs == xv);
      }
      auto dys = random_vec<T>(m * n, rng), dyv = dys;
      kernels::scalar::relu_backward(m * n, x0.data(), dys.data());
      kernels::avx2::relu_backward(m * n, x0.data(), dyv.data());
      CHECK(dys == dyv);

      std::vector<T> ss(n, T(1)), sv(n, T(1));
      kernels::scalar::col_sum(m, n, x0.data(), ss.data(), true);
      kernels::avx2::col_sum(m, n, x0.data(), sv.data(), true);
      check_close(ss, sv, double(m));

      auto ys = random_vec<T>(m * n, rng), yv = ys;
      kernels::scalar::axpy(m * n, T(0.75), x0.data(), ys.data());
      kernels::avx2::axpy(m * n, T(0.75), x0.data(), yv.data());
      check_close(ys, yv, 1.0);

      const double ds = kernels::scalar::dot(m * n, x0.data(), ys.data());
      const double dv = kernels::avx2::dot(m * n, x0.data(), ys.data());
      CHECK(std::abs(ds - dv) <= tol<T>() * double(m * n));
    }
}

TEST_CASE_TEMPLATE("graph kernels: avx2 matches scalar", T, float, double) {
  if (!kernels::isa_supported(kernels::Isa::avx2)) return;
  std::mt19937_64 rng(3);
  const auto topo = grid::build_grid_graph({5, 4, 0.1, 0.1});
  const auto g = topo.csr();
  const std::size_t N = topo.node_count(), E = topo.edge_count();
  for (std::size_t h : {1u, 5u, 8u, 19u, 64u}) {
    const auto pq = random_vec<T>(N * 2 * h, rng), bias = random_vec<T>(h, rng);
    std::vector<T> ss(N * h), sv(N * h);
    kernels::scalar::edge_relu_sum(g, h, pq.data(), bias.data(), ss.data());
    kernels::avx2::edge_relu_sum(g, h, pq.data(), bias.data(), sv.data());
    check_close(ss, sv, 4.0);

    const auto ds = random_vec<T>(N * h, rng);
    std::vector<T> dpq_s(N * 2 * h), dpq_v(N * 2 * h), db_s(h), db_v(h);
    kernels::scalar::edge_relu_sum_backward(g, h, pq.data(), bias.data(), ds.data(), dpq_s.data(), db_s.data());
    kernels::avx2::edge_relu_sum_backward(g, h, pq.data(), bias.data(), ds.data(), dpq_v.data(), db_v.data());
    check_close(dpq_s, dpq_v, 4.0);
    check_close(db_s, db_v, double(E));

    std::vector<T> rs(E * h), rv(E * h);
    kernels::scalar::edge_relu_rows(g, h, pq.data(), bias.data(), rs.data());
    kernels::avx2::edge_relu_rows(g, h, pq.data(), bias.data(), rv.data());
    CHECK(rs == rv);

    // rows summed per node reproduce edge_relu_sum
    std::vector<T> seg_s(N * h), seg_v(N * h);
    kernels::scalar::segment_sum(g, h, rs.data(), seg_s.data());
    kernels::avx2::segment_sum(g, h, rs.data(), seg_v.data());
    check_close(seg_s, seg_v, 4.0);
    check_close(seg_s, ss, 4.0);

    const auto dout = random_vec<T>(E * h, rng);
    std::vector<T> r_dpq_s(N * 2 * h), r_dpq_v(N * 2 * h), r_db_s(h), r_db_v(h);
    kernels::scalar::edge_relu_rows_backward(g, h, pq.data(), bias.data(), dout.data(), r_dpq_s.data(), r_db_s.data());
    kernels::avx2::edge_relu_rows_backward(g, h, pq.data(), bias.data(), dout.data(), r_dpq_v.data(), r_db_v.data());
    check_close(r_dpq_s, r_dpq_v, 4.0);
    check_close(r_db_s, r_db_v, double(E));
  }
}

TEST_CASE_TEMPLATE("adam_update: avx2 matches scalar", T, float, double) {
  if (!kernels::isa_supported(kernels::Isa::avx2)) return;
  std::mt19937_64 rng(4);
  for (std::size_t len : {1u, 7u, 8u, 33u, 1000u}) {
    auto ps = random_vec<T>(len, rng), g = random_vec<T>(len, rng);
    auto ms = random_vec<T>(len, rng), vs = random_vec<T>(len, rng, 0.0, 1.0);
    auto pv = ps, mv = ms, vv = vs;
    kernels::scalar::adam_update(len, ps.data(), g.data(), ms.data(), vs.data(), T(0.9), T(0.999), T(1e-3), T(1e-8), T(2));
    kernels::avx2::adam_update(len, pv.data(), g.data(), mv.data(), vv.data(), T(0.9), T(0.999), T(1e-3), T(1e-8), T(2));
    check_close(ms, mv, 1.0);
    check_close(vs, vv, 1.0);
    check_close(ps, pv, 1.0);
  }
}

#endif

TEST_CASE("dispatch: scalar can always be selected and the choice sticks") {
  const auto before = kernels::active_isa();
  kernels::set_isa(kernels::Isa::scalar);
  CHECK(kernels::active_isa() == kernels::Isa::scalar);
  const double a[] = {1, 2, 3, 4}, b[] = {5, 6, 7, 8};
  double c[4];
  kernels::gemm(2, 2, 2, a, b, c, false);
  CHECK(c[0] == 19.0);
  CHECK(c[1] == 22.0);
  CHECK(c[2] == 43.0);
  CHECK(c[3] == 50.0);
  kernels::set_isa(before);
  CHECK(kernels::isa_name(kernels::Isa::avx2) == "avx2");
  CHECK(kernels::parse_isa("avx2") == kernels::Isa::avx2);
  CHECK_THROWS_AS(kernels::parse_isa("sse"), std::invalid_argument);
}
