#include <doctest.h>

#include <cmath>
#include <numbers>

#include "reachbound/errors.hpp"
#include "reachbound/pde_solvers.hpp"

using namespace reachbound;
using namespace reachbound::pde;
using std::numbers::pi;

namespace {

grid::GridSpec unit_square(double dx) {
  const auto n = std::size_t(std::llround(1.0 / dx)) + 1;
  return {n, n, dx, dx};
}

FieldSnapshot eigenmode(const grid::GridSpec& g) {
  return sample_field(g, [](double x, double y) { return std::sin(pi * x) * std::sin(pi * y); });
}

FieldSnapshot zeros(const grid::GridSpec& g) { return {0.0, 1, std::vector<double>(g.node_count(), 0.0)}; }

double rel_l2(const std::vector<double>& a, const std::vector<double>& b, std::size_t stride = 1,
              std::size_t offset = 0) {
  double e = 0, s = 0;
  for (std::size_t i = offset, k = 0; i < a.size(); i += stride, ++k) {
    e += (a[i] - b[k]) * (a[i] - b[k]);
    s += b[k] * b[k];
  }
  return std::sqrt(e / s);
}

std::vector<double> channel(const FieldSnapshot& s, std::size_t c) {
  std::vector<double> out;
  for (std::size_t i = c; i < s.values.size(); i += s.n_dof) out.push_back(s.values[i]);
  return out;
}

}  // namespace

TEST_CASE("wave: zero data stays zero") {
  const auto g = unit_square(0.1);
  const auto t = solve_wave(g, 0.5, 0.01, 20, zeros(g), zeros(g));
  CHECK(t.snapshots.size() == 21);
  for (const auto& s : t.snapshots)
    for (double v : s.values) CHECK(v == 0.0);
}

TEST_CASE("wave: separable eigenmode at t = 2") {
  const auto g = unit_square(0.02);
  const double c = 0.5, dt = 0.001;
  const auto t = solve_wave(g, c, dt, 2000, eigenmode(g), zeros(g), 2000);
  REQUIRE(t.snapshots.size() == 2);
  const auto& last = t.snapshots.back();
  CHECK(last.time == doctest::Approx(2.0));
  auto exact = eigenmode(g).values;
  for (auto& v : exact) v *= std::cos(std::sqrt(2.0) * pi * c * 2.0);
  CHECK(rel_l2(channel(last, 0), exact) < 1e-2);
  for (std::size_t i = 0; i < g.node_count(); ++i)
    if (g.is_boundary(i)) {
      CHECK(last.values[2 * i] == 0.0);
      CHECK(last.values[2 * i + 1] == 0.0);
    }
}

TEST_CASE("wave: time reversal returns the initial field") {
  const auto g = unit_square(0.05);
  const auto u0 = sample_field(g, [](double x, double y) {
    return std::exp(-60.0 * ((x - 0.4) * (x - 0.4) + (y - 0.55) * (y - 0.55)));
  });
  const std::size_t n = 400;
  const auto fwd = solve_wave(g, 0.5, 0.01, n, u0, zeros(g), n);
  const auto& end = fwd.snapshots.back();
  FieldSnapshot uN{0, 1, channel(end, 0)}, vN{0, 1, channel(end, 1)};
  for (auto& v : vN.values) v = -v;
  const auto back = solve_wave(g, 0.5, 0.01, n, uN, vN, n);
  const auto u_back = channel(back.snapshots.back(), 0);
  double err = 0;
  for (std::size_t i = 0; i < u_back.size(); ++i) err = std::max(err, std::abs(u_back[i] - u0.values[i]));
  CHECK(err < 1e-8);
}

TEST_CASE("wave: CFL limit enforced, default configuration accepted") {
  const grid::GridSpec g{25, 25, 0.04, 0.04};
  CHECK(wave_courant(g, 0.5, 0.001) == doctest::Approx(0.0125));
  CHECK_NOTHROW(solve_wave(g, 0.5, 0.001, 1, zeros(g), zeros(g)));
  CHECK_THROWS_AS(solve_wave(g, 0.5, 0.06, 1, zeros(g), zeros(g)), StabilityError);
}

TEST_CASE("heat: zero stays zero, eigenmode decays at the analytic rate") {
  const auto g = unit_square(0.1);
  const auto z = solve_heat(g, 1.0, 0.0004, 50, zeros(g));
  for (const auto& s : z.snapshots)
    for (double v : s.values) CHECK(v == 0.0);

  const double dt = 0.0004;
  const auto t = solve_heat(g, 1.0, dt, 500, eigenmode(g), 1);
  const auto base = eigenmode(g).values;
  double worst = 0.0;
  for (const auto& s : t.snapshots) {
    auto exact = base;
    for (auto& v : exact) v *= std::exp(-2.0 * pi * pi * s.time);
    worst = std::max(worst, rel_l2(s.values, exact));
  }
  CHECK(worst < 2e-2);
}

TEST_CASE("heat: maximum principle and non-increasing max norm") {
  const auto g = unit_square(0.05);
  const auto u0 = sample_field(g, [](double x, double y) {
    return std::exp(-40.0 * ((x - 0.3) * (x - 0.3) + (y - 0.6) * (y - 0.6))) -
           0.5 * std::exp(-80.0 * ((x - 0.7) * (x - 0.7) + (y - 0.3) * (y - 0.3)));
  });
  const auto t = solve_heat(g, 1.0, 0.25 * g.dx * g.dx, 200, u0);
  double prev_norm = INFINITY;
  for (std::size_t k = 0; k + 1 < t.snapshots.size(); ++k) {
    const auto& a = t.snapshots[k].values;
    const auto& b = t.snapshots[k + 1].values;
    const double lo = std::min(0.0, *std::min_element(a.begin(), a.end()));
    const double hi = std::max(0.0, *std::max_element(a.begin(), a.end()));
    double norm = 0;
    for (std::size_t i = 0; i < b.size(); ++i) {
      CHECK(b[i] >= lo - 1e-15);
      CHECK(b[i] <= hi + 1e-15);
      norm = std::max(norm, std::abs(a[i]));
    }
    CHECK(norm <= prev_norm + 1e-15);
    prev_norm = norm;
  }
}

TEST_CASE("heat: stability limit, default configuration accepted") {
  const grid::GridSpec g{10, 10, 0.1, 0.1};
  CHECK(heat_stability_ratio(g, 1.0, 0.0004) == doctest::Approx(0.04));
  CHECK_THROWS_AS(solve_heat(g, 1.0, 0.003, 1, zeros(g)), StabilityError);
}

TEST_CASE("poisson: zero source gives zero potential") {
  const auto g = unit_square(0.1);
  const auto r = solve_poisson_jacobi(g, zeros(g), 1.0, 1e-10, 10);
  CHECK(r.iterations == 0);
  for (double v : r.u.values) CHECK(v == 0.0);
}

TEST_CASE("poisson: manufactured solution converges at second order") {
  auto max_err = [](double dx) {
    const auto g = unit_square(dx);
    auto rho = sample_field(g, [](double x, double y) {
      return 2.0 * pi * pi * std::sin(pi * x) * std::sin(pi * y);
    });
    const auto r = solve_poisson_jacobi(g, rho, 1.0, 1e-10, 1000000);
    const auto exact = eigenmode(g).values;
    double e = 0;
    for (std::size_t i = 0; i < exact.size(); ++i) e = std::max(e, std::abs(r.u.values[i] - exact[i]));
    return e;
  };
  const double ratio = max_err(0.1) / max_err(0.05);
  CHECK(ratio == doctest::Approx(4.0).epsilon(0.2));
}

TEST_CASE("poisson: residual history is monotone and the tolerance is met") {
  const grid::GridSpec g{10, 10, 0.1, 0.1};
  FieldSnapshot rho = zeros(g);
  rho.values[g.node(3, 4)] = 1.2;
  rho.values[g.node(6, 6)] = -0.7;
  const auto r = solve_poisson_jacobi(g, rho, 1.0, 1e-8, 1000000, true);
  CHECK(r.residual <= 1e-8);
  CHECK(poisson_residual(g, r.u, rho, 1.0) <= 1e-8);
  for (std::size_t k = 1; k < r.residual_history.size(); ++k)
    CHECK(r.residual_history[k] <= r.residual_history[k - 1] * (1 + 1e-12));
  for (std::size_t i = 0; i < g.node_count(); ++i)
    if (g.is_boundary(i)) CHECK(r.u.values[i] == 0.0);
}

TEST_CASE("poisson: non-convergence is reported with the final residual") {
  const grid::GridSpec g{10, 10, 0.1, 0.1};
  FieldSnapshot rho = zeros(g);
  rho.values[g.node(4, 4)] = 1.0;
  try {
    solve_poisson_jacobi(g, rho, 1.0, 1e-12, 5);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.iterations == 5);
    CHECK(e.residual > 1e-12);
  }
}

TEST_CASE("solvers are deterministic") {
  const auto g = unit_square(0.1);
  const auto a = solve_wave(g, 0.5, 0.01, 30, eigenmode(g), zeros(g), 3);
  const auto b = solve_wave(g, 0.5, 0.01, 30, eigenmode(g), zeros(g), 3);
  for (std::size_t k = 0; k < a.snapshots.size(); ++k) CHECK(a.snapshots[k].values == b.snapshots[k].values);
}
