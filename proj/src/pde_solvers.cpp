#include "reachbound/pde_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "reachbound/errors.hpp"

namespace reachbound::pde {
namespace {

void check_field(const grid::GridSpec& g, const FieldSnapshot& f, const char* name) {
  if (f.n_dof != 1 || f.values.size() != g.node_count())
    throw std::invalid_argument(std::string(name) + " does not match the grid");
  for (double v : f.values)
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(name) + " has non-finite values");
}

// out = lap(u) on interior nodes, 0 on the boundary.
void laplacian(const grid::GridSpec& g, const std::vector<double>& u, std::vector<double>& out) {
  const double inv = 1.0 / (g.dx * g.dx);
  const std::size_t nx = g.nx;
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t r = 1; r + 1 < g.ny; ++r) {
    for (std::size_t c = 1; c + 1 < nx; ++c) {
      const std::size_t i = r * nx + c;
      out[i] = (u[i - 1] + u[i + 1] + u[i - nx] + u[i + nx] - 4.0 * u[i]) * inv;
    }
  }
}

void zero_boundary(const grid::GridSpec& g, std::vector<double>& u) {
  for (std::size_t i = 0; i < g.node_count(); ++i)
    if (g.is_boundary(i)) u[i] = 0.0;
}

void check_record_every(std::size_t n_steps, std::size_t record_every) {
  if (record_every == 0 || n_steps % record_every != 0)
    throw std::invalid_argument("n_steps must be a positive multiple of record_every");
}

}  // namespace

double wave_courant(const grid::GridSpec& g, double c, double dt) { return c * dt / g.dx; }

double heat_stability_ratio(const grid::GridSpec& g, double alpha, double dt) {
  return alpha * dt / (g.dx * g.dx);
}

Trajectory solve_wave(const grid::GridSpec& g, double c, double dt, std::size_t n_steps,
                      const FieldSnapshot& u0, const FieldSnapshot& v0, std::size_t record_every) {
  g.validate();
  if (!(c > 0.0) || !(dt > 0.0)) throw std::invalid_argument("solve_wave: c and dt must be positive");
  const double courant = wave_courant(g, c, dt);
  if (courant > 1.0 / std::sqrt(2.0)) {
    std::ostringstream msg;
    msg << "solve_wave: CFL violated, c*dt/dx = " << courant << " > 1/sqrt(2)";
    throw StabilityError(msg.str());
  }
  check_field(g, u0, "u0");
  check_field(g, v0, "v0");
  check_record_every(n_steps, record_every);

  const std::size_t n = g.node_count();
  const double k2 = c * c * dt * dt;
  Trajectory traj;
  traj.grid = g;
  traj.meta = {"leapfrog-fd5", dt, record_every, PhysicalConstants{c, 1.0, 1.0}};

  auto record = [&](std::size_t step, const std::vector<double>& u, const std::vector<double>& v) {
    FieldSnapshot s;
    s.time = double(step) * dt;
    s.n_dof = 2;
    s.values.resize(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      s.values[2 * i] = u[i];
      s.values[2 * i + 1] = v[i];
    }
    traj.snapshots.push_back(std::move(s));
  };

  std::vector<double> prev = u0.values, cur(n), next(n), lap(n), vel = v0.values;
  zero_boundary(g, prev);
  zero_boundary(g, vel);
  record(0, prev, vel);
  if (n_steps == 0) return traj;

  // Taylor bootstrap: u^1 = u^0 + dt v^0 + dt^2/2 c^2 lap u^0
  laplacian(g, prev, lap);
  for (std::size_t i = 0; i < n; ++i) cur[i] = prev[i] + dt * vel[i] + 0.5 * k2 * lap[i];
  zero_boundary(g, cur);

  for (std::size_t step = 1; step <= n_steps; ++step) {
    laplacian(g, cur, lap);
    for (std::size_t i = 0; i < n; ++i) next[i] = 2.0 * cur[i] - prev[i] + k2 * lap[i];
    zero_boundary(g, next);
    if (step % record_every == 0) {
      for (std::size_t i = 0; i < n; ++i) vel[i] = (next[i] - prev[i]) / (2.0 * dt);
      record(step, cur, vel);
    }
    std::swap(prev, cur);
    std::swap(cur, next);
  }
  return traj;
}

Trajectory solve_heat(const grid::GridSpec& g, double alpha, double dt, std::size_t n_steps,
                      const FieldSnapshot& u0, std::size_t record_every) {
  g.validate();
  if (!(alpha > 0.0) || !(dt > 0.0))
    throw std::invalid_argument("solve_heat: alpha and dt must be positive");
  const double ratio = heat_stability_ratio(g, alpha, dt);
  if (ratio > 0.25) {
    std::ostringstream msg;
    msg << "solve_heat: explicit stability violated, alpha*dt/dx^2 = " << ratio << " > 1/4";
    throw StabilityError(msg.str());
  }
  check_field(g, u0, "u0");
  check_record_every(n_steps, record_every);

  const std::size_t n = g.node_count();
  Trajectory traj;
  traj.grid = g;
  traj.meta = {"euler-fd5", dt, record_every, PhysicalConstants{0.5, alpha, 1.0}};

  std::vector<double> u = u0.values, lap(n);
  zero_boundary(g, u);
  traj.snapshots.push_back({0.0, 1, u});
  for (std::size_t step = 1; step <= n_steps; ++step) {
    laplacian(g, u, lap);
    for (std::size_t i = 0; i < n; ++i) u[i] += alpha * dt * lap[i];
    if (step % record_every == 0) traj.snapshots.push_back({double(step) * dt, 1, u});
  }
  return traj;
}

double poisson_residual(const grid::GridSpec& g, const FieldSnapshot& u, const FieldSnapshot& rho,
                        double eps0) {
  std::vector<double> lap(g.node_count());
  laplacian(g, u.values, lap);
  double r = 0.0;
  for (std::size_t i = 0; i < g.node_count(); ++i)
    if (!g.is_boundary(i)) r = std::max(r, std::abs(lap[i] + rho.values[i] / eps0));
  return r;
}

PoissonResult solve_poisson_jacobi(const grid::GridSpec& g, const FieldSnapshot& rho, double eps0,
                                   double tol, std::size_t max_iters, bool keep_history) {
  g.validate();
  check_field(g, rho, "rho");
  if (!(tol > 0.0)) throw std::invalid_argument("solve_poisson_jacobi: tol must be positive");
  if (!(eps0 > 0.0)) throw std::invalid_argument("solve_poisson_jacobi: eps0 must be positive");

  const std::size_t n = g.node_count(), nx = g.nx;
  const double h2 = g.dx * g.dx;
  std::vector<double> src(n);
  for (std::size_t i = 0; i < n; ++i) src[i] = h2 * rho.values[i] / eps0;

  PoissonResult res;
  res.u.values.assign(n, 0.0);
  std::vector<double> next(n, 0.0);
  for (std::size_t it = 0;; ++it) {
    res.residual = poisson_residual(g, res.u, rho, eps0);
    if (keep_history) res.residual_history.push_back(res.residual);
    res.iterations = it;
    if (res.residual <= tol) return res;
    if (it == max_iters) {
      std::ostringstream msg;
      msg << "Jacobi did not converge in " << max_iters << " iterations (residual " << res.residual
          << " > " << tol << ")";
      throw ConvergenceError(msg.str(), it, res.residual);
    }
    auto& u = res.u.values;
    for (std::size_t r = 1; r + 1 < g.ny; ++r)
      for (std::size_t c = 1; c + 1 < nx; ++c) {
        const std::size_t i = r * nx + c;
        next[i] = 0.25 * (u[i - 1] + u[i + 1] + u[i - nx] + u[i + nx] + src[i]);
      }
    std::swap(u, next);
  }
}

}  // namespace reachbound::pde
