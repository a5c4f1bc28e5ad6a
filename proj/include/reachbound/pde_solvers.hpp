#pragma once

// Ground-truth generators on a GridSpec with zero-Dirichlet boundaries:
// leapfrog for the wave equation, forward Euler for heat, Jacobi for Poisson.

#include <cstddef>
#include <string>
#include <vector>

#include "reachbound/grid.hpp"

namespace reachbound::pde {

/// Node-major values: values[node * n_dof + channel].
struct FieldSnapshot {
  double time = 0.0;
  std::size_t n_dof = 1;
  std::vector<double> values;

  std::size_t node_count() const { return n_dof ? values.size() / n_dof : 0; }
  double at(std::size_t node, std::size_t ch = 0) const { return values[node * n_dof + ch]; }
  bool operator==(const FieldSnapshot&) const = default;
};

struct PhysicalConstants {
  double c = 0.5;      // wave speed
  double alpha = 1.0;  // thermal diffusivity
  double eps0 = 1.0;   // permittivity scale
  bool operator==(const PhysicalConstants&) const = default;
};

struct SolverMeta {
  std::string scheme;
  double dt = 0.0;
  std::size_t record_every = 1;
  PhysicalConstants constants;
  std::size_t iterations = 0;  // Jacobi sweeps for elliptic samples
};

struct Trajectory {
  grid::GridSpec grid;
  std::vector<FieldSnapshot> snapshots;
  SolverMeta meta;
};

/// Field sampled from f(x, y) at every node; boundary forced to zero when requested.
template <class F>
FieldSnapshot sample_field(const grid::GridSpec& g, F&& f, bool zero_boundary = true) {
  FieldSnapshot s;
  s.values.resize(g.node_count());
  for (std::size_t i = 0; i < g.node_count(); ++i)
    s.values[i] = (zero_boundary && g.is_boundary(i)) ? 0.0 : f(g.x_of(i), g.y_of(i));
  return s;
}

/// c * dt / dx; the square-grid CFL limit is 1/sqrt(2).
double wave_courant(const grid::GridSpec& g, double c, double dt);
/// alpha * dt / dx^2; the explicit limit is 1/4.
double heat_stability_ratio(const grid::GridSpec& g, double alpha, double dt);

/// Snapshots carry two channels: displacement u and velocity du/dt. Every
/// `record_every`-th step is kept (n_steps must be a multiple).
/// Throws StabilityError if c*dt/dx > 1/sqrt(2).
Trajectory solve_wave(const grid::GridSpec& g, double c, double dt, std::size_t n_steps,
                      const FieldSnapshot& u0, const FieldSnapshot& v0,
                      std::size_t record_every = 1);

/// Throws StabilityError if alpha*dt/dx^2 > 1/4.
Trajectory solve_heat(const grid::GridSpec& g, double alpha, double dt, std::size_t n_steps,
                      const FieldSnapshot& u0, std::size_t record_every = 1);

struct PoissonResult {
  FieldSnapshot u;
  std::size_t iterations = 0;
  double residual = 0.0;  // interior max-norm of lap(u) + rho/eps0
  std::vector<double> residual_history;
};

/// Iterates until the interior residual is <= tol; throws ConvergenceError
/// (carrying the final residual) when max_iters is exhausted.
PoissonResult solve_poisson_jacobi(const grid::GridSpec& g, const FieldSnapshot& rho, double eps0,
                                   double tol, std::size_t max_iters,
                                   bool keep_history = false);

/// Interior max-norm of lap(u) + rho/eps0 with the 5-point stencil.
double poisson_residual(const grid::GridSpec& g, const FieldSnapshot& u, const FieldSnapshot& rho,
                        double eps0);

}  // namespace reachbound::pde
