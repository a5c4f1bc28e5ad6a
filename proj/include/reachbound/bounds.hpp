#pragma once

// Lower bounds on the number of message-passing iterations.
//
// Hyperbolic: messages must outrun the wave, M * dx > sqrt(2) * c * dt, so M is
// the smallest integer strictly above sqrt(2) * c * dt / dx.
// Parabolic / elliptic: information must cross the domain, M = ceil(L / dx).

#include <cstddef>
#include <optional>
#include <string_view>

namespace reachbound::bounds {

enum class PdeClass { hyperbolic, parabolic, elliptic };

std::string_view pde_class_name(PdeClass c);
PdeClass parse_pde_class(std::string_view name);

struct BoundSpec {
  PdeClass pde_class = PdeClass::hyperbolic;
  std::optional<double> c;   // hyperbolic only
  std::optional<double> dt;  // surrogate time stride, hyperbolic only
  double dx = 0.0;
  std::optional<double> L;   // largest domain extent, geometric bounds only

  /// Throws std::invalid_argument when a required field is missing or non-positive.
  void validate() const;
};

/// The real-valued quantity the bound rounds: sqrt(2) c dt / dx or L / dx.
double bound_ratio(const BoundSpec& spec);
std::size_t mpi_lower_bound(const BoundSpec& spec);

enum class Reach { under, at_bound, above };
std::string_view reach_name(Reach r);

Reach check_under_reach(std::size_t m_model, const BoundSpec& spec);

}  // namespace reachbound::bounds
