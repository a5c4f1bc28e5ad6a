#include "reachbound/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace reachbound::bounds {
namespace {

// Ratios such as 1 / 0.1 land within a few ulps of an integer.
constexpr double kIntegerSlack = 1e-9;

bool positive(const std::optional<double>& v) { return v && *v > 0.0 && std::isfinite(*v); }

}  // namespace

std::string_view pde_class_name(PdeClass c) {
  switch (c) {
    case PdeClass::hyperbolic: return "hyperbolic";
    case PdeClass::parabolic: return "parabolic";
    case PdeClass::elliptic: return "elliptic";
  }
  return "?";
}

PdeClass parse_pde_class(std::string_view name) {
  if (name == "hyperbolic" || name == "wave") return PdeClass::hyperbolic;
  if (name == "parabolic" || name == "heat") return PdeClass::parabolic;
  if (name == "elliptic" || name == "poisson") return PdeClass::elliptic;
  throw std::invalid_argument("unknown PDE class: " + std::string(name));
}

std::string_view reach_name(Reach r) {
  switch (r) {
    case Reach::under: return "under";
    case Reach::at_bound: return "at_bound";
    case Reach::above: return "above";
  }
  return "?";
}

void BoundSpec::validate() const {
  if (!(dx > 0.0) || !std::isfinite(dx)) throw std::invalid_argument("bound: dx must be positive");
  if (pde_class == PdeClass::hyperbolic) {
    if (!c) throw std::invalid_argument("bound: hyperbolic class requires c");
    if (!dt) throw std::invalid_argument("bound: hyperbolic class requires dt");
    if (!positive(c) || !positive(dt)) throw std::invalid_argument("bound: c and dt must be positive");
  } else {
    if (!L) throw std::invalid_argument("bound: geometric bound requires L");
    if (!positive(L)) throw std::invalid_argument("bound: L must be positive");
  }
}

double bound_ratio(const BoundSpec& spec) {
  spec.validate();
  if (spec.pde_class == PdeClass::hyperbolic) return std::sqrt(2.0) * *spec.c * *spec.dt / spec.dx;
  return *spec.L / spec.dx;
}

std::size_t mpi_lower_bound(const BoundSpec& spec) {
  const double r = bound_ratio(spec);
  const double nearest = std::round(r);
  const bool integral = std::abs(r - nearest) <= kIntegerSlack * std::max(1.0, r);
  double m = 0.0;
  if (spec.pde_class == PdeClass::hyperbolic)
    m = integral ? nearest + 1.0 : std::floor(r) + 1.0;  // strictly greater
  else
    m = integral ? nearest : std::ceil(r);
  return static_cast<std::size_t>(std::max(1.0, m));
}

Reach check_under_reach(std::size_t m_model, const BoundSpec& spec) {
  const auto bound = mpi_lower_bound(spec);
  if (m_model < bound) return Reach::under;
  if (m_model == bound) return Reach::at_bound;
  return Reach::above;
}

}  // namespace reachbound::bounds
