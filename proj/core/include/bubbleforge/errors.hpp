#pragma once

#include <stdexcept>
#include <string>

namespace bubbleforge {

/// Invalid user input: bad domain spec, resolution, parameters.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Geometric precondition violated (point outside domain, degenerate grid, ...).
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical solve failed: factorization, iteration cap, divergence.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, int iterations = 0, double residual = 0.0)
      : std::runtime_error(what), iterations_(iterations), residual_(residual) {}

  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  int iterations_;
  double residual_;
};

/// A construction step refused its input (inadmissible configuration,
/// unresolvable spike, pole too close to the boundary).
class ConstructionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bubbleforge
