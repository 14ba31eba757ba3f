#pragma once

// The energy J_s[u] = 1/2 int |grad u|^2 - int k e^{-s phi_1} e^u, its
// closed-form expansion at spike configurations, and maximisation of that
// expansion over admissible configurations.

#include <cstdint>
#include <optional>
#include <vector>

#include "bubbleforge/ansatz.hpp"

namespace bubbleforge {

struct EnergyReport {
  double j_full = 0.0;       ///< NaN when no field was evaluated
  double j_expansion = 0.0;  ///< interaction + height
  double discrepancy = 0.0;  ///< j_full - j_expansion
  double interaction = 0.0;  ///< 16 pi sum_{i != j} log|xi_i - xi_j| over ordered pairs
  double height = 0.0;       ///< 8 pi s sum_j phi_1(xi_j)
};

/// Plain grid quadrature of both terms.
double energy_full(const ScalarField& u, const ProblemData& data);

/// Closed form; throws ConstructionError for coincident spikes.
EnergyReport energy_expansion(const std::vector<Point>& xi, double s, const ProblemData& data);
/// Analytic gradient of the expansion with respect to each xi_k.
std::vector<Point> expansion_gradient(const std::vector<Point>& xi, double s, const ProblemData& data);

/// J_s[U] with the spike cores integrated in polar coordinates:
/// 1/2 int |grad U|^2 = 1/2 sum_j int U rho_j (rho_j = -Delta u_j), and the
/// exponential term split by smooth cutoffs into polar cores plus grid
/// quadrature.
double energy_of_ansatz(const Ansatz& ansatz, const ProblemData& data);
/// energy_of_ansatz against the expansion at the ansatz configuration.
EnergyReport energy_report(const Ansatz& ansatz, const ProblemData& data);

struct OptimizerOptions {
  int max_iterations = 5000;
  double step_tolerance = 1e-11;  ///< stop when the trial step falls below this length
  int rotations = 4;              ///< extra polygon starts with random orientation
  std::uint64_t seed = 0;
  double margin = 0.08 * 3.141592653589793;  ///< a rotation must beat the incumbent by this
  std::optional<double> beta;                ///< default m^2 + m + 1
};

struct OptimizerTraceRow {
  int start = 0;
  int iteration = 0;
  double value = 0.0;
  double step = 0.0;
};

struct OptimizationResult {
  SpikeConfiguration config;
  double value = 0.0;
  int iterations = 0;
  int start = 0;           ///< winning start (0 = unrotated polygon)
  bool stagnated = false;  ///< iteration cap reached before the step collapsed
  std::vector<OptimizerTraceRow> trace;
};

/// Projection onto the admissible set: spikes are moved up the gradient
/// of phi_1 onto the height / Lambda constraint, then pairs are pushed
/// apart to separation s^-beta; alternated at most 20 times.
std::vector<Point> project_admissible(std::vector<Point> xi, double s, double beta, const ProblemData& data);

/// Projected gradient ascent of the expansion from a regular m-gon of
/// radius 1/sqrt(s) around the maximiser of phi_1 (or from `seed`), with
/// rotated restarts. Throws ConstructionError when the admissible set is
/// empty.
OptimizationResult maximize_configuration(std::size_t m, const ProblemData& data,
                                          const std::optional<std::vector<Point>>& seed = std::nullopt,
                                          const OptimizerOptions& options = {});

/// Grid node where phi_1 attains its maximum.
Point phi_maximizer(const ProblemData& data);

}  // namespace bubbleforge
