#pragma once

// Nonlinear correction of the ansatz: the projected fixed point
// psi = -T(R + N(psi)), N(psi) = W (e^psi - 1 - psi), then damped Newton
// on the discrete equation Delta_h u + k e^{-s phi_1} e^u = 0.

#include <string>
#include <vector>

#include "bubbleforge/linearized.hpp"

namespace bubbleforge {

enum class ResidualMode {
  analytic,  ///< R with exact bubble Laplacians
  discrete,  ///< Delta_h U + k e^{-s phi_1} e^U
};

struct ContractionOptions {
  double tolerance = 1e-10;
  int max_iterations = 50;
  ResidualMode mode = ResidualMode::analytic;
};

struct CorrectionResult {
  ScalarField psi;
  std::vector<std::vector<double>> c_history;
  std::vector<double> factors;  ///< ||psi_{n+1} - psi_n|| / ||psi_n - psi_{n-1}||
  int iterations = 0;
  double psi_norm = 0.0;
  double fixed_point_residual = 0.0;  ///< last ||psi_{n+1} - psi_n||_inf
  bool converged = false;
  bool diverged = false;  ///< factor >= 1 on 3 consecutive steps, or non-finite iterate
};

/// N(psi) at interior nodes.
ScalarField nonlinear_term(const LinearizedOperator& op, const ScalarField& psi);

/// Picard iteration from psi = 0. Divergence is reported, not thrown.
CorrectionResult contract(const LinearizedOperator& op, const KernelBasis& basis, const Ansatz& ansatz,
                          const ProblemData& data, const ContractionOptions& options = {});

struct ReductionOptions {
  double tolerance = 1e-10;  ///< on delta^2 ||sum_ij c_ij chi_j Z_ij||_inf
  int max_iterations = 12;
  double fd_step = 0.02;  ///< finite-difference step in units of min_j a_j
  double max_move = 0.5;  ///< cap on a position update, units of min_j a_j
  ContractionOptions contraction{};
};

struct ReductionStep {
  int iteration = 0;
  double projection = 0.0;  ///< delta^2 ||sum c chi Z||_inf
  double move = 0.0;        ///< max_j |xi_j update|
};

struct ReducedCorrection {
  Ansatz ansatz;
  CorrectionResult correction;
  std::vector<ReductionStep> history;  ///< entry 0 is the starting point
  int iterations = 0;
  double projection = 0.0;
  bool converged = false;
};

/// delta^2 ||sum_ij c_ij chi_j Z_ij||_inf for the last multipliers of a contraction.
double projection_size(const CorrectionResult& c, const KernelBasis& basis, const ProblemData& data);

/// Moves the spike centres on a fixed grid until the multipliers c_ij of
/// the contraction vanish (finite-dimensional reduction). Newton in xi with
/// a forward-difference Jacobian and step halving.
ReducedCorrection reduce_positions(const SpikeConfiguration& initial, const ProblemData& data,
                                   const ReductionOptions& options = {});

struct Spike {
  Point location;
  double height = 0.0;
};

/// Strict local maxima over the 8-neighbourhood (closure nodes) among
/// interior nodes with u above fraction * max u.
std::vector<Spike> detect_spikes(const ScalarField& u, double fraction = 0.5);

/// Newton iterate kept in extended precision as u = shift + v at interior
/// nodes (boundary value 0). The shift is the peak height of the initial
/// guess, so v stays small where the stencil weights are large.
struct ExtendedIterate {
  long double shift = 0.0L;
  std::vector<long double> v;  ///< by interior index
};

ExtendedIterate to_extended(const ScalarField& u);
ScalarField to_field(const ExtendedIterate& x, const ProblemData& data);

/// F(u) = Delta_h u + k e^{-s phi_1} e^u evaluated in extended precision
/// (difference form), rounded to double.
ScalarField extended_in3_residual(const ExtendedIterate& x, const ProblemData& data);
/// Delta_h u1 + e^{u1} - s_in1 phi_1 - h for u1 = u - s phi_1 - rho, same
/// arithmetic.
ScalarField extended_in1_residual(const ExtendedIterate& x, const ProblemData& data);

struct NewtonOptions {
  double tolerance = 1e-8;  ///< on ||F||_inf
  double floor_factor = 1.0;  ///< stop once ||F|| <= floor_factor * RefinedSolution::floor
  int max_iterations = 25;
  int max_halvings = 8;
  std::size_t expected_spikes = 0;  ///< branch-loss check when nonzero
};

struct NewtonStep {
  int iteration = 0;
  double residual = 0.0;  ///< ||F||_inf after the step
  double damping = 1.0;
};

/// roundoff_floor: ||F|| reached the rounding level of its own
/// evaluation while still above the tolerance.
enum class NewtonStatus { converged, roundoff_floor, iteration_cap, line_search_failed, branch_lost };
std::string to_string(NewtonStatus s);

struct RefinedSolution {
  ScalarField u;           ///< rounded to double
  ExtendedIterate precise;  ///< the iterate itself
  int iterations = 0;
  double residual = 0.0;         ///< ||F||_inf in extended precision
  double scaled_residual = 0.0;  ///< delta^2 ||F||_inf, delta = e^{-s/2}
  double floor = 0.0;            ///< rounding level of the F evaluation at the final iterate
  double mass = 0.0;
  NewtonStatus status = NewtonStatus::iteration_cap;
  std::vector<NewtonStep> history;  ///< entry 0 is the initial residual
  std::vector<Spike> spikes;

  bool converged() const { return status == NewtonStatus::converged; }
  /// Converged, or stalled at the rounding level.
  bool settled() const { return converged() || status == NewtonStatus::roundoff_floor; }
};

/// Damped Newton on F(u) = Delta_h u + k e^{-s phi_1} e^u with zero boundary
/// data; Jacobian Delta_h + diag(k e^{-s phi_1} e^u) factorised in double,
/// F and the iterate in extended precision. Throws SolverError when a
/// Jacobian cannot be factorised.
RefinedSolution newton_refine(const ScalarField& u0, const ProblemData& data, const NewtonOptions& options = {});

}  // namespace bubbleforge
