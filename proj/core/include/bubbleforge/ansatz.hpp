#pragma once

// Spike configurations, Liouville bubbles, their harmonic corrections and
// the residual of the approximate solution U = sum_j (u_j + H_j).

#include <functional>
#include <vector>

#include "bubbleforge/problem.hpp"

namespace bubbleforge {

struct AdmissibilityReport {
  bool in_lambda = false;       ///< every xi_j in the closure of Lambda
  bool height = false;          ///< 1 - phi_1(xi_j) <= 1/sqrt(s)
  bool separation = false;      ///< min pairwise distance >= s^-beta
  double min_separation = 0.0;  ///< +inf for a single spike
  double max_height_deficit = 0.0;
  bool admissible() const { return in_lambda && height && separation; }
};

struct SpikeConfiguration {
  std::vector<Point> xi;
  double s = 0.0;
  double beta = 3.0;
  std::vector<double> mu;
  std::vector<double> delta_j;  ///< exp(-s phi_1(xi_j) / 2)
  std::vector<double> gamma;    ///< mu_j delta_j / delta
  std::vector<double> shift;    ///< s phi_1(xi_j) - log k(xi_j)
  double delta = 0.0;           ///< exp(-s / 2)
  AdmissibilityReport admissibility;

  std::size_t m() const { return xi.size(); }
  /// Physical spike radius mu_j delta_j.
  double scale(std::size_t j) const { return mu[j] * delta_j[j]; }
};

/// m^2 + m + 1.
double default_beta(std::size_t m);

AdmissibilityReport check_admissible(const std::vector<Point>& xi, double s, double beta, const ProblemData& data);

/// log 8 mu_k^2 = log k(xi_k) + H(xi_k, xi_k) + sum_{i != k} G(xi_i, xi_k).
/// Throws ConstructionError when two spikes are closer than 4h.
std::vector<double> compute_mu(const std::vector<Point>& xi, const ProblemData& data);

/// Fills scales and admissibility for spikes xi at the parameter data.s.
SpikeConfiguration make_configuration(std::vector<Point> xi, const ProblemData& data, double beta);
SpikeConfiguration make_configuration(std::vector<Point> xi, const ProblemData& data);

/// Grid grading focused on the spikes, h_min = min_j mu_j delta_j / 8.
GradingSpec grading_for(const SpikeConfiguration& config);

/// log 8a^2/(a^2+|x-xi|^2)^2 + s phi_1(xi) - log k(xi), a = mu delta_j.
ScalarField bubble_profile(Point xi, double mu, double delta_j, const ProblemData& data);
/// u_j at an arbitrary point.
double bubble_at(const SpikeConfiguration& config, std::size_t j, Point x);
/// 8a_j^2/(a_j^2+|x-xi_j|^2)^2 = -Delta u_j.
double bubble_density(const SpikeConfiguration& config, std::size_t j, Point x);

struct Ansatz {
  SpikeConfiguration config;
  std::vector<ScalarField> bubbles;      ///< u_j
  std::vector<ScalarField> corrections;  ///< H_j
  ScalarField U;
  ScalarField R;  ///< Delta U + k e^{-s phi_1} e^U with the bubbles differentiated exactly
  double star_norm = 0.0;
  /// sup |H_j - (H(., xi_j) - log 8 mu_j^2 + log k(xi_j))| per spike.
  std::vector<double> expansion_defect;
};

/// Builds u_j, H_j (harmonic with boundary data -u_j), U and R. Throws
/// ConstructionError for inadmissible configurations and for spikes with
/// mu_j delta_j below twice the local grid spacing.
Ansatz assemble_ansatz(const SpikeConfiguration& config, const ProblemData& data);

/// Residual with exact bubble Laplacians: -sum 8a^2/(a^2+r^2)^2 + k e^{-s phi_1} e^U.
ScalarField residual(const Ansatz& ansatz, const ProblemData& data);
/// Residual with the discrete Laplacian applied to U.
ScalarField discrete_residual(const Ansatz& ansatz, const ProblemData& data);

/// Star-norm weight in physical form, sum_j a_j/(a_j^2+r_j^2)^{3/2} + 1.
double star_weight(const SpikeConfiguration& config, Point x);
/// sup over interior nodes of |f| / star_weight, optionally restricted.
double star_norm(const ScalarField& f, const SpikeConfiguration& config,
                 const std::function<bool(Point)>& region = nullptr);
/// Same quantity through y = x/delta, R_s = delta^2 f and the scaled weight.
double star_norm_scaled(const ScalarField& f, const SpikeConfiguration& config);

}  // namespace bubbleforge
