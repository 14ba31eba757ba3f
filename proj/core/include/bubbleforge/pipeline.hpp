#pragma once

// End-to-end construction: optimise the spike configuration, regrid
// around it, assemble the ansatz, correct it, refine with Newton and
// measure the result.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bubbleforge/corrector.hpp"
#include "bubbleforge/energy.hpp"

namespace bubbleforge {

struct RunConfig {
  std::string domain = "disk";  ///< Domain::parse spec
  int n = 257;                  ///< lines per axis of the graded solve grid, odd
  std::size_t m = 1;
  double s = 10.0;
  std::optional<double> beta;  ///< default m^2 + m + 1
  std::string forcing = "zero";  ///< Forcing::parse spec
  double lambda_threshold = 0.9;
  std::filesystem::path output;  ///< no artifacts when empty
  bool trace = false;
  bool dump_fields = false;
  std::uint64_t seed = 0;
  int coarse_n = 129;  ///< uniform grid of the first optimisation

  /// Throws ConfigError: n odd and >= 17, m >= 1, s > 0, threshold in (0, 1).
  void validate() const;
  double effective_beta() const;
};

struct SpikeMass {
  Point xi;
  double radius = 0.0;
  double mass = 0.0;
};

struct Diagnostics {
  double mass = 0.0;      ///< int k e^{-s phi_1} e^u
  double mass_in1 = 0.0;  ///< int e^{u_in1}
  double mass_ratio = 0.0;  ///< mass / (8 pi m)
  std::vector<SpikeMass> spike_masses;  ///< balls B(xi_j, separation / 3)
  double exterior_mass = 0.0;
  std::vector<Spike> spikes;
  bool spikes_in_lambda = false;
  double min_separation = 0.0;  ///< over detected spikes; +inf for one spike
  double separation_bound = 0.0;  ///< s^{-m(m+1)}
  double distance_to_maximum = 0.0;  ///< max over spikes of |spike - argmax phi_1|
  double far_field = 0.0;
  double energy_discrepancy = 0.0;
  double j_full = 0.0;
  double j_expansion = 0.0;
  double star_norm_final = 0.0;   ///< star norm of F(u) at the reduced configuration
  double star_norm_ansatz = 0.0;  ///< star norm of R at the optimised configuration
  double psi_contraction = 0.0;   ///< ||psi||_inf of the contraction at the optimised configuration
  double psi_tilde = 0.0;         ///< ||u - U||_inf at the reduced configuration
  double reduced_gradient = 0.0;  ///< |grad of the expansion| at the detected spikes
  double in3_residual = 0.0;
  double in1_residual = 0.0;
};

struct RunResult {
  RunConfig config;
  int exit_code = 0;  ///< 0 pass, 2 solver failure, 3 check failure
  std::string failed_stage;
  std::string error;
  std::vector<std::string> failed_checks;

  GridPtr grid;
  std::optional<ProblemData> data;
  OptimizationResult optimization;
  std::optional<Ansatz> ansatz;  ///< at the optimised configuration
  CorrectionResult contraction;
  std::optional<ReducedCorrection> reduction;
  std::optional<RefinedSolution> solution;
  Diagnostics diagnostics;

  bool passed() const { return exit_code == 0; }
};

/// Probes for the far-field check: a sub-lattice of interior nodes at
/// distance >= max(5 max_j a_j, 0.25) from every centre and >= 2 h_max
/// inside the boundary.
std::vector<Point> default_probes(const SpikeConfiguration& config, const ProblemData& data);

/// sup_p |u(p) - sum_i G(p, xi_i)|. Throws ConstructionError for a probe
/// closer than 5 max_j a_j to a centre.
double far_field_check(const ScalarField& u, const SpikeConfiguration& config, const ProblemData& data,
                       const std::vector<Point>& probes);

/// int over B(xi, r) of k e^{-s phi_1} e^u.
double ball_mass(const ScalarField& u, const ProblemData& data, Point xi, double r);

/// Runs every stage. Stage failures and a Newton run that neither converged
/// nor reached the rounding level are recorded with exit code 2. Failed
/// checks (residual above 1e-8, spike count != m, inadmissible final
/// configuration) give exit code 3. Throws ConfigError on an invalid config.
/// Writes artifacts when config.output is set.
RunResult run(const RunConfig& config);

/// One run per s value, concurrently on at most `threads` workers
/// (0: BUBBLEFORGE_THREADS, else hardware concurrency). Each entry writes
/// to output/s_<s> when output is set, and a sweep.csv summary is added.
std::vector<RunResult> sweep(const RunConfig& base, const std::vector<double>& s_values, unsigned threads = 0);

/// Worker count from BUBBLEFORGE_THREADS (when set and positive) capped by
/// the hardware concurrency.
unsigned worker_count();

/// Flat manifest: "#schema=1" then key=value lines, doubles in %.17g.
std::string manifest(const RunResult& result);
void write_artifacts(const RunResult& result, const std::filesystem::path& dir);

}  // namespace bubbleforge
