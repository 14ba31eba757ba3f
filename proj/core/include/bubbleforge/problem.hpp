#pragma once

// Transformation between Delta u + e^u = s phi_1 + h and
// Delta u + k e^{-s phi_1} e^u = 0, with k = e^{-rho}, rho = (-Delta)^{-1} h.

#include <memory>
#include <string>
#include <vector>

#include "bubbleforge/green.hpp"

namespace bubbleforge {

/// Source of the forcing h.
struct Forcing {
  enum class Kind { zero, eigenmode, function };
  Kind kind = Kind::zero;
  PointFunction function;
  std::string label = "zero";

  static Forcing zero() { return {}; }
  /// h = lambda_1 phi_1, so rho = phi_1.
  static Forcing eigenmode() { return {Kind::eigenmode, nullptr, "eigenmode"}; }
  static Forcing from_function(PointFunction f, std::string label = "function") {
    return {Kind::function, std::move(f), std::move(label)};
  }
  /// CSV field file (x,y,value), sampled bilinearly.
  static Forcing from_csv(const std::string& path);
  /// "zero", "eigenmode" or a path to a CSV field.
  static Forcing parse(const std::string& spec);
};

struct SetupOptions {
  double lambda_threshold = 0.9;
  double eigen_tolerance = 1e-13;
  LaplacianOptions laplacian;
};

struct ProblemData {
  GridPtr grid;
  LaplacianPtr laplacian;
  std::shared_ptr<const GreenEvaluator> green;
  EigenPair eigen;
  std::shared_ptr<const SmoothSampler> phi_sampler;
  ScalarField h;
  ScalarField rho;
  std::vector<long double> rho_precise;  ///< rho by interior index, extended precision
  ScalarField k;
  double s_in1 = 0.0;
  double s = 0.0;  ///< s_in1 / lambda_1
  double lambda_threshold = 0.9;
  std::string forcing_label;

  const Domain& domain() const { return grid->domain(); }
  double lambda1() const { return eigen.lambda; }
  /// phi_1 through the C1 sampler.
  double phi(Point x) const { return phi_sampler->value(x); }
  double log_k(Point x) const { return -interpolate(rho, x); }
  /// Closure of Lambda = {phi_1 > threshold}.
  bool in_lambda(Point x) const { return phi(x) >= lambda_threshold; }
  /// log of the coefficient k e^{-s phi_1} at node i.
  double log_weight(std::size_t node) const { return -rho[node] - s * eigen.phi[node]; }
};

/// Eigenpair, rho and k on `grid`; stores s = s_in1 / lambda_1.
ProblemData setup(GridPtr grid, const Forcing& forcing, double s_in1, const SetupOptions& options = {});
/// Same with the transformed parameter given directly (s_in1 = lambda_1 s).
ProblemData setup_in3(GridPtr grid, const Forcing& forcing, double s, const SetupOptions& options = {});

struct LambdaCheck {
  double sup_inside = 0.0;    ///< max phi_1 over nodes of Lambda
  double sup_boundary = 0.0;  ///< max phi_1 over Lambda nodes adjacent to its complement
  bool connected = false;
  bool contains_maximum = false;
  bool holds() const { return sup_boundary < sup_inside && contains_maximum; }
};
LambdaCheck check_lambda(const ProblemData& data);

/// u_in3 - s phi_1 - rho (with s phi_1 = (s_in1/lambda_1) phi_1).
ScalarField to_in1_solution(const ScalarField& u_in3, const ProblemData& data);
ScalarField to_in3_solution(const ScalarField& u_in1, const ProblemData& data);

/// Delta_h u + k e^{-s phi_1} e^u at interior nodes (zero elsewhere), for
/// u with zero boundary data.
ScalarField in3_residual(const ScalarField& u, const ProblemData& data);
/// Delta_h u + e^u - s_in1 phi_1 - h at interior nodes, boundary data
/// -s phi_1 - rho = 0 on the boundary.
ScalarField in1_residual(const ScalarField& u, const ProblemData& data);

/// int k e^{-s phi_1} e^u, exponentials with max subtraction.
double in3_mass(const ScalarField& u, const ProblemData& data);
/// int e^u.
double in1_mass(const ScalarField& u, const ProblemData& data);

}  // namespace bubbleforge
