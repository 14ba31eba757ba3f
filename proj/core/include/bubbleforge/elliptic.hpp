#pragma once

// Discrete Dirichlet Laplacian, linear solves, harmonic extensions and
// the principal eigenpair.

#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "bubbleforge/geometry.hpp"
#include "bubbleforge/linalg.hpp"

namespace bubbleforge {

/// Interior row coupled to a boundary value at `at` with weight `weight`:
/// (-Delta_h u)_row = (A u_int)_row - weight * g(at).
struct BoundaryCoupling {
  std::size_t row = 0;
  Point at;
  double weight = 0.0;
};

struct LaplacianOptions {
  /// Direct factorization up to this many interior nodes, Krylov beyond.
  std::size_t direct_limit = 600000;
  double iterative_tolerance = 1e-10;
  int max_iterations = 20000;
};

struct StructureReport {
  bool positive_diagonal = true;
  bool nonpositive_offdiagonal = true;
  bool row_balance = true;        ///< off-diagonals plus couplings sum to the diagonal
  bool symmetric_scaled = false;  ///< dual-area scaled matrix symmetric
  double max_row_defect = 0.0;
};

/// -Delta_h over interior nodes with Dirichlet values eliminated.
/// Shortley-Weller arms near curved boundaries; on tensor grids the
/// 5-point stencil uses the local arm lengths.
class DiscreteLaplacian {
 public:
  explicit DiscreteLaplacian(GridPtr grid, LaplacianOptions options = {});

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const SparseMatrix& matrix() const { return matrix_; }
  std::span<const BoundaryCoupling> couplings() const { return couplings_; }
  /// Diagonal scaling (dual cell areas) under which the matrix is symmetric
  /// when no stencil arm is cut.
  const Eigen::VectorXd& dual_areas() const { return dual_areas_; }
  const StructureReport& structure() const { return structure_; }
  bool uses_direct_solver() const { return grid_->interior_count() <= options_.direct_limit; }

  /// Boundary contribution sum_c weight_c g(at_c) per interior row.
  Eigen::VectorXd boundary_rhs(const PointFunction& g) const;
  /// -Delta_h u at interior nodes (zero elsewhere) for u vanishing on
  /// the boundary.
  ScalarField apply(const ScalarField& u) const;
  /// Same with Dirichlet data g.
  ScalarField apply(const ScalarField& u, const PointFunction& g) const;

  /// Solves A x = b for interior unknowns.
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  /// The LU factorization (built on first use; direct mode only).
  const SparseLU& factorization() const;

 private:
  Eigen::VectorXd solve_iterative(const Eigen::VectorXd& b) const;

  GridPtr grid_;
  LaplacianOptions options_;
  SparseMatrix matrix_;
  std::vector<BoundaryCoupling> couplings_;
  Eigen::VectorXd dual_areas_;
  StructureReport structure_;
  mutable std::once_flag factor_once_;
  mutable std::unique_ptr<SparseLU> lu_;
};

using LaplacianPtr = std::shared_ptr<const DiscreteLaplacian>;

/// Assembles the operator; throws GeometryError when the stencil does not
/// have M-matrix structure (degenerate grid).
LaplacianPtr assemble_laplacian(GridPtr grid, LaplacianOptions options = {});

/// Solves -Delta_h u = rhs in the interior with u = boundary on the
/// boundary. Throws SolverError when the relative residual exceeds 1e-10.
ScalarField solve_dirichlet(const DiscreteLaplacian& op, const ScalarField& rhs, const PointFunction& boundary);
ScalarField harmonic_extension(const DiscreteLaplacian& op, const PointFunction& boundary);

/// -Delta_h x in long double, difference form: sum_j w_qj (x_q - x_j) plus
/// the boundary couplings against `boundary`. Unlike matrix() * x this
/// annihilates constants exactly. mag, when given, gets sum w (|x_q| + |x_j|).
void minus_laplacian_extended(const DiscreteLaplacian& op, const std::vector<long double>& x, long double boundary,
                              std::vector<long double>& y, std::vector<long double>* mag = nullptr);

/// A x = b in long double by iterative refinement around the double
/// factorization.
std::vector<long double> solve_extended(const DiscreteLaplacian& op, const std::vector<long double>& b, int sweeps = 3);

struct EigenPair {
  double lambda = 0.0;
  ScalarField phi;  ///< precise_phi rounded
  int iterations = 0;
  double residual = 0.0;  ///< ||-Delta_h phi - lambda phi||_inf of the extended pair
  long double precise_lambda = 0.0L;
  std::vector<long double> precise_phi;  ///< by interior index
};

/// Inverse power iteration (shift 0). Stops when the Rayleigh quotient
/// changes by less than tol relative and the iterate has settled, then
/// polishes the pair in long double; phi is positive with maximum exactly 1.
EigenPair principal_eigenpair(const DiscreteLaplacian& op, double tol = 1e-13, int max_iterations = 500);

}  // namespace bubbleforge
