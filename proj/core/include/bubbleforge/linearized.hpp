#pragma once

// L(psi) = Delta psi + W psi around an ansatz, the translation kernels
// Z_ij with cutoffs chi_j, and the projected solve
//   L(psi) = h + sum_ij c_ij chi_j Z_ij,  int chi_j Z_ij psi = 0,  psi = 0 on the boundary.

#include <array>
#include <memory>
#include <vector>

#include "bubbleforge/ansatz.hpp"

namespace bubbleforge {

/// Planar kernels: Z_0 = (|z|^2-1)/(|z|^2+1), Z_i = 4 z_i/(1+|z|^2).
double kernel_z(int i, Point z);

/// max |Delta_h Z_i + 8(1+|z|^2)^{-2} Z_i| over the nodes of a uniform n x n
/// grid on [-half_width, half_width]^2 (exact boundary data).
double planar_kernel_residual(int i, int n, double half_width = 4.0);

struct LinearizedOperator {
  SpikeConfiguration config;
  LaplacianPtr laplacian;
  ScalarField W;  ///< k e^{-s phi_1} e^U

  double mass() const { return integrate(W); }
};

LinearizedOperator build_operator(const Ansatz& ansatz, const ProblemData& data);

struct KernelBasis {
  double R0 = 10.0;
  std::vector<ScalarField> chi;                  ///< per spike
  std::vector<std::array<ScalarField, 2>> Z;     ///< Z_1j, Z_2j
  std::vector<std::array<ScalarField, 2>> cols;  ///< chi_j Z_ij

  std::size_t m() const { return chi.size(); }
};

/// chi_j is 1 inside R0 a_j and 0 beyond (R0 + 1) a_j (quintic
/// smoothstep), a_j = mu_j delta_j. Throws ConstructionError when two
/// cutoff supports overlap or a support leaves the domain.
KernelBasis build_kernel_basis(const SpikeConfiguration& config, const ProblemData& data, double R0 = 10.0);

struct ProjectedLinearSolve {
  ScalarField psi;
  std::vector<double> c;  ///< c_ij at index 2 j + (i - 1)
  double equation_residual = 0.0;    ///< relative, interior sup norm
  double constraint_residual = 0.0;  ///< max_ij |int chi_j Z_ij psi| / (||psi|| int |chi_j Z_ij|)
  double rcond = 0.0;
  int iterations = 1;

  double coefficient(int i, std::size_t j) const { return c[2 * j + static_cast<std::size_t>(i - 1)]; }
};

/// Factorised saddle system for one operator and basis. The multiplier
/// columns are scaled to unit Gram diagonal. Concurrent solves are safe.
class ProjectedSolver {
 public:
  ProjectedSolver(const LinearizedOperator& op, const KernelBasis& basis);

  ProjectedLinearSolve solve(const ScalarField& h) const;
  double rcond() const { return lu_->rcond(); }

 private:
  GridPtr grid_;
  SparseMatrix main_;                    ///< Delta_h + diag W over interior nodes
  std::vector<Eigen::VectorXd> cols_;    ///< scaled chi_j Z_ij on interior nodes
  std::vector<Eigen::VectorXd> wcols_;   ///< quadrature-weighted columns
  std::vector<double> col_scale_;
  std::vector<double> abs_mass_;         ///< int |chi_j Z_ij| (unscaled)
  std::unique_ptr<SparseLU> lu_;
};

ProjectedLinearSolve solve_projected(const LinearizedOperator& op, const KernelBasis& basis, const ScalarField& h);

}  // namespace bubbleforge
