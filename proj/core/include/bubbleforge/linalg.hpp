#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace bubbleforge {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Triplet = Eigen::Triplet<double, int>;

/// Sparse LU factorization (UMFPACK). The factorization is immutable once
/// built; solve() keeps its scratch on the stack, so concurrent solves
/// against one instance are safe.
class SparseLU {
 public:
  explicit SparseLU(const SparseMatrix& a);
  ~SparseLU();
  SparseLU(const SparseLU&) = delete;
  SparseLU& operator=(const SparseLU&) = delete;
  SparseLU(SparseLU&& o) noexcept;
  SparseLU& operator=(SparseLU&& o) noexcept;

  /// Solves A x = b with UMFPACK's iterative refinement.
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  /// Reciprocal condition estimate from the factorization
  /// (min |U_ii| / max |U_ii| after scaling).
  double rcond() const { return rcond_; }
  Eigen::Index rows() const { return a_.rows(); }

 private:
  SparseMatrix a_;
  void* numeric_ = nullptr;
  double rcond_ = 0.0;
};

}  // namespace bubbleforge
