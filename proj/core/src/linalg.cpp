#include "bubbleforge/linalg.hpp"

#include <umfpack.h>

#include <string>
#include <utility>

#include "bubbleforge/errors.hpp"

namespace bubbleforge {

SparseLU::SparseLU(const SparseMatrix& a) : a_(a) {
  if (a_.rows() != a_.cols()) throw SolverError("LU needs a square matrix");
  a_.makeCompressed();
  double control[UMFPACK_CONTROL];
  double info[UMFPACK_INFO];
  umfpack_di_defaults(control);
  void* symbolic = nullptr;
  const int n = static_cast<int>(a_.rows());
  int status = umfpack_di_symbolic(n, n, a_.outerIndexPtr(), a_.innerIndexPtr(), a_.valuePtr(), &symbolic,
                                   control, info);
  if (status != UMFPACK_OK) throw SolverError("UMFPACK symbolic analysis failed, status " + std::to_string(status));
  status = umfpack_di_numeric(a_.outerIndexPtr(), a_.innerIndexPtr(), a_.valuePtr(), symbolic, &numeric_, control,
                              info);
  umfpack_di_free_symbolic(&symbolic);
  rcond_ = info[UMFPACK_RCOND];
  if (status != UMFPACK_OK) {
    if (numeric_) umfpack_di_free_numeric(&numeric_);
    throw SolverError("UMFPACK factorization failed (singular or near-singular), status " + std::to_string(status) +
                          ", rcond " + std::to_string(rcond_),
                      0, rcond_);
  }
}

SparseLU::~SparseLU() {
  if (numeric_) umfpack_di_free_numeric(&numeric_);
}

SparseLU::SparseLU(SparseLU&& o) noexcept
    : a_(std::move(o.a_)), numeric_(std::exchange(o.numeric_, nullptr)), rcond_(o.rcond_) {}

SparseLU& SparseLU::operator=(SparseLU&& o) noexcept {
  if (this != &o) {
    if (numeric_) umfpack_di_free_numeric(&numeric_);
    a_ = std::move(o.a_);
    numeric_ = std::exchange(o.numeric_, nullptr);
    rcond_ = o.rcond_;
  }
  return *this;
}

Eigen::VectorXd SparseLU::solve(const Eigen::VectorXd& b) const {
  if (b.size() != a_.rows()) throw SolverError("right-hand side has the wrong length");
  Eigen::VectorXd x(b.size());
  double control[UMFPACK_CONTROL];
  double info[UMFPACK_INFO];
  umfpack_di_defaults(control);
  const int status = umfpack_di_solve(UMFPACK_A, a_.outerIndexPtr(), a_.innerIndexPtr(), a_.valuePtr(), x.data(),
                                      b.data(), numeric_, control, info);
  if (status != UMFPACK_OK) throw SolverError("UMFPACK solve failed, status " + std::to_string(status));
  return x;
}

}  // namespace bubbleforge
