#include "bubbleforge/elliptic.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <algorithm>
#include <cmath>
#include <string>

#include "bubbleforge/errors.hpp"

namespace bubbleforge {

DiscreteLaplacian::DiscreteLaplacian(GridPtr grid, LaplacianOptions options)
    : grid_(std::move(grid)), options_(options) {
  const Grid& g = *grid_;
  const std::size_t n = g.interior_count();
  std::vector<Triplet> trip;
  trip.reserve(5 * n);
  dual_areas_.resize(static_cast<Eigen::Index>(n));
  std::vector<double> diag(n, 0.0);
  std::vector<double> offsum(n, 0.0);
  for (std::size_t q = 0; q < n; ++q) {
    const auto& arms = g.arms(q);
    dual_areas_[static_cast<Eigen::Index>(q)] = g.dual_width_x(q) * g.dual_width_y(q);
    for (int axis = 0; axis < 2; ++axis) {
      const Arm& lo = arms[2 * axis];
      const Arm& hi = arms[2 * axis + 1];
      const double a = lo.length, b = hi.length;
      diag[q] += 2.0 / (a * b);
      const double wlo = 2.0 / (a * (a + b));
      const double whi = 2.0 / (b * (a + b));
      auto couple = [&](const Arm& arm, double w) {
        offsum[q] += w;
        if (arm.ends_on_boundary)
          couplings_.push_back({q, arm.at, w});
        else
          trip.emplace_back(static_cast<int>(q), static_cast<int>(g.interior_index(arm.node)), -w);
      };
      couple(lo, wlo);
      couple(hi, whi);
    }
    trip.emplace_back(static_cast<int>(q), static_cast<int>(q), diag[q]);
  }
  matrix_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  matrix_.setFromTriplets(trip.begin(), trip.end());
  matrix_.makeCompressed();

  for (std::size_t q = 0; q < n; ++q) {
    structure_.positive_diagonal = structure_.positive_diagonal && diag[q] > 0.0 && std::isfinite(diag[q]);
    const double defect = std::abs(diag[q] - offsum[q]) / diag[q];
    structure_.max_row_defect = std::max(structure_.max_row_defect, defect);
  }
  for (int k = 0; k < matrix_.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(matrix_, k); it; ++it)
      if (it.row() != it.col() && it.value() > 0.0) structure_.nonpositive_offdiagonal = false;
  structure_.row_balance = structure_.max_row_defect <= 1e-12;
  if (!g.has_cut_arms()) {
    SparseMatrix s = dual_areas_.asDiagonal() * matrix_;
    SparseMatrix t = s.transpose();
    const double asym = (s - t).norm();
    structure_.symmetric_scaled = asym <= 1e-12 * s.norm();
  }
  if (!structure_.positive_diagonal || !structure_.nonpositive_offdiagonal || !structure_.row_balance)
    throw GeometryError("degenerate grid: Laplacian stencil lacks M-matrix structure");
}

LaplacianPtr assemble_laplacian(GridPtr grid, LaplacianOptions options) {
  if (!grid || grid->interior_count() == 0) throw GeometryError("degenerate grid: no interior node");
  return std::make_shared<const DiscreteLaplacian>(std::move(grid), options);
}

Eigen::VectorXd DiscreteLaplacian::boundary_rhs(const PointFunction& g) const {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(matrix_.rows());
  if (!g) return b;
  for (const auto& c : couplings_) b[static_cast<Eigen::Index>(c.row)] += c.weight * g(c.at);
  return b;
}

ScalarField DiscreteLaplacian::apply(const ScalarField& u) const { return apply(u, nullptr); }

ScalarField DiscreteLaplacian::apply(const ScalarField& u, const PointFunction& bc) const {
  if (u.grid_ptr() != grid_) throw GeometryError("field lives on a different grid");
  const Grid& g = *grid_;
  // Difference form sum_arms w (u_q - u_arm): no cancellation against the
  // diagonal when u is large and smooth on the stencil scale.
  const Eigen::VectorXd x = u.interior_vector();
  Eigen::VectorXd y = Eigen::VectorXd::Zero(x.size());
  for (int k = 0; k < matrix_.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(matrix_, k); it; ++it)
      if (it.row() != it.col()) y[it.row()] -= it.value() * (x[it.row()] - x[k]);
  for (const auto& c : couplings_) {
    const auto q = static_cast<Eigen::Index>(c.row);
    y[q] += c.weight * (x[q] - (bc ? bc(c.at) : 0.0));
  }
  ScalarField out(grid_);
  for (std::size_t q = 0; q < g.interior_count(); ++q) out[g.interior_node(q)] = y[static_cast<Eigen::Index>(q)];
  return out;
}

const SparseLU& DiscreteLaplacian::factorization() const {
  std::call_once(factor_once_, [this] { lu_ = std::make_unique<SparseLU>(matrix_); });
  return *lu_;
}

Eigen::VectorXd DiscreteLaplacian::solve(const Eigen::VectorXd& b) const {
  if (!b.allFinite()) throw SolverError("right-hand side is not finite");
  if (uses_direct_solver()) return factorization().solve(b);
  return solve_iterative(b);
}

Eigen::VectorXd DiscreteLaplacian::solve_iterative(const Eigen::VectorXd& b) const {
  Eigen::VectorXd x;
  int iters = 0;
  double err = 0.0;
  bool ok = false;
  if (structure_.symmetric_scaled) {
    SparseMatrix s = dual_areas_.asDiagonal() * matrix_;
    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::IncompleteCholesky<double>> cg;
    cg.setTolerance(options_.iterative_tolerance);
    cg.setMaxIterations(options_.max_iterations);
    cg.compute(s);
    x = cg.solve(dual_areas_.cwiseProduct(b));
    iters = static_cast<int>(cg.iterations());
    err = cg.error();
    ok = cg.info() == Eigen::Success;
  } else {
    Eigen::BiCGSTAB<SparseMatrix, Eigen::IncompleteLUT<double>> bicg;
    bicg.setTolerance(options_.iterative_tolerance);
    bicg.setMaxIterations(options_.max_iterations);
    bicg.compute(matrix_);
    x = bicg.solve(b);
    iters = static_cast<int>(bicg.iterations());
    err = bicg.error();
    ok = bicg.info() == Eigen::Success;
  }
  if (!ok) throw SolverError("Krylov solve did not converge", iters, err);
  return x;
}

ScalarField solve_dirichlet(const DiscreteLaplacian& op, const ScalarField& rhs, const PointFunction& boundary) {
  if (rhs.grid_ptr() != op.grid_ptr()) throw GeometryError("rhs lives on a different grid");
  Eigen::VectorXd b = rhs.interior_vector() + op.boundary_rhs(boundary);
  if (!b.allFinite()) throw SolverError("right-hand side is not finite");
  Eigen::VectorXd x = op.solve(b);
  const double bn = b.norm();
  const double rel = bn > 0.0 ? (op.matrix() * x - b).norm() / bn : x.norm();
  if (!(rel <= 1e-10)) throw SolverError("Dirichlet solve residual too large", 0, rel);
  return ScalarField::from_interior(op.grid_ptr(), x, boundary);
}

ScalarField harmonic_extension(const DiscreteLaplacian& op, const PointFunction& boundary) {
  return solve_dirichlet(op, ScalarField(op.grid_ptr()), boundary);
}

void minus_laplacian_extended(const DiscreteLaplacian& op, const std::vector<long double>& x, long double boundary,
                              std::vector<long double>& y, std::vector<long double>* mag) {
  const SparseMatrix& a = op.matrix();
  y.assign(x.size(), 0.0L);
  if (mag) mag->assign(x.size(), 0.0L);
  for (Eigen::Index k = 0; k < a.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
      const auto q = static_cast<std::size_t>(it.row());
      const auto j = static_cast<std::size_t>(k);
      if (q == j) continue;
      const long double w = -static_cast<long double>(it.value());
      y[q] += w * (x[q] - x[j]);
      if (mag) (*mag)[q] += w * (std::fabs(x[q]) + std::fabs(x[j]));
    }
  for (const auto& c : op.couplings()) {
    const long double w = c.weight;
    y[c.row] += w * (x[c.row] - boundary);
    if (mag) (*mag)[c.row] += w * (std::fabs(x[c.row]) + std::fabs(boundary));
  }
}

namespace {

using LVec = std::vector<long double>;

LVec times(const DiscreteLaplacian& op, const LVec& z) {
  LVec y;
  minus_laplacian_extended(op, z, 0.0L, y, nullptr);
  return y;
}

}  // namespace

std::vector<long double> solve_extended(const DiscreteLaplacian& op, const std::vector<long double>& b, int sweeps) {
  LVec z(b.size(), 0.0L);
  Eigen::VectorXd r(static_cast<Eigen::Index>(b.size()));
  for (int k = 0; k < sweeps; ++k) {
    const LVec az = times(op, z);
    for (std::size_t i = 0; i < b.size(); ++i) r[static_cast<Eigen::Index>(i)] = static_cast<double>(b[i] - az[i]);
    const Eigen::VectorXd dz = op.solve(r);
    for (std::size_t i = 0; i < b.size(); ++i) z[i] += dz[static_cast<Eigen::Index>(i)];
  }
  return z;
}

EigenPair principal_eigenpair(const DiscreteLaplacian& op, double tol, int max_iterations) {
  if (!(tol > 0.0)) throw ConfigError("eigen tolerance must be positive");
  const SparseMatrix& a = op.matrix();
  const Eigen::VectorXd& d = op.dual_areas();
  const Eigen::Index n = a.rows();
  Eigen::VectorXd x = Eigen::VectorXd::Ones(n);
  double lambda = 0.0;
  const double settle = std::max(100.0 * tol, 1e-13);
  double last_step = INFINITY;
  for (int it = 1; it <= max_iterations; ++it) {
    Eigen::VectorXd y = op.solve(x);
    y /= y.cwiseAbs().maxCoeff();
    if (y.sum() < 0.0) y = -y;
    const Eigen::VectorXd ay = a * y;
    const double rq = y.dot(d.cwiseProduct(ay)) / y.dot(d.cwiseProduct(y));
    const double change = std::abs(rq - lambda) / std::abs(rq);
    const double step = (y - x).cwiseAbs().maxCoeff();
    lambda = rq;
    x = y;
    // strongly graded grids floor the double step above settle; the polish
    // below converges from there anyway
    const bool stalled = step < 1e-8 && step > 0.5 * last_step;
    last_step = step;
    if (it > 1 && ((change < tol && step < settle) || stalled)) {
      EigenPair out;
      out.iterations = it;
      // Polish in long double: s phi_1 enters the residual of the
      // transformed equation, and a double eigenvector is only good to
      // ulp * |A|, far above the Newton tolerance on graded grids. Shifted
      // inverse iteration (shift 0.9 lambda) with refinement sweeps.
      LVec p(static_cast<std::size_t>(n));
      for (Eigen::Index i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = x[i];
      Eigen::Index top = 0;
      x.maxCoeff(&top);
      const auto ti = static_cast<std::size_t>(top);
      const long double sigma = 0.9L * lambda;
      SparseMatrix shifted = a;
      for (Eigen::Index i = 0; i < n; ++i) shifted.coeffRef(i, i) -= static_cast<double>(sigma);
      const SparseLU lu(shifted);
      long double lam = lambda;
      Eigen::VectorXd r(n);
      for (int k = 0; k < 12; ++k) {
        LVec y(p.size(), 0.0L);
        for (int sweep = 0; sweep < 3; ++sweep) {
          const LVec ay = times(op, y);
          for (std::size_t i = 0; i < y.size(); ++i)
            r[static_cast<Eigen::Index>(i)] = static_cast<double>(p[i] - (ay[i] - sigma * y[i]));
          const Eigen::VectorXd dy = lu.solve(r);
          for (std::size_t i = 0; i < y.size(); ++i) y[i] += dy[static_cast<Eigen::Index>(i)];
        }
        const long double scale = y[ti];
        long double step = 0.0L;
        for (std::size_t i = 0; i < y.size(); ++i) {
          y[i] /= scale;
          step = std::max(step, std::fabs(y[i] - p[i]));
        }
        const LVec ay = times(op, y);
        long double num = 0.0L, den = 0.0L;
        for (std::size_t i = 0; i < y.size(); ++i) {
          num += static_cast<long double>(d[static_cast<Eigen::Index>(i)]) * y[i] * ay[i];
          den += static_cast<long double>(d[static_cast<Eigen::Index>(i)]) * y[i] * y[i];
        }
        lam = num / den;
        p = std::move(y);
        if (step < 1e-18L) break;
      }
      const LVec ap = times(op, p);
      long double res = 0.0L;
      for (std::size_t i = 0; i < p.size(); ++i) res = std::max(res, std::abs(ap[i] - lam * p[i]));
      out.lambda = static_cast<double>(lam);
      out.precise_lambda = lam;
      out.precise_phi = p;
      for (Eigen::Index i = 0; i < n; ++i) x[i] = static_cast<double>(p[static_cast<std::size_t>(i)]);
      out.phi = ScalarField::from_interior(op.grid_ptr(), x, nullptr);
      out.residual = static_cast<double>(res);
      Eigen::VectorXd xn = x;
      if (!(xn.minCoeff() > 0.0)) throw SolverError("principal eigenvector is not positive", it, out.residual);
      return out;
    }
  }
  throw SolverError("inverse power iteration did not converge", max_iterations, 0.0);
}

}  // namespace bubbleforge
