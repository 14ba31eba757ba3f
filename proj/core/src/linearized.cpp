#include "bubbleforge/linearized.hpp"

#include <cmath>

#include "bubbleforge/errors.hpp"

namespace bubbleforge {

namespace {

double smoothstep(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

}  // namespace

double kernel_z(int i, Point z) {
  const double r2 = dot(z, z);
  switch (i) {
    case 0:
      return (r2 - 1.0) / (r2 + 1.0);
    case 1:
      return 4.0 * z.x / (1.0 + r2);
    case 2:
      return 4.0 * z.y / (1.0 + r2);
    default:
      throw ConfigError("kernel index must be 0, 1 or 2");
  }
}

double planar_kernel_residual(int i, int n, double half_width) {
  const Point c{half_width, half_width};
  auto grid = Grid::uniform(Domain::rectangle(2.0 * half_width, 2.0 * half_width), n);
  auto op = assemble_laplacian(grid);
  auto z = [i, c](Point x) { return kernel_z(i, x - c); };
  const ScalarField f = ScalarField::sample(grid, z);
  const ScalarField lap = op->apply(f, z);
  double e = 0.0;
  for (std::size_t k : grid->interior_nodes()) {
    const Point y = grid->node(k) - c;
    const double q = 1.0 + dot(y, y);
    e = std::max(e, std::abs(-lap[k] + 8.0 / (q * q) * f[k]));
  }
  return e;
}

LinearizedOperator build_operator(const Ansatz& ansatz, const ProblemData& data) {
  LinearizedOperator op;
  op.config = ansatz.config;
  op.laplacian = data.laplacian;
  op.W = ScalarField(data.grid);
  for (std::size_t k = 0; k < op.W.size(); ++k) op.W[k] = std::exp(data.log_weight(k) + ansatz.U[k]);
  return op;
}

KernelBasis build_kernel_basis(const SpikeConfiguration& config, const ProblemData& data, double R0) {
  if (!(R0 > 0.0)) throw ConfigError("R0 must be positive");
  KernelBasis b;
  b.R0 = R0;
  const Domain& dom = data.domain();
  for (std::size_t j = 0; j < config.m(); ++j) {
    const double a = config.scale(j);
    if (!(dom.signed_distance(config.xi[j]) < -(R0 + 1.0) * a))
      throw ConstructionError("cutoff support leaves the domain");
    for (std::size_t i = 0; i < j; ++i)
      if (!(distance(config.xi[i], config.xi[j]) > (R0 + 1.0) * (a + config.scale(i))))
        throw ConstructionError("cutoff supports overlap");
  }
  for (std::size_t j = 0; j < config.m(); ++j) {
    const double a = config.scale(j);
    const Point xi = config.xi[j];
    const double inv_gamma = 1.0 / config.gamma[j];
    b.chi.push_back(ScalarField::sample(
        data.grid, [=](Point x) { return 1.0 - smoothstep(distance(x, xi) / a - R0); }));
    std::array<ScalarField, 2> z, col;
    for (int i = 1; i <= 2; ++i) {
      z[i - 1] = ScalarField::sample(data.grid, [=](Point x) { return inv_gamma * kernel_z(i, (x - xi) * (1.0 / a)); });
      col[i - 1] = hadamard(b.chi.back(), z[i - 1]);
    }
    b.Z.push_back(std::move(z));
    b.cols.push_back(std::move(col));
  }
  return b;
}

ProjectedSolver::ProjectedSolver(const LinearizedOperator& op, const KernelBasis& basis) : grid_(op.W.grid_ptr()) {
  const Grid& g = *grid_;
  const auto n = static_cast<Eigen::Index>(g.interior_count());
  const auto& wq = g.quadrature_weights();

  Eigen::VectorXd w(n);
  for (Eigen::Index q = 0; q < n; ++q) w[q] = op.W[g.interior_node(static_cast<std::size_t>(q))];
  main_ = -op.laplacian->matrix();
  for (Eigen::Index q = 0; q < n; ++q) main_.coeffRef(q, q) += w[q];
  main_.makeCompressed();

  for (std::size_t j = 0; j < basis.m(); ++j)
    for (int i = 0; i < 2; ++i) {
      const ScalarField& col = basis.cols[j][static_cast<std::size_t>(i)];
      Eigen::VectorXd v = col.interior_vector();
      Eigen::VectorXd wv(n);
      double gram = 0.0, abs_mass = 0.0;
      for (Eigen::Index q = 0; q < n; ++q) {
        const double wk = wq[g.interior_node(static_cast<std::size_t>(q))];
        wv[q] = wk * v[q];
        gram += wk * v[q] * v[q];
        abs_mass += wk * std::abs(v[q]);
      }
      if (!(gram > 0.0)) throw ConstructionError("kernel column vanishes on the grid");
      const double scale = std::sqrt(gram);
      cols_.push_back(v / scale);
      wcols_.push_back(wv / scale);
      col_scale_.push_back(scale);
      abs_mass_.push_back(abs_mass);
    }

  const auto mm = static_cast<Eigen::Index>(cols_.size());
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(main_.nonZeros()) + 2 * static_cast<std::size_t>(mm * n));
  for (int k = 0; k < main_.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(main_, k); it; ++it)
      trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (Eigen::Index c = 0; c < mm; ++c)
    for (Eigen::Index q = 0; q < n; ++q) {
      const auto cc = static_cast<std::size_t>(c);
      if (cols_[cc][q] != 0.0) trip.emplace_back(static_cast<int>(q), static_cast<int>(n + c), -cols_[cc][q]);
      if (wcols_[cc][q] != 0.0) trip.emplace_back(static_cast<int>(n + c), static_cast<int>(q), wcols_[cc][q]);
    }
  SparseMatrix k(n + mm, n + mm);
  k.setFromTriplets(trip.begin(), trip.end());
  k.makeCompressed();
  lu_ = std::make_unique<SparseLU>(k);
}

ProjectedLinearSolve ProjectedSolver::solve(const ScalarField& h) const {
  if (h.grid_ptr() != grid_) throw GeometryError("right-hand side lives on a different grid");
  const auto n = main_.rows();
  const auto mm = static_cast<Eigen::Index>(cols_.size());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + mm);
  rhs.head(n) = h.interior_vector();
  if (!rhs.allFinite()) throw SolverError("right-hand side is not finite");
  const Eigen::VectorXd x = lu_->solve(rhs);

  ProjectedLinearSolve out;
  out.rcond = lu_->rcond();
  const Eigen::VectorXd psi = x.head(n);
  Eigen::VectorXd bc = Eigen::VectorXd::Zero(n);
  for (Eigen::Index c = 0; c < mm; ++c) {
    const auto cc = static_cast<std::size_t>(c);
    out.c.push_back(x[n + c] / col_scale_[cc]);
    bc += x[n + c] * cols_[cc];
  }
  const Eigen::VectorXd lpsi = main_ * psi;
  const double denom = std::max({rhs.head(n).cwiseAbs().maxCoeff(), lpsi.cwiseAbs().maxCoeff(), bc.cwiseAbs().maxCoeff()});
  out.equation_residual = denom > 0.0 ? (lpsi - bc - rhs.head(n)).cwiseAbs().maxCoeff() / denom : 0.0;
  const double pn = psi.cwiseAbs().maxCoeff();
  for (Eigen::Index c = 0; c < mm; ++c) {
    const auto cc = static_cast<std::size_t>(c);
    if (pn > 0.0)
      out.constraint_residual =
          std::max(out.constraint_residual, std::abs(wcols_[cc].dot(psi)) * col_scale_[cc] / (pn * abs_mass_[cc]));
  }
  out.psi = ScalarField::from_interior(grid_, psi, nullptr);
  return out;
}

ProjectedLinearSolve solve_projected(const LinearizedOperator& op, const KernelBasis& basis, const ScalarField& h) {
  return ProjectedSolver(op, basis).solve(h);
}

}  // namespace bubbleforge
