#include "bubbleforge/corrector.hpp"

#include <cmath>
#include <limits>

#include <Eigen/QR>

#include "bubbleforge/errors.hpp"

namespace bubbleforge {

namespace {

double sup_interior_diff(const ScalarField& a, const ScalarField& b) {
  double e = 0.0;
  for (std::size_t k : a.grid().interior_nodes()) e = std::max(e, std::abs(a[k] - b[k]));
  return e;
}

}  // namespace

ScalarField nonlinear_term(const LinearizedOperator& op, const ScalarField& psi) {
  ScalarField n(psi.grid_ptr());
  for (std::size_t k : psi.grid().interior_nodes()) n[k] = op.W[k] * (std::expm1(psi[k]) - psi[k]);
  return n;
}

CorrectionResult contract(const LinearizedOperator& op, const KernelBasis& basis, const Ansatz& ansatz,
                          const ProblemData& data, const ContractionOptions& options) {
  const ScalarField r = options.mode == ResidualMode::analytic ? ansatz.R : discrete_residual(ansatz, data);
  const ProjectedSolver solver(op, basis);

  CorrectionResult out;
  out.psi = ScalarField(data.grid);
  double previous_step = 0.0;
  int growth_run = 0;
  for (int it = 1; it <= options.max_iterations; ++it) {
    ScalarField rhs = r + nonlinear_term(op, out.psi);
    auto sol = solver.solve(rhs);
    ScalarField next = -1.0 * sol.psi;
    const double step = sup_interior_diff(next, out.psi);
    out.iterations = it;
    out.c_history.push_back(sol.c);
    if (!std::isfinite(step)) {
      out.diverged = true;
      break;
    }
    if (it > 1) {
      const double f = previous_step > 0.0 ? step / previous_step : 0.0;
      out.factors.push_back(f);
      growth_run = f >= 1.0 ? growth_run + 1 : 0;
    }
    out.psi = std::move(next);
    out.fixed_point_residual = step;
    previous_step = step;
    if (step < options.tolerance) {
      out.converged = true;
      break;
    }
    if (growth_run >= 3) {
      out.diverged = true;
      break;
    }
  }
  out.psi_norm = out.psi.max_abs_interior();
  return out;
}

double projection_size(const CorrectionResult& c, const KernelBasis& basis, const ProblemData& data) {
  if (c.c_history.empty()) return 0.0;
  const auto& cc = c.c_history.back();
  ScalarField sum(data.grid);
  for (std::size_t j = 0; j < basis.m(); ++j)
    for (std::size_t i = 0; i < 2; ++i) sum += cc[2 * j + i] * basis.cols[j][i];
  return std::exp(-data.s) * sum.max_abs_interior();
}

namespace {

struct Evaluation {
  Ansatz ansatz;
  CorrectionResult correction;
  Eigen::VectorXd c;
  double projection = 0.0;
};

Evaluation evaluate(const std::vector<Point>& xi, double beta, const ProblemData& data, const ContractionOptions& o) {
  Evaluation e;
  e.ansatz = assemble_ansatz(make_configuration(xi, data, beta), data);
  const auto op = build_operator(e.ansatz, data);
  const auto basis = build_kernel_basis(e.ansatz.config, data);
  e.correction = contract(op, basis, e.ansatz, data, o);
  if (e.correction.diverged || e.correction.c_history.empty())
    throw SolverError("contraction diverged during the position reduction");
  const auto& c = e.correction.c_history.back();
  e.c = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
  e.projection = projection_size(e.correction, basis, data);
  return e;
}

std::vector<Point> shifted(std::vector<Point> xi, const Eigen::VectorXd& d) {
  for (std::size_t j = 0; j < xi.size(); ++j) xi[j] += Point{d[2 * j], d[2 * j + 1]};
  return xi;
}

}  // namespace

ReducedCorrection reduce_positions(const SpikeConfiguration& initial, const ProblemData& data,
                                   const ReductionOptions& options) {
  const double beta = initial.beta;
  double a_min = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < initial.m(); ++j) a_min = std::min(a_min, initial.scale(j));
  const double h = options.fd_step * a_min, cap = options.max_move * a_min;
  const auto dim = static_cast<Eigen::Index>(2 * initial.m());

  std::vector<Point> xi = initial.xi;
  Evaluation cur = evaluate(xi, beta, data, options.contraction);
  ReducedCorrection out;
  out.history.push_back({0, cur.projection, 0.0});

  for (int it = 1; it <= options.max_iterations && !(cur.projection <= options.tolerance); ++it) {
    Eigen::MatrixXd jac(dim, dim);
    for (Eigen::Index q = 0; q < dim; ++q) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
      e[q] = h;
      jac.col(q) = (evaluate(shifted(xi, e), beta, data, options.contraction).c - cur.c) / h;
    }
    Eigen::VectorXd step = -jac.colPivHouseholderQr().solve(cur.c);
    if (!step.allFinite()) break;
    const double len = step.cwiseAbs().maxCoeff();
    if (len > cap) step *= cap / len;

    bool accepted = false;
    for (int halving = 0; halving < 6; ++halving, step *= 0.5) {
      auto trial_xi = shifted(xi, step);
      Evaluation trial = evaluate(trial_xi, beta, data, options.contraction);
      if (trial.projection < cur.projection) {
        xi = std::move(trial_xi);
        cur = std::move(trial);
        accepted = true;
        break;
      }
    }
    out.iterations = it;
    if (!accepted) break;
    out.history.push_back({it, cur.projection, step.cwiseAbs().maxCoeff()});
  }
  out.projection = cur.projection;
  out.converged = cur.projection <= options.tolerance;
  out.ansatz = std::move(cur.ansatz);
  out.correction = std::move(cur.correction);
  return out;
}

std::vector<Spike> detect_spikes(const ScalarField& u, double fraction) {
  const Grid& g = u.grid();
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k : g.interior_nodes()) top = std::max(top, u[k]);
  const double threshold = fraction * top;
  std::vector<Spike> out;
  for (std::size_t k : g.interior_nodes()) {
    if (!(u[k] > threshold)) continue;
    const int i = g.column(k), j = g.row(k);
    bool strict = true;
    for (int dj = -1; dj <= 1 && strict; ++dj)
      for (int di = -1; di <= 1; ++di) {
        if (di == 0 && dj == 0) continue;
        const int ii = i + di, jj = j + dj;
        if (ii < 0 || jj < 0 || ii >= g.nx() || jj >= g.ny()) continue;
        const std::size_t q = g.index(ii, jj);
        if (g.in_closure(q) && !(u[k] > u[q])) {
          strict = false;
          break;
        }
      }
    if (strict) out.push_back({g.node(k), u[k]});
  }
  return out;
}

std::string to_string(NewtonStatus s) {
  switch (s) {
    case NewtonStatus::converged:
      return "converged";
    case NewtonStatus::roundoff_floor:
      return "roundoff_floor";
    case NewtonStatus::iteration_cap:
      return "iteration_cap";
    case NewtonStatus::line_search_failed:
      return "line_search_failed";
    case NewtonStatus::branch_lost:
      return "branch_lost";
  }
  return "unknown";
}

namespace {

using LVec = std::vector<long double>;

struct ExtendedResidual {
  LVec f;
  long double floor = 0.0L;
};

void minus_laplacian(const ProblemData& data, const LVec& x, long double boundary, LVec& y, LVec& mag) {
  minus_laplacian_extended(*data.laplacian, x, boundary, y, &mag);
}

long double log_weight_ext(const ProblemData& data, std::size_t q) {
  return -data.rho_precise[q] - static_cast<long double>(data.s) * data.eigen.precise_phi[q];
}

ExtendedResidual evaluate_in3(const ExtendedIterate& x, const ProblemData& data) {
  ExtendedResidual out;
  LVec mag;
  minus_laplacian(data, x.v, -x.shift, out.f, mag);
  long double floor = 0.0L;
  for (std::size_t q = 0; q < x.v.size(); ++q) {
    const long double arg = log_weight_ext(data, q) + x.shift + x.v[q];
    const long double w = std::exp(arg);
    out.f[q] = -out.f[q] + w;
    floor = std::max(floor, mag[q] + w * (1.0L + std::fabs(arg)));
  }
  out.floor = std::numeric_limits<long double>::epsilon() * floor;
  return out;
}

long double sup(const LVec& f) {
  long double e = 0.0L;
  for (long double v : f) e = std::max(e, std::fabs(v));
  return e;
}

ScalarField field_from(const LVec& f, const ProblemData& data) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(f.size()));
  for (std::size_t q = 0; q < f.size(); ++q) v[static_cast<Eigen::Index>(q)] = static_cast<double>(f[q]);
  return ScalarField::from_interior(data.grid, v, nullptr);
}

}  // namespace

ExtendedIterate to_extended(const ScalarField& u) {
  const Grid& g = u.grid();
  ExtendedIterate x;
  double top = 0.0;
  for (std::size_t k : g.interior_nodes()) top = std::max(top, u[k]);
  x.shift = top;
  x.v.resize(g.interior_count());
  for (std::size_t q = 0; q < x.v.size(); ++q)
    x.v[q] = static_cast<long double>(u[g.interior_node(q)]) - x.shift;
  return x;
}

ScalarField to_field(const ExtendedIterate& x, const ProblemData& data) {
  LVec u(x.v.size());
  for (std::size_t q = 0; q < u.size(); ++q) u[q] = x.shift + x.v[q];
  return field_from(u, data);
}

ScalarField extended_in3_residual(const ExtendedIterate& x, const ProblemData& data) {
  return field_from(evaluate_in3(x, data).f, data);
}

ScalarField extended_in1_residual(const ExtendedIterate& x, const ProblemData& data) {
  const Grid& g = *data.grid;
  LVec u1(x.v.size()), y, mag;
  const auto s = static_cast<long double>(data.s), s1 = static_cast<long double>(data.s_in1);
  for (std::size_t q = 0; q < u1.size(); ++q) {
    u1[q] = x.shift + x.v[q] - s * data.eigen.precise_phi[q] - data.rho_precise[q];
  }
  minus_laplacian(data, u1, 0.0L, y, mag);
  for (std::size_t q = 0; q < u1.size(); ++q) {
    const std::size_t k = g.interior_node(q);
    y[q] = -y[q] + std::exp(u1[q]) - s1 * data.eigen.precise_phi[q] - static_cast<long double>(data.h[k]);
  }
  return field_from(y, data);
}

RefinedSolution newton_refine(const ScalarField& u0, const ProblemData& data, const NewtonOptions& options) {
  if (u0.grid_ptr() != data.grid) throw GeometryError("initial guess lives on a different grid");
  const Grid& g = *data.grid;
  const double scale = std::exp(-data.s);  // delta^2
  const auto n = static_cast<Eigen::Index>(g.interior_count());
  const SparseMatrix& a = data.laplacian->matrix();

  RefinedSolution out;
  out.precise = to_extended(u0);
  ExtendedResidual ev = evaluate_in3(out.precise, data);
  double res = static_cast<double>(sup(ev.f));
  out.history.push_back({0, res, 1.0});

  auto finish = [&](NewtonStatus st) {
    out.u = to_field(out.precise, data);
    out.floor = static_cast<double>(ev.floor);
    if (st == NewtonStatus::line_search_failed && res <= options.floor_factor * out.floor) st = NewtonStatus::roundoff_floor;
    out.status = st;
    out.residual = res;
    out.scaled_residual = scale * res;
    out.mass = in3_mass(out.u, data);
    out.spikes = detect_spikes(out.u);
    if (out.settled() && options.expected_spikes > 0 &&
        out.mass < 4.0 * 3.141592653589793 * static_cast<double>(options.expected_spikes))
      out.status = NewtonStatus::branch_lost;
    return out;
  };

  for (int it = 1;; ++it) {
    if (res <= options.tolerance) return finish(NewtonStatus::converged);
    if (res <= options.floor_factor * static_cast<double>(ev.floor)) return finish(NewtonStatus::roundoff_floor);
    if (it > options.max_iterations) return finish(NewtonStatus::iteration_cap);
    out.iterations = it;

    SparseMatrix jac = -a;
    Eigen::VectorXd rhs(n);
    for (Eigen::Index q = 0; q < n; ++q) {
      const auto qq = static_cast<std::size_t>(q);
      jac.coeffRef(q, q) += static_cast<double>(std::exp(log_weight_ext(data, qq) + out.precise.shift + out.precise.v[qq]));
      rhs[q] = -static_cast<double>(ev.f[qq]);
    }
    jac.makeCompressed();
    const SparseLU lu(jac);
    Eigen::VectorXd du = lu.solve(rhs);
    // Two refinement sweeps with the linear residual in extended precision.
    for (int sweep = 0; sweep < 2; ++sweep) {
      Eigen::VectorXd lr(n);
      std::vector<long double> acc(static_cast<std::size_t>(n));
      for (Eigen::Index q = 0; q < n; ++q) acc[static_cast<std::size_t>(q)] = rhs[q];
      for (int k = 0; k < jac.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(jac, k); it; ++it)
          acc[static_cast<std::size_t>(it.row())] -= static_cast<long double>(it.value()) * du[k];
      for (Eigen::Index q = 0; q < n; ++q) lr[q] = static_cast<double>(acc[static_cast<std::size_t>(q)]);
      du += lu.solve(lr);
    }

    double t = 1.0;
    bool accepted = false;
    for (int halving = 0; halving <= options.max_halvings; ++halving, t *= 0.5) {
      ExtendedIterate trial = out.precise;
      for (std::size_t q = 0; q < trial.v.size(); ++q)
        trial.v[q] += static_cast<long double>(t) * static_cast<long double>(du[static_cast<Eigen::Index>(q)]);
      ExtendedResidual et = evaluate_in3(trial, data);
      const double rt = static_cast<double>(sup(et.f));
      if (std::isfinite(rt) && rt < res) {
        out.precise = std::move(trial);
        ev = std::move(et);
        res = rt;
        accepted = true;
        break;
      }
    }
    if (!accepted) return finish(NewtonStatus::line_search_failed);
    out.history.push_back({it, res, t});
  }
}

}  // namespace bubbleforge
