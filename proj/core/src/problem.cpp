#include "bubbleforge/problem.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>

#include "bubbleforge/errors.hpp"

namespace bubbleforge {

Forcing Forcing::from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open forcing file '" + path + "'");
  auto table = std::make_shared<TabulatedField>(TabulatedField::read_csv(in));
  return {Kind::function, [table](Point p) { return (*table)(p); }, "file:" + path};
}

Forcing Forcing::parse(const std::string& spec) {
  if (spec == "zero") return zero();
  if (spec == "eigenmode") return eigenmode();
  return from_csv(spec);
}

ProblemData setup(GridPtr grid, const Forcing& forcing, double s_in1, const SetupOptions& options) {
  if (!(s_in1 >= 0.0) || !std::isfinite(s_in1)) throw ConfigError("s must be finite and nonnegative");
  if (!(options.lambda_threshold > 0.0 && options.lambda_threshold < 1.0))
    throw ConfigError("Lambda threshold must lie in (0, 1)");
  ProblemData d;
  d.grid = grid;
  d.laplacian = assemble_laplacian(grid, options.laplacian);
  d.green = std::make_shared<const GreenEvaluator>(d.laplacian);
  d.eigen = principal_eigenpair(*d.laplacian, options.eigen_tolerance);
  d.phi_sampler = std::make_shared<const SmoothSampler>(d.eigen.phi);
  switch (forcing.kind) {
    case Forcing::Kind::zero:
      d.h = ScalarField(grid);
      break;
    case Forcing::Kind::eigenmode:
      d.h = d.eigen.lambda * d.eigen.phi;
      break;
    case Forcing::Kind::function:
      d.h = ScalarField::sample(grid, forcing.function);
      break;
  }
  for (double v : d.h.values())
    if (!std::isfinite(v)) throw ConfigError("forcing h is not finite");
  d.rho = forcing.kind == Forcing::Kind::zero ? ScalarField(grid) : solve_dirichlet(*d.laplacian, d.h, nullptr);
  d.rho_precise.assign(grid->interior_count(), 0.0L);
  if (forcing.kind != Forcing::Kind::zero) {
    std::vector<long double> b(grid->interior_count());
    for (std::size_t q = 0; q < b.size(); ++q) b[q] = d.h[grid->interior_node(q)];
    d.rho_precise = solve_extended(*d.laplacian, b);
    for (std::size_t q = 0; q < b.size(); ++q) d.rho[grid->interior_node(q)] = static_cast<double>(d.rho_precise[q]);
  }
  d.k = d.rho.map([](double r) { return std::exp(-r); });
  d.s_in1 = s_in1;
  d.s = s_in1 / d.eigen.lambda;
  d.lambda_threshold = options.lambda_threshold;
  d.forcing_label = forcing.label;
  return d;
}

ProblemData setup_in3(GridPtr grid, const Forcing& forcing, double s, const SetupOptions& options) {
  ProblemData d = setup(std::move(grid), forcing, 0.0, options);
  d.s = s;
  d.s_in1 = s * d.eigen.lambda;
  return d;
}

LambdaCheck check_lambda(const ProblemData& data) {
  const Grid& g = *data.grid;
  const auto& phi = data.eigen.phi;
  const double t = data.lambda_threshold;
  auto inside = [&](std::size_t k) { return g.in_closure(k) && phi[k] >= t; };
  LambdaCheck c;
  c.sup_inside = -std::numeric_limits<double>::infinity();
  c.sup_boundary = -std::numeric_limits<double>::infinity();
  std::size_t argmax = 0, first = g.node_count();
  double gmax = -std::numeric_limits<double>::infinity();
  std::size_t members = 0;
  for (std::size_t k = 0; k < g.node_count(); ++k) {
    if (g.in_closure(k) && phi[k] > gmax) {
      gmax = phi[k];
      argmax = k;
    }
    if (!inside(k)) continue;
    ++members;
    if (first == g.node_count()) first = k;
    c.sup_inside = std::max(c.sup_inside, phi[k]);
    const int i = g.column(k), j = g.row(k);
    bool edge = false;
    for (auto [di, dj] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
      const int a = i + di, b = j + dj;
      if (a < 0 || b < 0 || a >= g.nx() || b >= g.ny() || !inside(g.index(a, b))) edge = true;
    }
    if (edge) c.sup_boundary = std::max(c.sup_boundary, phi[k]);
  }
  c.contains_maximum = inside(argmax);
  if (members == 0) return c;
  std::vector<char> seen(g.node_count(), 0);
  std::deque<std::size_t> queue{first};
  seen[first] = 1;
  std::size_t reached = 0;
  while (!queue.empty()) {
    const std::size_t k = queue.front();
    queue.pop_front();
    ++reached;
    const int i = g.column(k), j = g.row(k);
    for (auto [di, dj] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
      const int a = i + di, b = j + dj;
      if (a < 0 || b < 0 || a >= g.nx() || b >= g.ny()) continue;
      const std::size_t q = g.index(a, b);
      if (!seen[q] && inside(q)) {
        seen[q] = 1;
        queue.push_back(q);
      }
    }
  }
  c.connected = reached == members;
  return c;
}

ScalarField to_in1_solution(const ScalarField& u_in3, const ProblemData& data) {
  if (u_in3.grid_ptr() != data.grid) throw GeometryError("solution lives on a different grid");
  ScalarField out(u_in3);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = u_in3[k] - (data.s * data.eigen.phi[k] + data.rho[k]);
  return out;
}

ScalarField to_in3_solution(const ScalarField& u_in1, const ProblemData& data) {
  if (u_in1.grid_ptr() != data.grid) throw GeometryError("solution lives on a different grid");
  ScalarField out(u_in1);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = u_in1[k] + (data.s * data.eigen.phi[k] + data.rho[k]);
  return out;
}

ScalarField in3_residual(const ScalarField& u, const ProblemData& data) {
  ScalarField r = data.laplacian->apply(u);
  for (std::size_t k : data.grid->interior_nodes()) r[k] = -r[k] + std::exp(data.log_weight(k) + u[k]);
  return r;
}

ScalarField in1_residual(const ScalarField& u, const ProblemData& data) {
  ScalarField r = data.laplacian->apply(u);
  for (std::size_t k : data.grid->interior_nodes())
    r[k] = -r[k] + std::exp(u[k]) - data.s_in1 * data.eigen.phi[k] - data.h[k];
  return r;
}

namespace {

double exp_integral(const ScalarField& exponent) {
  const auto& w = exponent.grid().quadrature_weights();
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < w.size(); ++k)
    if (w[k] != 0.0) m = std::max(m, exponent[k]);
  double s = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k)
    if (w[k] != 0.0) s += w[k] * std::exp(exponent[k] - m);
  return s * std::exp(m);
}

}  // namespace

double in3_mass(const ScalarField& u, const ProblemData& data) {
  ScalarField e(u);
  for (std::size_t k = 0; k < e.size(); ++k) e[k] = data.log_weight(k) + u[k];
  return exp_integral(e);
}

double in1_mass(const ScalarField& u, const ProblemData&) { return exp_integral(u); }

}  // namespace bubbleforge
