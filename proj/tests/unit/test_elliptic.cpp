#include <doctest.h>

#include <random>

#include "bubbleforge/elliptic.hpp"
#include "bubbleforge/errors.hpp"
#include "oracles.hpp"

using namespace bubbleforge;

namespace {

double interior_error(const ScalarField& f, const PointFunction& exact) {
  double e = 0.0;
  for (std::size_t k : f.grid().interior_nodes()) e = std::max(e, std::abs(f[k] - exact(f.grid().node(k))));
  return e;
}

}  // namespace

TEST_SUITE("elliptic_core") {
  TEST_CASE("square operator: dimension, stencil width, symmetric structure") {
    auto g = Grid::uniform(Domain::unit_square(), 33);
    auto op = assemble_laplacian(g);
    const auto& a = op->matrix();
    CHECK(a.rows() == static_cast<Eigen::Index>(g->interior_count()));
    CHECK(a.rows() == 31 * 31);
    Eigen::SparseMatrix<double, Eigen::RowMajor> r = a;
    for (int k = 0; k < r.outerSize(); ++k) CHECK(r.innerVector(k).nonZeros() <= 5);
    CHECK(op->structure().symmetric_scaled);
    CHECK(op->structure().row_balance);
  }

  TEST_CASE("disk operator has M-matrix structure with cut arms") {
    auto g = Grid::uniform(Domain::unit_disk(), 33);
    REQUIRE(g->has_cut_arms());
    auto op = assemble_laplacian(g);
    CHECK(op->structure().positive_diagonal);
    CHECK(op->structure().nonpositive_offdiagonal);
    CHECK(op->structure().max_row_defect < 1e-12);
  }

  TEST_CASE("apply to sin sin gives 2 pi^2 times the field") {
    std::vector<double> err;
    for (int n : {33, 65, 129}) {
      auto g = Grid::uniform(Domain::unit_square(), n);
      auto op = assemble_laplacian(g);
      auto f = ScalarField::sample(g, oracle::sinsin);
      auto lf = op->apply(f);
      err.push_back(interior_error(lf, [](Point p) { return 2 * oracle::pi * oracle::pi * oracle::sinsin(p); }));
    }
    CHECK(err[0] / err[1] == doctest::Approx(4.0).epsilon(0.05));
    CHECK(err[1] / err[2] == doctest::Approx(4.0).epsilon(0.05));
  }

  TEST_CASE("apply to a constant with zero boundary data leaves only the couplings") {
    auto g = Grid::uniform(Domain::unit_disk(), 33);
    auto op = assemble_laplacian(g);
    auto c = op->apply(ScalarField(g, 1.0), [](Point) { return 0.0; });
    Eigen::VectorXd coupling = op->boundary_rhs([](Point) { return 1.0; });
    for (std::size_t q = 0; q < g->interior_count(); ++q)
      CHECK(c[g->interior_node(q)] == doctest::Approx(coupling[static_cast<Eigen::Index>(q)]).epsilon(1e-10));
    auto z = op->apply(ScalarField(g, 1.0), [](Point) { return 1.0; });
    CHECK(z.max_abs_interior() < 1e-9);
  }

  TEST_CASE("dirichlet oracles") {
    auto sq = Grid::uniform(Domain::unit_square(), 65);
    auto op = assemble_laplacian(sq);
    auto u = solve_dirichlet(*op, ScalarField(sq), [](Point) { return 3.25; });
    CHECK(interior_error(u, [](Point) { return 3.25; }) < 1e-12);

    std::vector<double> es, ed;
    for (int n : {33, 65, 129}) {
      auto gs = Grid::uniform(Domain::unit_square(), n);
      auto os = assemble_laplacian(gs);
      auto rhs = ScalarField::sample(gs, [](Point p) { return 2 * oracle::pi * oracle::pi * oracle::sinsin(p); });
      es.push_back(interior_error(solve_dirichlet(*os, rhs, nullptr), oracle::sinsin));
      auto gd = Grid::uniform(Domain::unit_disk(), n);
      auto od = assemble_laplacian(gd);
      auto v = solve_dirichlet(*od, ScalarField(gd, 1.0), [](Point) { return 0.0; });
      // The radial quadratic is reproduced exactly by the Shortley-Weller stencil.
      ed.push_back(interior_error(v, [](Point p) { return (1 - p.x * p.x - p.y * p.y) / 4; }));
    }
    CHECK(es[0] / es[1] == doctest::Approx(4.0).epsilon(0.05));
    CHECK(es[1] / es[2] == doctest::Approx(4.0).epsilon(0.05));
    for (double e : ed) CHECK(e < 1e-10);
  }

  TEST_CASE("harmonic extension oracles") {
    std::vector<double> e1, e2;
    for (int n : {33, 65, 129}) {
      auto g = Grid::uniform(Domain::unit_disk(), n);
      auto op = assemble_laplacian(g);
      CHECK(interior_error(harmonic_extension(*op, [](Point) { return 5.0; }), [](Point) { return 5.0; }) < 1e-12);
      auto quad = [](Point p) { return p.x * p.x - p.y * p.y; };
      e1.push_back(interior_error(harmonic_extension(*op, quad), quad));
      const Point pole{1.3, 0.4};
      auto lg = [pole](Point p) { return 4 * std::log(distance(p, pole)); };
      e2.push_back(interior_error(harmonic_extension(*op, lg), lg));
    }
    CHECK(e1[2] < 1e-10);  // quadratics are exact for the 5-point stencil
    CHECK(e2[0] / e2[1] > 3.3);
    CHECK(e2[1] / e2[2] > 3.3);
  }

  TEST_CASE("iterative branch agrees with the direct solve") {
    LaplacianOptions opts;
    opts.direct_limit = 0;
    for (auto d : {Domain::unit_square(), Domain::unit_disk()}) {
      auto g = Grid::uniform(d, 65);
      auto it = assemble_laplacian(g, opts);
      auto dr = assemble_laplacian(g);
      CHECK_FALSE(it->uses_direct_solver());
      auto bc = [](Point p) { return p.x * p.y + 1.0; };
      auto rhs = ScalarField(g, 2.0);
      auto a = solve_dirichlet(*it, rhs, bc);
      auto b = solve_dirichlet(*dr, rhs, bc);
      double e = 0.0;
      for (std::size_t k : g->interior_nodes()) e = std::max(e, std::abs(a[k] - b[k]));
      CHECK(e < 1e-8);
    }
  }

  TEST_CASE("discrete maximum principle") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto g = Grid::uniform(Domain::unit_disk(), 49);
    auto op = assemble_laplacian(g);
    for (int t = 0; t < 5; ++t) {
      ScalarField rhs(g);
      for (double& v : rhs.values()) v = u(rng);
      const double a = u(rng), b = u(rng);
      auto sol = solve_dirichlet(*op, rhs, [a, b](Point p) { return a * (1 + p.x) + b * (1 - p.y); });
      for (std::size_t k : g->interior_nodes()) CHECK(sol[k] >= 0.0);
    }
  }

  TEST_CASE("self-adjointness for zero-boundary fields") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto d : {Domain::unit_square(), Domain::rectangle(2.0, 1.0)}) {
      auto g = Grid::uniform(d, 41);
      auto op = assemble_laplacian(g);
      Eigen::VectorXd x(op->matrix().rows()), y(op->matrix().rows());
      for (auto& v : x) v = u(rng);
      for (auto& v : y) v = u(rng);
      const Eigen::VectorXd& w = op->dual_areas();
      const double lhs = (op->matrix() * x).dot(w.cwiseProduct(y));
      const double rhs = x.dot(w.cwiseProduct(op->matrix() * y));
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
  }

  TEST_CASE("principal eigenpair on the square") {
    auto g = Grid::uniform(Domain::unit_square(), 129);
    auto op = assemble_laplacian(g);
    auto ep = principal_eigenpair(*op, 1e-12);
    const double exact = 2 * oracle::pi * oracle::pi;
    CHECK(std::abs(ep.lambda / exact - 1) < 0.01);
    CHECK(ep.phi.max_closure() == 1.0);
    double mn = 1.0;
    for (std::size_t k : g->interior_nodes()) mn = std::min(mn, ep.phi[k]);
    CHECK(mn > 0.0);
    CHECK(ep.residual < 1e-8);
    CHECK(interior_error(ep.phi, oracle::sinsin) < 1e-3);
  }

  TEST_CASE("principal eigenpair on the disk") {
    auto g = Grid::uniform(Domain::unit_disk(), 129);
    auto op = assemble_laplacian(g);
    auto ep = principal_eigenpair(*op, 1e-12);
    const double exact = oracle::j01 * oracle::j01;
    CHECK(std::abs(ep.lambda / exact - 1) < 0.01);
    CHECK(ep.phi.max_closure() == 1.0);
    CHECK(interior_error(ep.phi, oracle::disk_mode) < 5e-3);
    CHECK_THROWS_AS(principal_eigenpair(*op, 0.0), ConfigError);
  }

  TEST_CASE("eigenvalue error is second order on the square") {
    std::vector<double> err;
    for (int n : {17, 33, 65}) {
      auto g = Grid::uniform(Domain::unit_square(), n);
      err.push_back(std::abs(principal_eigenpair(*assemble_laplacian(g)).lambda - 2 * oracle::pi * oracle::pi));
    }
    CHECK(err[0] / err[1] == doctest::Approx(4.0).epsilon(0.05));
    CHECK(err[1] / err[2] == doctest::Approx(4.0).epsilon(0.05));
  }
}
