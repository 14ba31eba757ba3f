#include <doctest.h>

#include <random>
#include <sstream>

#include "bubbleforge/errors.hpp"
#include "bubbleforge/geometry.hpp"
#include "oracles.hpp"

using namespace bubbleforge;

namespace {

double max_interior_error(const ScalarField& f, const PointFunction& exact) {
  double e = 0.0;
  for (std::size_t k : f.grid().interior_nodes()) e = std::max(e, std::abs(f[k] - exact(f.grid().node(k))));
  return e;
}

}  // namespace

TEST_SUITE("geometry") {
  TEST_CASE("unit square n=3 has one interior node at the centre") {
    auto g = Grid::uniform(Domain::unit_square(), 3);
    REQUIRE(g->interior_count() == 1);
    const Point p = g->node(g->interior_node(0));
    CHECK(p.x == doctest::Approx(0.5));
    CHECK(p.y == doctest::Approx(0.5));
  }

  TEST_CASE("unit disk n=5 interior count matches brute-force enumeration") {
    auto g = Grid::uniform(Domain::unit_disk(), 5);
    int count = 0;
    for (int j = 0; j < 5; ++j)
      for (int i = 0; i < 5; ++i) {
        const double x = -1.0 + 0.5 * i, y = -1.0 + 0.5 * j;
        count += x * x + y * y < 1.0;
      }
    CHECK(g->interior_count() == static_cast<std::size_t>(count));
    CHECK(count == 9);
  }

  TEST_CASE("rectangle 2x1 n=5 spacing on the long axis") {
    auto g = Grid::uniform(Domain::rectangle(2.0, 1.0), 5);
    CHECK(g->spacing_x() == doctest::Approx(0.5));
    CHECK(g->spacing_y() == doctest::Approx(0.25));
    CHECK(g->spacing() == doctest::Approx(0.5));
  }

  TEST_CASE("grid too coarse for an interior node is rejected") {
    CHECK_THROWS_AS(Grid::uniform(Domain::unit_square(), 2), GeometryError);
    CHECK_THROWS_AS(Domain::parse("triangle"), ConfigError);
    CHECK_THROWS_AS(Domain::parse("rectangle:2"), ConfigError);
    CHECK(Domain::parse("rectangle:2x0.5").width() == 2.0);
  }

  TEST_CASE("classification invariants") {
    for (auto d : {Domain::unit_square(), Domain::unit_disk(), Domain::rectangle(2.0, 1.0)}) {
      for (int n : {17, 33, 40}) {
        auto g = Grid::uniform(d, n);
        std::vector<int> seen(g->interior_count(), 0);
        for (std::size_t k = 0; k < g->node_count(); ++k) {
          const double sd = d.signed_distance(g->node(k));
          if (g->kind(k) == NodeKind::interior) {
            CHECK(sd < 0.0);
            ++seen.at(static_cast<std::size_t>(g->interior_index(k)));
          } else {
            CHECK(g->interior_index(k) == -1);
          }
        }
        for (int s : seen) CHECK(s == 1);
        for (std::size_t q = 0; q < g->interior_count(); ++q)
          for (const Arm& a : g->arms(q)) {
            CHECK(a.length > 0.0);
            CHECK(a.length <= g->spacing() * (1 + 1e-12));
            if (a.ends_on_boundary) CHECK(std::abs(d.signed_distance(a.at)) < 1e-12);
            else CHECK(g->kind(a.node) == NodeKind::interior);
          }
      }
    }
  }

  TEST_CASE("interpolation reproduces constants and affine functions") {
    auto g = Grid::uniform(Domain::unit_square(), 17);
    auto c = ScalarField(g, 7.0);
    CHECK(interpolate(c, {0.123, 0.77}) == doctest::Approx(7.0).epsilon(1e-15));
    auto f = ScalarField::sample(g, [](Point p) { return p.x + 2 * p.y; });
    CHECK(interpolate(f, {0.3, 0.4}) == doctest::Approx(1.1).epsilon(1e-14));
    CHECK_THROWS_AS(interpolate(f, {1.2, 0.5}), GeometryError);
    auto gd = Grid::uniform(Domain::unit_disk(), 17);
    CHECK_THROWS_AS(interpolate(ScalarField(gd, 1.0), {0.8, 0.8}), GeometryError);
  }

  TEST_CASE("interpolation of x^2 at mid-cell is second order") {
    double prev = 0.0;
    for (int n : {17, 33, 65}) {
      auto g = Grid::uniform(Domain::unit_square(), n);
      auto f = ScalarField::sample(g, [](Point p) { return p.x * p.x; });
      const double h = g->spacing();
      const Point p{0.5 + 0.5 * h, 0.25 + 0.5 * h};
      const double err = std::abs(interpolate(f, p) - p.x * p.x);
      CHECK(err == doctest::Approx(h * h / 4).epsilon(1e-9));
      if (prev > 0) CHECK(prev / err == doctest::Approx(4.0).epsilon(1e-6));
      prev = err;
    }
  }

  TEST_CASE("integration oracles") {
    auto sq = Grid::uniform(Domain::unit_square(), 33);
    CHECK(std::abs(integrate(ScalarField(sq, 1.0)) - 1.0) < 1e-10);

    std::vector<double> disk_err, sin_err;
    for (int n : {33, 65, 129}) {
      auto gd = Grid::uniform(Domain::unit_disk(), n);
      disk_err.push_back(std::abs(integrate(ScalarField(gd, 1.0)) - oracle::pi));
      auto gs = Grid::uniform(Domain::unit_square(), n);
      sin_err.push_back(std::abs(integrate(ScalarField::sample(gs, oracle::sinsin)) - 4.0 / (oracle::pi * oracle::pi)));
    }
    // Disk: at least first order (cut cells are polygonal chords).
    CHECK(disk_err[2] < 2.0 / 128);
    CHECK(disk_err[0] / disk_err[2] > 3.0);
    CHECK(sin_err[0] / sin_err[1] == doctest::Approx(4.0).epsilon(0.02));
    CHECK(sin_err[1] / sin_err[2] == doctest::Approx(4.0).epsilon(0.02));
  }

  TEST_CASE("quadrature of degree-1 monomial products is exact on the square") {
    auto g = Grid::uniform(Domain::rectangle(1.0, 1.0), 21);
    auto gs = Grid::uniform(Domain::unit_square(), 21);
    for (auto grid : {g, gs}) {
      CHECK(integrate(ScalarField::sample(grid, [](Point p) { return p.x; })) == doctest::Approx(0.5).epsilon(1e-14));
      CHECK(integrate(ScalarField::sample(grid, [](Point p) { return p.y; })) == doctest::Approx(0.5).epsilon(1e-14));
      CHECK(integrate(ScalarField::sample(grid, [](Point p) { return p.x * p.y; })) ==
            doctest::Approx(0.25).epsilon(1e-14));
    }
  }

  TEST_CASE("region quadrature of a disc inside the square") {
    auto g = Grid::uniform(Domain::unit_square(), 129);
    const double r = 0.3;
    const double a = integrate_region(ScalarField(g, 1.0), [r](Point p) { return std::hypot(p.x - 0.5, p.y - 0.5) - r; });
    CHECK(a == doctest::Approx(oracle::pi * r * r).epsilon(1e-3));
    const double outside =
        integrate_region(ScalarField(g, 1.0), [r](Point p) { return r - std::hypot(p.x - 0.5, p.y - 0.5); });
    CHECK(a + outside == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("gradient oracles") {
    auto g = Grid::uniform(Domain::unit_disk(), 33);
    auto f = ScalarField::sample(g, [](Point p) { return 3 * p.x - p.y; });
    auto grad = gradient(f);
    auto c = gradient(ScalarField(g, 2.5));
    for (std::size_t k : g->interior_nodes()) {
      CHECK(grad.dx[k] == doctest::Approx(3.0).epsilon(1e-12));
      CHECK(grad.dy[k] == doctest::Approx(-1.0).epsilon(1e-12));
      CHECK(c.dx[k] == 0.0);
      CHECK(c.dy[k] == 0.0);
    }
  }

  TEST_CASE("gradient of x^2 is second order where central") {
    // Central differences are exact for quadratics; one-sided three-point
    // too. Use x^3 for a genuine O(h^2) error.
    std::vector<double> err;
    for (int n : {17, 33, 65}) {
      auto g = Grid::uniform(Domain::unit_square(), n);
      auto f = ScalarField::sample(g, [](Point p) { return p.x * p.x; });
      auto f3 = ScalarField::sample(g, [](Point p) { return p.x * p.x * p.x; });
      auto d = gradient(f);
      auto d3 = gradient(f3);
      double e = 0.0, e2 = 0.0;
      for (std::size_t k : g->interior_nodes()) {
        const Point p = g->node(k);
        e2 = std::max(e2, std::abs(d.dx[k] - 2 * p.x));
        e = std::max(e, std::abs(d3.dx[k] - 3 * p.x * p.x));
      }
      CHECK(e2 < 1e-11);
      err.push_back(e);
    }
    CHECK(err[0] / err[1] == doctest::Approx(4.0).epsilon(0.05));
    CHECK(err[1] / err[2] == doctest::Approx(4.0).epsilon(0.05));
  }

  TEST_CASE("adding constants commutes with interpolation and gradient") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.05, 0.95), cdist(-10, 10);
    auto g = Grid::uniform(Domain::unit_square(), 25);
    auto f = ScalarField::sample(g, [](Point p) { return std::sin(3 * p.x) * std::exp(p.y); });
    for (int t = 0; t < 20; ++t) {
      const double c = cdist(rng);
      ScalarField fc = f;
      fc += c;
      const Point p{u(rng), u(rng)};
      CHECK(interpolate(fc, p) == doctest::Approx(interpolate(f, p) + c).epsilon(1e-12));
      auto ga = gradient(f), gb = gradient(fc);
      for (std::size_t k : g->interior_nodes()) CHECK(std::abs(ga.dx[k] - gb.dx[k]) < 1e-9);
    }
  }

  TEST_CASE("refinement n -> 2n-1 nests nodes") {
    auto fn = [](Point p) { return std::exp(p.x) * std::cos(p.y); };
    auto coarse = Grid::uniform(Domain::unit_square(), 17);
    auto fine = Grid::uniform(Domain::unit_square(), 33);
    for (int j = 0; j < 17; ++j)
      for (int i = 0; i < 17; ++i) {
        const Point a = coarse->node(coarse->index(i, j));
        const Point b = fine->node(fine->index(2 * i, 2 * j));
        CHECK(a.x == doctest::Approx(b.x).epsilon(1e-15));
        CHECK(a.y == doctest::Approx(b.y).epsilon(1e-15));
      }
    // Bilinear values of the fine field at coarse cell centres differ O(h^2).
    auto ff = ScalarField::sample(fine, fn);
    auto fc = ScalarField::sample(coarse, fn);
    double e = 0.0;
    for (int j = 0; j < 16; ++j)
      for (int i = 0; i < 16; ++i) {
        const Point p = coarse->node(coarse->index(i, j)) + Point{1.0 / 32, 1.0 / 32};
        e = std::max(e, std::abs(interpolate(ff, p) - interpolate(fc, p)));
      }
    CHECK(e < 2.0 * coarse->spacing() * coarse->spacing());
  }

  TEST_CASE("field arithmetic requires a common grid") {
    auto a = Grid::uniform(Domain::unit_square(), 17);
    auto b = Grid::uniform(Domain::unit_square(), 17);
    ScalarField fa(a, 1.0), fb(b, 2.0);
    CHECK_THROWS_AS(fa += fb, GeometryError);
    CHECK_THROWS_AS(ScalarField(a, std::vector<double>(3)), GeometryError);
    ScalarField s = fa + fa;
    CHECK(s[0] == 2.0);
  }

  TEST_CASE("graded grid keeps foci as nodes and stays symmetric") {
    GradingSpec spec;
    spec.foci_x = {-0.24, 0.24};
    spec.foci_y = {0.0};
    spec.h_min = 1e-4;
    auto g = Grid::graded(Domain::unit_disk(), 257, spec);
    REQUIRE(g->nx() == 257);
    auto xs = g->xs();
    auto ys = g->ys();
    CHECK(xs.front() == -1.0);
    CHECK(xs.back() == 1.0);
    for (int i = 0; i < 257; ++i) {
      CHECK(xs[i] == doctest::Approx(-xs[256 - i]).epsilon(1e-15));
      if (i > 0) CHECK(xs[i] > xs[i - 1]);
    }
    CHECK(ys[128] == 0.0);
    CHECK(std::find(xs.begin(), xs.end(), 0.24) != xs.end());
    CHECK(std::find(xs.begin(), xs.end(), -0.24) != xs.end());
    CHECK(g->min_spacing() < 1.2e-4);
    CHECK(g->local_spacing({0.24, 0.0}) < 1.2e-4);
    // A field sampled on the graded grid integrates accurately.
    auto f = ScalarField(g, 1.0);
    CHECK(integrate(f) == doctest::Approx(oracle::pi).epsilon(1e-3));
    CHECK_THROWS_AS(Grid::graded(Domain::unit_square(), 17, {{0.5}, {0.5}, 1e-9, 0.1}), GeometryError);
  }

  TEST_CASE("smooth sampler interpolates nodes and its gradient is exact") {
    auto g = Grid::uniform(Domain::unit_square(), 33);
    auto f = ScalarField::sample(g, [](Point p) { return std::sin(2 * p.x) * std::cos(3 * p.y); });
    SmoothSampler s(f);
    for (std::size_t k = 0; k < g->node_count(); k += 37) CHECK(s.value(g->node(k)) == doctest::Approx(f[k]).epsilon(1e-13));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.1, 0.9);
    for (int t = 0; t < 20; ++t) {
      const Point p{u(rng), u(rng)};
      Point grad;
      s.value_and_gradient(p, grad);
      const double e = 1e-6;
      const double fx = (s.value(p + Point{e, 0}) - s.value(p - Point{e, 0})) / (2 * e);
      const double fy = (s.value(p + Point{0, e}) - s.value(p - Point{0, e})) / (2 * e);
      CHECK(grad.x == doctest::Approx(fx).epsilon(1e-6));
      CHECK(grad.y == doctest::Approx(fy).epsilon(1e-6));
      CHECK(s.value(p) == doctest::Approx(std::sin(2 * p.x) * std::cos(3 * p.y)).epsilon(1e-4));
    }
  }

  TEST_CASE("csv dump round-trips through a tabulated field") {
    auto g = Grid::uniform(Domain::unit_disk(), 17);
    auto f = ScalarField::sample(g, [](Point p) { return 1.0 - p.x * p.x - 0.5 * p.y; });
    std::stringstream ss;
    write_csv(f, ss);
    const std::string text = ss.str();
    CHECK(text.rfind("x,y,value\n", 0) == 0);
    std::size_t rows = 0;
    for (char c : text) rows += c == '\n';
    std::size_t closure = 0;
    for (std::size_t k = 0; k < g->node_count(); ++k) closure += g->in_closure(k);
    CHECK(rows == closure + 1);
    auto t = TabulatedField::read_csv(ss);
    for (std::size_t k : g->interior_nodes()) CHECK(t(g->node(k)) == f[k]);
    std::stringstream bad("a,b,c\n");
    CHECK_THROWS_AS(TabulatedField::read_csv(bad), ConfigError);
  }

  TEST_CASE("ghost extrapolation matches linear boundary data") {
    auto g = Grid::uniform(Domain::unit_disk(), 33);
    auto lin = [](Point p) { return 2.0 + p.x - 3.0 * p.y; };
    auto f = ScalarField::sample(g, lin);
    Eigen::VectorXd v = f.interior_vector();
    auto r = ScalarField::from_interior(g, v, lin);
    double e = 0.0;
    for (std::size_t k = 0; k < g->node_count(); ++k)
      if (g->kind(k) != NodeKind::exterior || std::abs(r[k]) > 0) e = std::max(e, std::abs(r[k] - lin(g->node(k))));
    CHECK(e < 1e-10);
    CHECK(max_interior_error(r, lin) < 1e-14);
    CHECK(integrate(r) == doctest::Approx(integrate(f)).epsilon(1e-12));
  }
}
