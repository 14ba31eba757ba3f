#include "bubbleforge/energy.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "bubbleforge/errors.hpp"

namespace bubbleforge {

namespace {

constexpr double pi = std::numbers::pi;

// 8-point Gauss-Legendre rule on [-1, 1].
constexpr std::array<double, 4> gl_x{0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363};
constexpr std::array<double, 4> gl_w{0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

constexpr int angular_points = 256;
constexpr double panels_per_unit_t = 2.0;

// int over theta, t = log w in [t_lo(theta), 0] of f(x) dt dtheta, with
// x = xi + a sqrt(1/w - 1) (cos, sin). The rho_j dA measure is 4 w dt dtheta
// and is left to the caller.
template <class Lower, class F>
double polar_core(Point xi, double a, Lower&& t_lo, F&& f) {
  double total = 0.0;
  for (int q = 0; q < angular_points; ++q) {
    const double th = 2.0 * pi * q / angular_points;
    const Point dir{std::cos(th), std::sin(th)};
    const double lo = t_lo(dir);
    if (!(lo < 0.0)) continue;
    const int panels = std::max(4, static_cast<int>(std::ceil(-lo * panels_per_unit_t)));
    const double width = -lo / panels;
    double line = 0.0;
    for (int p = 0; p < panels; ++p) {
      const double mid = lo + (p + 0.5) * width;
      for (std::size_t g = 0; g < gl_x.size(); ++g)
        for (double sign : {-1.0, 1.0}) {
          const double t = mid + sign * gl_x[g] * width / 2;
          const double w = std::exp(t);
          const double r = a * std::sqrt(std::max(0.0, 1.0 / w - 1.0));
          line += gl_w[g] * width / 2 * f(xi + dir * r, w);
        }
    }
    total += line;
  }
  return total * 2.0 * pi / angular_points;
}

double smoothstep(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

// 1 inside r1, 0 beyond r2.
double cutoff(double r, double r1, double r2) { return 1.0 - smoothstep((r - r1) / (r2 - r1)); }

double expansion_value(const std::vector<Point>& xi, double s, const ProblemData& data) {
  const auto r = energy_expansion(xi, s, data);
  return r.j_expansion;
}

}  // namespace

double energy_full(const ScalarField& u, const ProblemData& data) {
  if (u.grid_ptr() != data.grid) throw GeometryError("field lives on a different grid");
  for (double v : u.values())
    if (!std::isfinite(v)) throw ConfigError("energy of a non-finite field");
  const VectorField g = gradient(u);
  ScalarField dens(data.grid);
  for (std::size_t k = 0; k < dens.size(); ++k) dens[k] = g.dx[k] * g.dx[k] + g.dy[k] * g.dy[k];
  return 0.5 * integrate(dens) - in3_mass(u, data);
}

EnergyReport energy_expansion(const std::vector<Point>& xi, double s, const ProblemData& data) {
  EnergyReport r;
  for (std::size_t i = 0; i < xi.size(); ++i) {
    r.height += 8.0 * pi * s * data.phi(xi[i]);
    for (std::size_t j = 0; j < xi.size(); ++j) {
      if (i == j) continue;
      const double d = distance(xi[i], xi[j]);
      if (!(d > 0.0)) throw ConstructionError("coincident spikes in the energy expansion");
      r.interaction += 16.0 * pi * std::log(d);
    }
  }
  r.j_expansion = r.interaction + r.height;
  r.j_full = std::numeric_limits<double>::quiet_NaN();
  r.discrepancy = std::numeric_limits<double>::quiet_NaN();
  return r;
}

std::vector<Point> expansion_gradient(const std::vector<Point>& xi, double s, const ProblemData& data) {
  std::vector<Point> g(xi.size());
  for (std::size_t k = 0; k < xi.size(); ++k) {
    Point gp;
    data.phi_sampler->value_and_gradient(xi[k], gp);
    g[k] = gp * (8.0 * pi * s);
    for (std::size_t j = 0; j < xi.size(); ++j) {
      if (j == k) continue;
      const Point d = xi[k] - xi[j];
      const double d2 = dot(d, d);
      if (!(d2 > 0.0)) throw ConstructionError("coincident spikes in the energy gradient");
      g[k] += d * (32.0 * pi / d2);
    }
  }
  return g;
}

double energy_of_ansatz(const Ansatz& ansatz, const ProblemData& data) {
  const auto& c = ansatz.config;
  const Domain& dom = data.domain();
  const std::size_t m = c.m();

  auto corrections_at = [&](Point x) {
    double h = 0.0;
    for (std::size_t i = 0; i < m; ++i) h += interpolate(ansatz.corrections[i], x);
    return h;
  };
  auto bubbles_except = [&](Point x, std::size_t skip) {
    double u = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      if (i != skip) u += bubble_at(c, i, x);
    return u;
  };

  // Cutoff radii: inside half the distance to the nearest spike and to the boundary.
  std::vector<double> r2(m);
  for (std::size_t j = 0; j < m; ++j) {
    double r = std::min(0.25, -0.5 * dom.signed_distance(c.xi[j]));
    for (std::size_t i = 0; i < m; ++i)
      if (i != j) r = std::min(r, 0.5 * distance(c.xi[i], c.xi[j]));
    r2[j] = r;
  }

  double dirichlet = 0.0;
  double core_mass = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double a = c.scale(j);
    const double a2 = a * a;
    const Point xi = c.xi[j];
    auto to_boundary = [&](Point dir) {
      const double rr = dom.ray_exit(xi, dir) * (1.0 - 1e-9);
      return std::log(a2 / (a2 + rr * rr));
    };
    dirichlet += polar_core(xi, a, to_boundary, [&](Point x, double w) {
      const double u = bubble_at(c, j, x) + bubbles_except(x, j) + corrections_at(x);
      return 4.0 * w * u;
    });
    const double lo = std::log(a2 / (a2 + r2[j] * r2[j]));
    core_mass += polar_core(xi, a, [lo](Point) { return lo; }, [&](Point x, double w) {
      const double r = distance(x, xi);
      const double chi = cutoff(r, 0.5 * r2[j], r2[j]);
      if (chi == 0.0) return 0.0;
      const double g = data.log_k(x) - c.s * data.phi(x) + c.shift[j] + bubbles_except(x, j) + corrections_at(x);
      return 4.0 * w * chi * std::exp(g);
    });
  }

  const Grid& grid = *data.grid;
  const auto& wq = grid.quadrature_weights();
  double far = 0.0;
  for (std::size_t k = 0; k < wq.size(); ++k) {
    if (wq[k] == 0.0) continue;
    const Point x = grid.node(k);
    double outside = 1.0;
    for (std::size_t j = 0; j < m; ++j) outside -= cutoff(distance(x, c.xi[j]), 0.5 * r2[j], r2[j]);
    if (outside <= 0.0) continue;
    far += wq[k] * outside * std::exp(data.log_weight(k) + ansatz.U[k]);
  }
  return 0.5 * dirichlet - (core_mass + far);
}

EnergyReport energy_report(const Ansatz& ansatz, const ProblemData& data) {
  EnergyReport r = energy_expansion(ansatz.config.xi, ansatz.config.s, data);
  r.j_full = energy_of_ansatz(ansatz, data);
  r.discrepancy = r.j_full - r.j_expansion;
  return r;
}

Point phi_maximizer(const ProblemData& data) {
  std::size_t best = data.grid->interior_node(0);
  for (std::size_t k : data.grid->interior_nodes())
    if (data.eigen.phi[k] > data.eigen.phi[best]) best = k;
  return data.grid->node(best);
}

std::vector<Point> project_admissible(std::vector<Point> xi, double s, double beta, const ProblemData& data) {
  const double target = std::max(data.lambda_threshold, 1.0 - 1.0 / std::sqrt(s)) + 1e-12;
  const double sep = std::pow(s, -beta);
  for (int outer = 0; outer < 20; ++outer) {
    bool moved = false;
    for (Point& p : xi) {
      for (int inner = 0; inner < 20; ++inner) {
        Point g;
        const double v = data.phi_sampler->value_and_gradient(p, g);
        if (v >= target) break;
        const double g2 = dot(g, g);
        if (!(g2 > 0.0)) break;
        p += g * (1.01 * (target - v) / g2);
        moved = true;
      }
    }
    for (std::size_t j = 0; j < xi.size(); ++j)
      for (std::size_t i = 0; i < j; ++i) {
        Point d = xi[j] - xi[i];
        const double len = norm(d);
        if (len >= sep) continue;
        d = len > 0.0 ? d * (1.0 / len) : Point{1.0, 0.0};
        const double push = 0.5 * (sep - len) * (1.0 + 1e-6) + 1e-15;
        xi[j] += d * push;
        xi[i] -= d * push;
        moved = true;
      }
    if (!moved) break;
  }
  return xi;
}

OptimizationResult maximize_configuration(std::size_t m, const ProblemData& data,
                                          const std::optional<std::vector<Point>>& seed,
                                          const OptimizerOptions& options) {
  if (m == 0) throw ConfigError("m must be at least 1");
  if (seed && seed->size() != m) throw ConfigError("seed configuration has the wrong spike count");
  const double s = data.s;
  if (!(s > 0.0)) throw ConfigError("s must be positive");
  const double beta = options.beta.value_or(default_beta(m));
  const Point center = phi_maximizer(data);
  const double radius = 1.0 / std::sqrt(s);

  std::vector<std::vector<Point>> starts;
  auto polygon = [&](double theta0) {
    std::vector<Point> p;
    for (std::size_t j = 0; j < m; ++j) {
      const double th = theta0 + 2.0 * pi * static_cast<double>(j) / static_cast<double>(m);
      p.push_back(center + Point{radius * std::cos(th), radius * std::sin(th)});
    }
    return p;
  };
  if (seed) {
    starts.push_back(*seed);
  } else if (m == 1) {
    starts.push_back({center});
  } else {
    starts.push_back(polygon(0.0));
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * pi / static_cast<double>(m));
    for (int r = 0; r < options.rotations; ++r) starts.push_back(polygon(angle(rng)));
  }

  OptimizationResult best;
  bool have_best = false;
  for (std::size_t st = 0; st < starts.size(); ++st) {
    std::vector<Point> x = project_admissible(starts[st], s, beta, data);
    double f = expansion_value(x, s, data);
    double step = 0.25 * radius;
    bool converged = false;
    int it = 0;
    std::vector<OptimizerTraceRow> trace;
    while (it < options.max_iterations) {
      ++it;
      const auto g = expansion_gradient(x, s, data);
      double gn = 0.0;
      for (const Point& p : g) gn += dot(p, p);
      gn = std::sqrt(gn);
      if (!(gn > 0.0)) {
        converged = true;
        break;
      }
      std::vector<Point> trial(x);
      for (std::size_t j = 0; j < m; ++j) trial[j] += g[j] * (step / gn);
      trial = project_admissible(std::move(trial), s, beta, data);
      const double ft = expansion_value(trial, s, data);
      if (ft > f) {
        x = std::move(trial);
        f = ft;
        step = std::min(1.5 * step, radius);
      } else {
        step *= 0.5;
      }
      trace.push_back({static_cast<int>(st), it, f, step});
      if (step < options.step_tolerance) {
        converged = true;
        break;
      }
    }
    const bool take = !have_best || (st == 0 ? true : f > best.value + options.margin);
    if (take) {
      best.value = f;
      best.iterations = it;
      best.start = static_cast<int>(st);
      best.stagnated = !converged;
      best.config.xi = x;
      have_best = true;
    }
    best.trace.insert(best.trace.end(), trace.begin(), trace.end());
  }

  auto report = check_admissible(best.config.xi, s, beta, data);
  if (!report.admissible()) throw ConstructionError("no admissible configuration found");
  best.config = make_configuration(best.config.xi, data, beta);
  return best;
}

}  // namespace bubbleforge
