#include "bubbleforge/ansatz.hpp"

#include <cmath>
#include <limits>

#include "bubbleforge/errors.hpp"

namespace bubbleforge {

namespace {

double bubble_value(Point x, Point xi, double a, double shift) {
  const double a2 = a * a;
  const double d = a2 + dot(x - xi, x - xi);
  return std::log(8.0 * a2) - 2.0 * std::log(d) + shift;
}

double bubble_shift(Point xi, const ProblemData& data) { return data.s * data.phi(xi) - data.log_k(xi); }

}  // namespace

double default_beta(std::size_t m) {
  const double x = static_cast<double>(m);
  return x * x + x + 1.0;
}

AdmissibilityReport check_admissible(const std::vector<Point>& xi, double s, double beta, const ProblemData& data) {
  AdmissibilityReport r;
  r.in_lambda = true;
  r.min_separation = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < xi.size(); ++j) {
    if (!data.domain().contains(xi[j]) || !data.in_lambda(xi[j])) {
      r.in_lambda = false;
      r.max_height_deficit = std::max(r.max_height_deficit, 1.0);
      continue;
    }
    r.max_height_deficit = std::max(r.max_height_deficit, 1.0 - data.phi(xi[j]));
    for (std::size_t i = 0; i < j; ++i) r.min_separation = std::min(r.min_separation, distance(xi[i], xi[j]));
  }
  r.height = r.max_height_deficit <= 1.0 / std::sqrt(s);
  r.separation = r.min_separation >= std::pow(s, -beta);
  return r;
}

std::vector<double> compute_mu(const std::vector<Point>& xi, const ProblemData& data) {
  const Grid& g = *data.grid;
  for (std::size_t j = 0; j < xi.size(); ++j)
    for (std::size_t i = 0; i < j; ++i) {
      const double h = std::max(g.local_spacing(xi[i]), g.local_spacing(xi[j]));
      if (distance(xi[i], xi[j]) <= 4.0 * h) throw ConstructionError("spikes closer than 4h");
    }
  std::vector<double> mu(xi.size());
  for (std::size_t k = 0; k < xi.size(); ++k) {
    double rhs = data.log_k(xi[k]) + data.green->robin_diagonal(xi[k]);
    for (std::size_t i = 0; i < xi.size(); ++i)
      if (i != k) rhs += data.green->green(xi[i], xi[k]);
    mu[k] = std::sqrt(std::exp(rhs) / 8.0);
  }
  return mu;
}

SpikeConfiguration make_configuration(std::vector<Point> xi, const ProblemData& data, double beta) {
  if (xi.empty()) throw ConfigError("configuration needs at least one spike");
  SpikeConfiguration c;
  c.s = data.s;
  c.beta = beta;
  c.delta = std::exp(-data.s / 2.0);
  c.admissibility = check_admissible(xi, data.s, beta, data);
  c.xi = std::move(xi);
  c.mu = compute_mu(c.xi, data);
  for (std::size_t j = 0; j < c.m(); ++j) {
    c.delta_j.push_back(std::exp(-data.s * data.phi(c.xi[j]) / 2.0));
    c.gamma.push_back(c.mu[j] * c.delta_j[j] / c.delta);
    c.shift.push_back(bubble_shift(c.xi[j], data));
  }
  return c;
}

SpikeConfiguration make_configuration(std::vector<Point> xi, const ProblemData& data) {
  const std::size_t m = xi.size();
  return make_configuration(std::move(xi), data, default_beta(m));
}

GradingSpec grading_for(const SpikeConfiguration& config) {
  GradingSpec g;
  g.h_min = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < config.m(); ++j) {
    g.foci_x.push_back(config.xi[j].x);
    g.foci_y.push_back(config.xi[j].y);
    g.h_min = std::min(g.h_min, config.scale(j) / 8.0);
  }
  return g;
}

ScalarField bubble_profile(Point xi, double mu, double delta_j, const ProblemData& data) {
  const double a = mu * delta_j;
  if (!(a > 0.0)) throw ConfigError("bubble scale must be positive");
  const double shift = bubble_shift(xi, data);
  return ScalarField::sample(data.grid, [=](Point x) { return bubble_value(x, xi, a, shift); });
}

double bubble_at(const SpikeConfiguration& config, std::size_t j, Point x) {
  return bubble_value(x, config.xi[j], config.scale(j), config.shift[j]);
}

double bubble_density(const SpikeConfiguration& config, std::size_t j, Point x) {
  const double a2 = config.scale(j) * config.scale(j);
  const double d = a2 + dot(x - config.xi[j], x - config.xi[j]);
  return 8.0 * a2 / (d * d);
}

Ansatz assemble_ansatz(const SpikeConfiguration& config, const ProblemData& data) {
  if (!config.admissibility.admissible()) throw ConstructionError("configuration is not admissible");
  const Grid& g = *data.grid;
  for (std::size_t j = 0; j < config.m(); ++j)
    if (config.scale(j) < 2.0 * g.local_spacing(config.xi[j]))
      throw ConstructionError("spike scale mu_j delta_j is below twice the grid spacing; refine or lower s");

  Ansatz a;
  a.config = config;
  a.U = ScalarField(data.grid);
  const auto& op = *data.laplacian;
  for (std::size_t j = 0; j < config.m(); ++j) {
    const Point xi = config.xi[j];
    a.bubbles.push_back(bubble_profile(xi, config.mu[j], config.delta_j[j], data));
    a.corrections.push_back(harmonic_extension(op, [&config, j](Point x) { return -bubble_at(config, j, x); }));
    a.U += a.bubbles.back();
    a.U += a.corrections.back();

    // Expected leading behaviour of H_j from the regular part at the exact pole.
    ScalarField reg = harmonic_extension(op, [xi](Point x) { return gamma(x, xi); });
    const double offset = -std::log(8.0 * config.mu[j] * config.mu[j]) + data.log_k(xi);
    double defect = 0.0;
    for (std::size_t k : g.interior_nodes())
      defect = std::max(defect, std::abs(a.corrections.back()[k] - reg[k] - offset));
    a.expansion_defect.push_back(defect);
  }
  a.R = residual(a, data);
  a.star_norm = star_norm(a.R, config);
  return a;
}

ScalarField residual(const Ansatz& ansatz, const ProblemData& data) {
  const Grid& g = *data.grid;
  const auto& c = ansatz.config;
  ScalarField r(data.grid);
  for (std::size_t k : g.interior_nodes()) {
    const Point x = g.node(k);
    double lap = 0.0;
    for (std::size_t j = 0; j < c.m(); ++j) lap -= bubble_density(c, j, x);
    r[k] = lap + std::exp(data.log_weight(k) + ansatz.U[k]);
  }
  return r;
}

ScalarField discrete_residual(const Ansatz& ansatz, const ProblemData& data) { return in3_residual(ansatz.U, data); }

double star_weight(const SpikeConfiguration& config, Point x) {
  double w = 1.0;
  for (std::size_t j = 0; j < config.m(); ++j) {
    const double a = config.scale(j);
    w += a / std::pow(a * a + dot(x - config.xi[j], x - config.xi[j]), 1.5);
  }
  return w;
}

double star_norm(const ScalarField& f, const SpikeConfiguration& config, const std::function<bool(Point)>& region) {
  const Grid& g = f.grid();
  double sup = 0.0;
  for (std::size_t k : g.interior_nodes()) {
    const Point x = g.node(k);
    if (region && !region(x)) continue;
    sup = std::max(sup, std::abs(f[k]) / star_weight(config, x));
  }
  return sup;
}

double star_norm_scaled(const ScalarField& f, const SpikeConfiguration& config) {
  const Grid& g = f.grid();
  const double d = config.delta;
  double sup = 0.0;
  for (std::size_t k : g.interior_nodes()) {
    const Point y = g.node(k) * (1.0 / d);
    double w = d * d;
    for (std::size_t j = 0; j < config.m(); ++j) {
      const Point yj = config.xi[j] * (1.0 / d);
      const double gm = config.gamma[j];
      w += gm / std::pow(gm * gm + dot(y - yj, y - yj), 1.5);
    }
    sup = std::max(sup, std::abs(d * d * f[k]) / w);
  }
  return sup;
}

}  // namespace bubbleforge
