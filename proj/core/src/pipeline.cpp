#include "bubbleforge/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "bubbleforge/errors.hpp"

namespace bubbleforge {

namespace {

constexpr double kPi = 3.141592653589793;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

double max_scale(const SpikeConfiguration& c) {
  double a = 0.0;
  for (std::size_t j = 0; j < c.m(); ++j) a = std::max(a, c.scale(j));
  return a;
}

double min_pair_distance(const std::vector<Point>& p) {
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) d = std::min(d, distance(p[i], p[j]));
  return d;
}

void compute_diagnostics(RunResult& r) {
  const ProblemData& data = *r.data;
  const RefinedSolution& sol = *r.solution;
  const SpikeConfiguration& cfg = r.reduction->ansatz.config;
  const auto m = static_cast<double>(cfg.m());
  Diagnostics& d = r.diagnostics;

  const ScalarField u1 = to_in1_solution(sol.u, data);
  d.mass = sol.mass;
  d.mass_in1 = in1_mass(u1, data);
  d.mass_ratio = d.mass / (8.0 * kPi * m);

  double radius = min_pair_distance(cfg.xi) / 3.0;
  if (cfg.m() == 1) radius = -data.domain().signed_distance(cfg.xi[0]) / 3.0;
  double inside = 0.0;
  for (const Point& xi : cfg.xi) {
    const double bm = ball_mass(sol.u, data, xi, radius);
    d.spike_masses.push_back({xi, radius, bm});
    inside += bm;
  }
  d.exterior_mass = d.mass - inside;

  d.spikes = sol.spikes;
  d.spikes_in_lambda = !d.spikes.empty();
  std::vector<Point> locs;
  const Point top = phi_maximizer(data);
  for (const auto& sp : d.spikes) {
    d.spikes_in_lambda = d.spikes_in_lambda && data.in_lambda(sp.location);
    d.distance_to_maximum = std::max(d.distance_to_maximum, distance(sp.location, top));
    locs.push_back(sp.location);
  }
  d.min_separation = min_pair_distance(locs);
  d.separation_bound = std::pow(data.s, -m * (m + 1.0));

  d.far_field = far_field_check(sol.u, cfg, data, default_probes(cfg, data));

  const auto er = energy_report(*r.ansatz, data);
  d.energy_discrepancy = er.discrepancy;
  d.j_full = er.j_full;
  d.j_expansion = er.j_expansion;

  d.star_norm_final = star_norm(extended_in3_residual(sol.precise, data), cfg);
  d.star_norm_ansatz = r.ansatz->star_norm;
  d.psi_contraction = r.contraction.psi_norm;
  d.psi_tilde = (sol.u - r.reduction->ansatz.U).max_abs_interior();
  d.reduced_gradient = std::numeric_limits<double>::quiet_NaN();
  if (locs.size() == cfg.m() && min_pair_distance(locs) > 0.0) {
    double g2 = 0.0;
    for (const Point& g : expansion_gradient(locs, data.s, data)) g2 += dot(g, g);
    d.reduced_gradient = std::sqrt(g2);
  }
  d.in3_residual = sol.residual;
  d.in1_residual = extended_in1_residual(sol.precise, data).max_abs_interior();
}

}  // namespace

void RunConfig::validate() const {
  if (n < 17 || n % 2 == 0) throw ConfigError("n must be odd and at least 17");
  if (coarse_n < 17 || coarse_n % 2 == 0) throw ConfigError("coarse_n must be odd and at least 17");
  if (m < 1) throw ConfigError("m must be at least 1");
  if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("s must be positive");
  if (!(lambda_threshold > 0.0 && lambda_threshold < 1.0)) throw ConfigError("lambda threshold must lie in (0, 1)");
  if (beta && !(*beta > 0.0)) throw ConfigError("beta must be positive");
}

double RunConfig::effective_beta() const { return beta ? *beta : default_beta(m); }

std::vector<Point> default_probes(const SpikeConfiguration& config, const ProblemData& data) {
  const Grid& g = *data.grid;
  const double keep = std::max(5.0 * max_scale(config), 0.25);
  const int stride = std::max(1, g.nx() / 16);
  std::vector<Point> out;
  for (int j = 0; j < g.ny(); j += stride)
    for (int i = 0; i < g.nx(); i += stride) {
      const std::size_t k = g.index(i, j);
      if (g.interior_index(k) < 0) continue;
      const Point p = g.node(k);
      if (!(data.domain().signed_distance(p) < -2.0 * g.spacing())) continue;
      bool far = true;
      for (const Point& xi : config.xi) far = far && distance(p, xi) >= keep;
      if (far) out.push_back(p);
    }
  return out;
}

double far_field_check(const ScalarField& u, const SpikeConfiguration& config, const ProblemData& data,
                       const std::vector<Point>& probes) {
  const double keep = 5.0 * max_scale(config);
  double sup = 0.0;
  for (const Point& p : probes) {
    double v = interpolate(u, p);
    for (const Point& xi : config.xi) {
      if (distance(p, xi) < keep) throw ConstructionError("far-field probe too close to a spike");
      v -= data.green->green(p, xi);
    }
    sup = std::max(sup, std::abs(v));
  }
  return sup;
}

double ball_mass(const ScalarField& u, const ProblemData& data, Point xi, double r) {
  ScalarField f(u.grid_ptr());
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = std::exp(data.log_weight(k) + u[k]);
  return integrate_region(f, [&](Point x) { return std::max(distance(x, xi) - r, data.domain().signed_distance(x)); });
}

RunResult run(const RunConfig& config) {
  config.validate();
  const Domain domain = Domain::parse(config.domain);
  const Forcing forcing = Forcing::parse(config.forcing);
  SetupOptions so;
  so.lambda_threshold = config.lambda_threshold;
  const double beta = config.effective_beta();

  RunResult r;
  r.config = config;
  std::string stage;
  try {
    stage = "coarse_setup";
    const auto coarse = setup_in3(Grid::uniform(domain, std::min(config.coarse_n, config.n)), forcing, config.s, so);
    stage = "optimize";
    OptimizerOptions oo;
    oo.seed = config.seed;
    oo.beta = beta;
    const auto first = maximize_configuration(config.m, coarse, std::nullopt, oo);

    stage = "setup";
    r.grid = Grid::graded(domain, config.n, grading_for(make_configuration(first.config.xi, coarse, beta)));
    r.data = setup_in3(r.grid, forcing, config.s, so);
    const ProblemData& data = *r.data;

    stage = "reascent";
    oo.rotations = 0;
    r.optimization = maximize_configuration(config.m, data, first.config.xi, oo);

    stage = "ansatz";
    r.ansatz = assemble_ansatz(r.optimization.config, data);

    stage = "contraction";
    {
      const auto op = build_operator(*r.ansatz, data);
      const auto basis = build_kernel_basis(r.ansatz->config, data);
      r.contraction = contract(op, basis, *r.ansatz, data);
    }

    stage = "reduction";
    ReductionOptions ro;
    ro.contraction.mode = ResidualMode::discrete;
    r.reduction = reduce_positions(r.ansatz->config, data, ro);

    stage = "newton";
    NewtonOptions no;
    no.expected_spikes = config.m;
    r.solution = newton_refine(r.reduction->ansatz.U + r.reduction->correction.psi, data, no);

    if (!r.solution->settled()) {
      r.exit_code = 2;
      r.failed_stage = "newton";
      r.error = "newton " + to_string(r.solution->status);
      try {
        compute_diagnostics(r);
      } catch (const std::exception&) {
        // partial diagnostics are still written
      }
    } else {
      stage = "diagnostics";
      compute_diagnostics(r);
    }
  } catch (const std::exception& e) {
    r.exit_code = 2;
    r.failed_stage = stage;
    r.error = one_line(e.what());
  }

  if (r.exit_code == 0) {
    if (!r.solution->converged()) r.failed_checks.push_back("newton_residual");
    if (r.diagnostics.spikes.size() != config.m) r.failed_checks.push_back("spike_count");
    if (!r.reduction->ansatz.config.admissibility.admissible()) r.failed_checks.push_back("admissibility");
    if (!r.failed_checks.empty()) r.exit_code = 3;
  }
  if (!config.output.empty()) write_artifacts(r, config.output);
  return r;
}

unsigned worker_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("BUBBLEFORGE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) hw = std::min(hw, static_cast<unsigned>(v));
  }
  return hw;
}

std::vector<RunResult> sweep(const RunConfig& base, const std::vector<double>& s_values, unsigned threads) {
  if (s_values.empty()) throw ConfigError("empty s list");
  std::vector<RunConfig> cfgs;
  for (double s : s_values) {
    RunConfig c = base;
    c.s = s;
    if (!base.output.empty()) {
      char name[48];
      std::snprintf(name, sizeof name, "s_%g", s);
      c.output = base.output / name;
    }
    c.validate();
    cfgs.push_back(std::move(c));
  }
  // Parse failures must surface here, not inside a worker.
  (void)Domain::parse(base.domain);
  (void)Forcing::parse(base.forcing);
  if (threads == 0) threads = worker_count();
  threads = std::min<unsigned>(threads, static_cast<unsigned>(cfgs.size()));

  std::vector<RunResult> results(cfgs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cfgs.size();) {
      try {
        results[i] = run(cfgs[i]);
      } catch (const std::exception& e) {
        results[i].config = cfgs[i];
        results[i].exit_code = 2;
        results[i].failed_stage = "run";
        results[i].error = one_line(e.what());
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  if (!base.output.empty()) {
    std::filesystem::create_directories(base.output);
    std::ofstream os(base.output / "sweep.csv");
    os << "s,exit_code,mass_ratio,spikes,psi_contraction,psi_tilde,star_norm_ansatz,newton_iterations,residual,"
          "far_field,energy_discrepancy\n";
    for (const auto& r : results) {
      const auto& d = r.diagnostics;
      os << fmt(r.config.s) << ',' << r.exit_code << ',' << fmt(d.mass_ratio) << ',' << d.spikes.size() << ','
         << fmt(d.psi_contraction) << ',' << fmt(d.psi_tilde) << ',' << fmt(d.star_norm_ansatz) << ','
         << (r.solution ? r.solution->iterations : -1) << ',' << fmt(d.in3_residual) << ',' << fmt(d.far_field)
         << ',' << fmt(d.energy_discrepancy) << '\n';
    }
  }
  return results;
}

std::string manifest(const RunResult& r) {
  std::ostringstream os;
  auto kv = [&os](const std::string& k, const auto& v) {
    using V = std::decay_t<decltype(v)>;
    if constexpr (std::is_floating_point_v<V>)
      os << k << '=' << fmt(v) << '\n';
    else
      os << k << '=' << v << '\n';
  };
  auto point = [&kv](const std::string& k, Point p) {
    kv(k + ".x", p.x);
    kv(k + ".y", p.y);
  };
  const RunConfig& c = r.config;
  os << "#schema=1\n";
  kv("run.domain", c.domain);
  kv("run.n", c.n);
  kv("run.coarse_n", c.coarse_n);
  kv("run.m", c.m);
  kv("run.s", c.s);
  kv("run.beta", c.effective_beta());
  kv("run.forcing", c.forcing);
  kv("run.lambda_threshold", c.lambda_threshold);
  kv("run.seed", c.seed);
  kv("status.exit_code", r.exit_code);
  kv("status.failed_stage", r.failed_stage);
  kv("status.error", r.error);
  std::string checks;
  for (const auto& f : r.failed_checks) checks += (checks.empty() ? "" : ",") + f;
  kv("status.failed_checks", checks);

  if (r.grid) {
    kv("grid.nx", r.grid->nx());
    kv("grid.ny", r.grid->ny());
    kv("grid.interior", r.grid->interior_count());
    kv("grid.h_min", r.grid->min_spacing());
    kv("grid.h_max", r.grid->spacing());
  }
  if (r.data) {
    kv("problem.lambda1", r.data->lambda1());
    kv("problem.s_in1", r.data->s_in1);
    kv("problem.s", r.data->s);
  }
  if (r.ansatz) {
    const auto& o = r.optimization;
    kv("optimize.value", o.value);
    kv("optimize.iterations", o.iterations);
    kv("optimize.start", o.start);
    kv("optimize.stagnated", o.stagnated);
    const auto& cfg = r.ansatz->config;
    for (std::size_t j = 0; j < cfg.m(); ++j) {
      const std::string p = "config." + std::to_string(j);
      point(p + ".xi", cfg.xi[j]);
      kv(p + ".mu", cfg.mu[j]);
      kv(p + ".delta_j", cfg.delta_j[j]);
      kv(p + ".gamma", cfg.gamma[j]);
    }
    kv("config.admissible", cfg.admissibility.admissible());
    kv("config.min_separation", cfg.admissibility.min_separation);
    kv("config.max_height_deficit", cfg.admissibility.max_height_deficit);
    kv("config.star_norm_R", r.ansatz->star_norm);
    kv("contraction.iterations", r.contraction.iterations);
    kv("contraction.converged", r.contraction.converged);
    kv("contraction.diverged", r.contraction.diverged);
    kv("contraction.psi_norm", r.contraction.psi_norm);
    kv("contraction.fixed_point_residual", r.contraction.fixed_point_residual);
    kv("contraction.last_factor", r.contraction.factors.empty() ? 0.0 : r.contraction.factors.back());
  }
  if (r.reduction) {
    const auto& red = *r.reduction;
    kv("reduction.iterations", red.iterations);
    kv("reduction.converged", red.converged);
    kv("reduction.projection", red.projection);
    for (std::size_t j = 0; j < red.ansatz.config.m(); ++j)
      point("reduction." + std::to_string(j) + ".xi", red.ansatz.config.xi[j]);
  }
  if (r.solution) {
    const auto& s = *r.solution;
    kv("newton.status", to_string(s.status));
    kv("newton.iterations", s.iterations);
    kv("newton.residual", s.residual);
    kv("newton.scaled_residual", s.scaled_residual);
    kv("newton.floor", s.floor);
    const auto& d = r.diagnostics;
    kv("diag.mass", d.mass);
    kv("diag.mass_in1", d.mass_in1);
    kv("diag.mass_ratio", d.mass_ratio);
    kv("diag.exterior_mass", d.exterior_mass);
    for (std::size_t j = 0; j < d.spike_masses.size(); ++j) {
      kv("diag.ball." + std::to_string(j) + ".radius", d.spike_masses[j].radius);
      kv("diag.ball." + std::to_string(j) + ".mass", d.spike_masses[j].mass);
    }
    kv("diag.spike_count", d.spikes.size());
    for (std::size_t j = 0; j < d.spikes.size(); ++j) {
      point("diag.spike." + std::to_string(j), d.spikes[j].location);
      kv("diag.spike." + std::to_string(j) + ".height", d.spikes[j].height);
    }
    kv("diag.spikes_in_lambda", d.spikes_in_lambda);
    kv("diag.min_separation", d.min_separation);
    kv("diag.separation_bound", d.separation_bound);
    kv("diag.distance_to_maximum", d.distance_to_maximum);
    kv("diag.far_field", d.far_field);
    kv("diag.energy_discrepancy", d.energy_discrepancy);
    kv("diag.j_full", d.j_full);
    kv("diag.j_expansion", d.j_expansion);
    kv("diag.star_norm_final", d.star_norm_final);
    kv("diag.star_norm_ansatz", d.star_norm_ansatz);
    kv("diag.psi_contraction", d.psi_contraction);
    kv("diag.psi_tilde", d.psi_tilde);
    kv("diag.reduced_gradient", d.reduced_gradient);
    kv("diag.in3_residual", d.in3_residual);
    kv("diag.in1_residual", d.in1_residual);
  }
  return os.str();
}

void write_artifacts(const RunResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "manifest.txt");
    os << manifest(r);
  }
  if (r.config.dump_fields && r.solution && r.reduction) {
    const auto& data = *r.data;
    auto dump = [&dir](const char* name, const ScalarField& f) {
      std::ofstream os(dir / name);
      write_csv(f, os);
    };
    dump("u.csv", r.solution->u);
    dump("ansatz.csv", r.reduction->ansatz.U);
    dump("psi.csv", r.solution->u - r.reduction->ansatz.U);
    dump("residual.csv", in3_residual(r.solution->u, data));
    dump("phi1.csv", data.eigen.phi);
  }
  if (r.config.trace) {
    {
      std::ofstream os(dir / "optimizer_trace.csv");
      os << "start,iteration,value,step\n";
      for (const auto& t : r.optimization.trace)
        os << t.start << ',' << t.iteration << ',' << fmt(t.value) << ',' << fmt(t.step) << '\n';
    }
    {
      std::ofstream os(dir / "contraction_trace.csv");
      os << "iteration,factor\n";
      for (std::size_t k = 0; k < r.contraction.factors.size(); ++k)
        os << k + 2 << ',' << fmt(r.contraction.factors[k]) << '\n';
    }
    if (r.reduction) {
      std::ofstream os(dir / "reduction_trace.csv");
      os << "iteration,projection,move\n";
      for (const auto& t : r.reduction->history)
        os << t.iteration << ',' << fmt(t.projection) << ',' << fmt(t.move) << '\n';
    }
    if (r.solution) {
      std::ofstream os(dir / "newton_trace.csv");
      os << "iteration,residual,damping\n";
      for (const auto& t : r.solution->history)
        os << t.iteration << ',' << fmt(t.residual) << ',' << fmt(t.damping) << '\n';
    }
  }
}

}  // namespace bubbleforge
