// Command-line front end: `solve` for one run, `sweep` over a list of s.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "bubbleforge/errors.hpp"
#include "bubbleforge/pipeline.hpp"

using namespace bubbleforge;

namespace {

constexpr int kConfigExit = 4;

void add_common(CLI::App& app, RunConfig& c, std::string& h_file) {
  app.add_option("--domain", c.domain, "disk | square | rectangle:WxH")->capture_default_str();
  app.add_option("--m", c.m, "number of spikes")->capture_default_str();
  app.add_option("--n", c.n, "grid lines per axis (odd)")->capture_default_str();
  app.add_option("--coarse-n", c.coarse_n, "uniform grid of the first optimisation")->capture_default_str();
  app.add_option("--out", c.output, "artifact directory");
  app.add_option("--beta", c.beta, "separation exponent (default m^2+m+1)");
  app.add_option("--h-file", h_file, "forcing h as CSV (x,y,value), or 'eigenmode'");
  app.add_option("--lambda-threshold", c.lambda_threshold, "Lambda = {phi_1 > T}")->capture_default_str();
  app.add_flag("--trace", c.trace, "write iteration traces");
  app.add_flag("--dump-fields", c.dump_fields, "write field CSVs");
  app.add_option("--seed", c.seed, "optimiser seed")->capture_default_str();
}

void print_row(const RunResult& r) {
  const auto& d = r.diagnostics;
  std::printf("%6g %4d %10.6f %6zu %12.4e %12.4e %12.4e %12.4e %10.4e  %s\n", r.config.s, r.exit_code, d.mass_ratio,
              d.spikes.size(), d.in3_residual, d.psi_tilde, d.far_field, d.star_norm_final, d.min_separation,
              r.failed_stage.empty() ? "-" : r.failed_stage.c_str());
}

void print_header() {
  std::printf("%6s %4s %10s %6s %12s %12s %12s %12s %10s  %s\n", "s", "exit", "mass/8pim", "spikes", "residual",
              "psi_tilde", "far_field", "star_final", "min_sep", "stage");
}

void print_details(const RunResult& r) {
  const auto& d = r.diagnostics;
  for (const auto& sm : d.spike_masses)
    std::printf("  ball (%.6f, %.6f) r=%.4f mass=%.6f (%.4f of 8pi)\n", sm.xi.x, sm.xi.y, sm.radius, sm.mass,
                sm.mass / (8.0 * 3.14159265358979323846));
  for (const auto& sp : d.spikes) std::printf("  spike (%.6f, %.6f) height=%.6f\n", sp.location.x, sp.location.y, sp.height);
  std::printf("  mass=%.10g mass_in1=%.10g exterior=%.4e in1_residual=%.4e energy_discrepancy=%.6f\n", d.mass,
              d.mass_in1, d.exterior_mass, d.in1_residual, d.energy_discrepancy);
  if (!r.error.empty()) std::printf("  error: %s\n", r.error.c_str());
  for (const auto& c : r.failed_checks) std::printf("  failed check: %s\n", c.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-spike solutions of Delta u + k e^{-s phi_1} e^u = 0"};
  app.require_subcommand(1);

  RunConfig solve_cfg, sweep_cfg;
  std::string solve_h, sweep_h;
  std::vector<double> s_list;
  unsigned threads = 0;

  auto* solve = app.add_subcommand("solve", "one run");
  add_common(*solve, solve_cfg, solve_h);
  solve->add_option("--s", solve_cfg.s, "parameter s")->capture_default_str();

  auto* sw = app.add_subcommand("sweep", "one run per s, concurrently");
  add_common(*sw, sweep_cfg, sweep_h);
  sw->add_option("--s-list", s_list, "comma-separated s values")->delimiter(',')->required();
  sw->add_option("--threads", threads, "worker cap (0: BUBBLEFORGE_THREADS or hardware)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigExit;
  }

  try {
    if (solve->parsed()) {
      if (!solve_h.empty()) solve_cfg.forcing = solve_h;
      const RunResult r = run(solve_cfg);
      print_header();
      print_row(r);
      print_details(r);
      return r.exit_code;
    }
    if (!sweep_h.empty()) sweep_cfg.forcing = sweep_h;
    const auto rs = sweep(sweep_cfg, s_list, threads);
    print_header();
    int rc = 0;
    for (const auto& r : rs) {
      print_row(r);
      if (r.exit_code == 2 || (r.exit_code == 3 && rc == 0)) rc = r.exit_code;
    }
    for (const auto& r : rs)
      if (!r.passed()) {
        std::printf("s=%g\n", r.config.s);
        print_details(r);
      }
    return rc;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
