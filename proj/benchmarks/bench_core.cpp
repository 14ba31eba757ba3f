#include <benchmark/benchmark.h>

#include "bubbleforge/corrector.hpp"
#include "bubbleforge/energy.hpp"

using namespace bubbleforge;

namespace {

ProblemData disk(int n, double s) { return setup_in3(Grid::uniform(Domain::unit_disk(), n), Forcing::zero(), s); }

struct Graded {
  ProblemData data;
  Ansatz ansatz;
};

Graded graded(int n, double s) {
  auto coarse = disk(65, s);
  auto spec = grading_for(make_configuration({{0, 0}}, coarse));
  auto data = setup_in3(Grid::graded(Domain::unit_disk(), n, spec), Forcing::zero(), s);
  auto ansatz = assemble_ansatz(make_configuration({{0, 0}}, data), data);
  return {std::move(data), std::move(ansatz)};
}

void BM_LaplacianAssembly(benchmark::State& st) {
  auto g = Grid::uniform(Domain::unit_disk(), static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(assemble_laplacian(g));
  st.counters["unknowns"] = static_cast<double>(g->interior_count());
}
BENCHMARK(BM_LaplacianAssembly)->Arg(129)->Arg(257)->Arg(513)->Unit(benchmark::kMillisecond);

void BM_PoissonSolve(benchmark::State& st) {
  auto g = Grid::uniform(Domain::unit_disk(), static_cast<int>(st.range(0)));
  auto op = assemble_laplacian(g);
  auto rhs = ScalarField::sample(g, [](Point) { return 1.0; });
  solve_dirichlet(*op, rhs, nullptr);  // factorise outside the loop
  for (auto _ : st) benchmark::DoNotOptimize(solve_dirichlet(*op, rhs, nullptr));
}
BENCHMARK(BM_PoissonSolve)->Arg(129)->Arg(257)->Arg(513)->Unit(benchmark::kMillisecond);

void BM_Eigenpair(benchmark::State& st) {
  auto g = Grid::uniform(Domain::unit_disk(), static_cast<int>(st.range(0)));
  for (auto _ : st) {
    auto op = assemble_laplacian(g);
    benchmark::DoNotOptimize(principal_eigenpair(*op));
  }
}
BENCHMARK(BM_Eigenpair)->Arg(129)->Arg(257)->Unit(benchmark::kMillisecond);

void BM_GreenRegularPart(benchmark::State& st) {
  auto d = disk(static_cast<int>(st.range(0)), 10.0);
  for (auto _ : st) {
    // fresh evaluator, so the pole cache does not hide the solve
    GreenEvaluator g(d.laplacian);
    benchmark::DoNotOptimize(g.regular(Point{0.5, 0.0}, Point{0.3, 0.1}));
  }
}
BENCHMARK(BM_GreenRegularPart)->Arg(129)->Arg(257)->Unit(benchmark::kMillisecond);

void BM_ExpansionAscent(benchmark::State& st) {
  auto d = disk(65, 12.0);
  for (auto _ : st) benchmark::DoNotOptimize(maximize_configuration(static_cast<std::size_t>(st.range(0)), d));
}
BENCHMARK(BM_ExpansionAscent)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_ProjectedSolve(benchmark::State& st) {
  auto r = graded(static_cast<int>(st.range(0)), 12.0);
  auto op = build_operator(r.ansatz, r.data);
  auto basis = build_kernel_basis(r.ansatz.config, r.data);
  for (auto _ : st) benchmark::DoNotOptimize(solve_projected(op, basis, r.ansatz.R));
}
BENCHMARK(BM_ProjectedSolve)->Arg(257)->Arg(385)->Unit(benchmark::kMillisecond);

void BM_Contraction(benchmark::State& st) {
  auto r = graded(static_cast<int>(st.range(0)), 12.0);
  auto op = build_operator(r.ansatz, r.data);
  auto basis = build_kernel_basis(r.ansatz.config, r.data);
  for (auto _ : st) benchmark::DoNotOptimize(contract(op, basis, r.ansatz, r.data));
}
BENCHMARK(BM_Contraction)->Arg(257)->Arg(385)->Unit(benchmark::kMillisecond);

void BM_NewtonRefine(benchmark::State& st) {
  auto r = graded(static_cast<int>(st.range(0)), 12.0);
  auto op = build_operator(r.ansatz, r.data);
  auto basis = build_kernel_basis(r.ansatz.config, r.data);
  auto c = contract(op, basis, r.ansatz, r.data);
  const auto u0 = r.ansatz.U + c.psi;
  for (auto _ : st) benchmark::DoNotOptimize(newton_refine(u0, r.data));
}
BENCHMARK(BM_NewtonRefine)->Arg(257)->Arg(385)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
