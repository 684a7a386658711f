// Serial reference vs OpenMP kernels: residual sweeps over many jet points
// and batches of independent trajectories.

#include <benchmark/benchmark.h>

#include <omp.h>

#include "concircle/integrate.hpp"
#include "concircle/mechanics.hpp"
#include "concircle/sweep.hpp"

using namespace concircle;

namespace {

struct SweepFixture {
  JetSpace space;
  Program program;
  std::vector<double> inputs;

  explicit SweepFixture(std::size_t points) {
    const Metric sphere = Metric::builtin("sphere");
    const JetGeometry geo(sphere, space);
    const Expr lagrangian = to_jet(geo, Lagrangian::geodesic_circle(sphere, 1.0).expr());
    std::vector<Expr> roots;
    for (const LabelledExpr& c : components(lagrange_derivative1(space, lagrange_derivative(space, lagrangian))))
      roots.push_back(c.expr);
    program = Program(roots, space.variables());
    for (const JetPoint& p : sample_jets(space, points))
      inputs.insert(inputs.end(), p.values().begin(), p.values().end());
  }
};

const SweepFixture& sweep_fixture(std::size_t points) {
  static const SweepFixture fixture(points);
  return fixture;
}

template <SweepResult (*Sweep)(const Program&, std::span<const double>)>
void BM_Sweep(benchmark::State& state) {
  const SweepFixture& f = sweep_fixture(4096);
  for (auto _ : state) benchmark::DoNotOptimize(Sweep(f.program, f.inputs));
  state.SetItemsProcessed(state.iterations() * 4096);
  state.counters["threads"] = omp_get_max_threads();
  state.counters["tape"] = static_cast<double>(f.program.size());
}

std::vector<CurveJet> batch_starts(const Metric& sphere, std::size_t count) {
  std::vector<CurveJet> starts;
  for (std::size_t i = 0; i < count; ++i)
    starts.push_back(natural_initial_state(sphere, {1.2, 0.1 * i}, 0.2 * i, -2.0 + 0.1 * i));
  return starts;
}

template <std::vector<Trajectory> (*Batch)(const Metric&, std::span<const CurveJet>, const IntegratorConfig&)>
void BM_Batch(benchmark::State& state) {
  const Metric sphere = Metric::builtin("sphere");
  const std::vector<CurveJet> starts = batch_starts(sphere, 32);
  IntegratorConfig config;
  config.formulation = Formulation::euler_poisson;
  config.m = 2.0;
  config.t_end = 2.0;
  config.stride = 100;
  for (auto _ : state) benchmark::DoNotOptimize(Batch(sphere, starts, config));
  state.SetItemsProcessed(state.iterations() * starts.size());
  state.counters["threads"] = omp_get_max_threads();
}

}  // namespace

BENCHMARK(BM_Sweep<sweep_serial>)->Name("sweep/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Sweep<sweep_parallel>)->Name("sweep/parallel")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Batch<integrate_batch_serial>)->Name("batch/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Batch<integrate_batch_parallel>)->Name("batch/parallel")->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
