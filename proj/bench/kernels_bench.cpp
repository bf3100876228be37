// OpenMP kernels against their serial reference loops.
//
//   kernels_bench --benchmark_filter=Spmv

#include <map>
#include <memory>
#include <random>

#include <benchmark/benchmark.h>

#include "tumorsim/assembly.hpp"
#include "tumorsim/scenario.hpp"
#include "tumorsim/verification.hpp"

using namespace tumorsim;

namespace {

struct Fixture {
  Discretization disc;
  verification::StepPoint point;
  CsrMatrix J;
  std::vector<double> x, y;

  explicit Fixture(int n_el)
      : disc(SplineSpace2D(3000.0, n_el), preset("mild/reference/none").params), J(disc.jacobian_pattern()) {
    std::mt19937_64 rng(5);
    point = verification::random_step_point(disc, rng);
    disc.assemble_jacobian({point.start.Udot, point.start.U}, {0.2, 0.1, 0.0}, {5.0 / 6.0, 0.0667}, J);
    x = point.x;
    y.resize(x.size());
  }
};

Fixture& fixture(int n_el) {
  static std::map<int, std::unique_ptr<Fixture>> cache;
  auto& f = cache[n_el];
  if (!f) f = std::make_unique<Fixture>(n_el);
  return *f;
}

void BM_Spmv(benchmark::State& state) {
  auto& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    spmv(f.J, f.x, f.y);
    benchmark::DoNotOptimize(f.y.data());
  }
  state.SetItemsProcessed(state.iterations() * f.J.nnz());
}

void BM_SpmvSerial(benchmark::State& state) {
  auto& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    spmv_serial(f.J, f.x, f.y);
    benchmark::DoNotOptimize(f.y.data());
  }
  state.SetItemsProcessed(state.iterations() * f.J.nnz());
}

void BM_Residual(benchmark::State& state) {
  auto& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    f.disc.assemble_residual({f.point.start.Udot, f.point.start.U}, {0.2, 0.1, 0.0}, f.y);
    benchmark::DoNotOptimize(f.y.data());
  }
}

void BM_ResidualSerial(benchmark::State& state) {
  auto& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    f.disc.assemble_residual_serial({f.point.start.Udot, f.point.start.U}, {0.2, 0.1, 0.0}, f.y);
    benchmark::DoNotOptimize(f.y.data());
  }
}

void BM_Jacobian(benchmark::State& state) {
  auto& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    f.disc.assemble_jacobian({f.point.start.Udot, f.point.start.U}, {0.2, 0.1, 0.0}, {5.0 / 6.0, 0.0667}, f.J);
    benchmark::DoNotOptimize(f.J.values().data());
  }
}

void BM_JacobianSerial(benchmark::State& state) {
  auto& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    f.disc.assemble_jacobian_serial({f.point.start.Udot, f.point.start.U}, {0.2, 0.1, 0.0}, {5.0 / 6.0, 0.0667}, f.J);
    benchmark::DoNotOptimize(f.J.values().data());
  }
}

}  // namespace

BENCHMARK(BM_Spmv)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SpmvSerial)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Residual)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ResidualSerial)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Jacobian)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_JacobianSerial)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
