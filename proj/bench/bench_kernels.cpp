// Serial reference vs OpenMP kernels. The argument is the worker count;
// 0 runs the serial reference.
#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <thread>

#include "mixlab/chain.hpp"
#include "mixlab/expanding.hpp"
#include "mixlab/spectral.hpp"

using namespace mixlab;

namespace {

const double kGolden = (std::sqrt(5.0) - 1.0) / 2.0;

TorusMeasure two_atom() { return TorusMeasure::atomic({{TorusPoint{0.0}, 0.5}, {TorusPoint{kGolden}, 0.5}}); }

void worker_args(benchmark::internal::Benchmark* b) {
  b->Arg(0);
  const int hw = std::max(1u, std::thread::hardware_concurrency());
  for (int w = 1; w <= hw; w *= 2) b->Arg(w);
  if ((hw & (hw - 1)) != 0) b->Arg(hw);
  b->Unit(benchmark::kMillisecond)->UseRealTime();
}

void BM_birkhoff_sums(benchmark::State& state) {
  ChainConfig cfg{two_atom()};
  cfg.n_steps = 512;
  cfg.n_trials = 4000;
  cfg.seed = 1;
  const auto phi = on_theta(FourierObservable::cosine(LatticeVector{1}));
  const int w = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto s = w == 0 ? birkhoff_sums_serial(cfg, phi) : birkhoff_sums(cfg, phi, ExecPolicy{w});
    benchmark::DoNotOptimize(s.data());
  }
  state.SetItemsProcessed(state.iterations() * cfg.n_steps * cfg.n_trials);
}
BENCHMARK(BM_birkhoff_sums)->Apply(worker_args);

void BM_decay_trace(benchmark::State& state) {
  const auto mu = two_atom();
  const auto phi = FourierObservable::sum_cos_k2(64);
  std::vector<long> ns;
  for (long n = 1; n <= 2000; n += 10) ns.push_back(n);
  const int w = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto t = w == 0 ? decay_trace_serial(phi, mu, ns, 1024) : decay_trace(phi, mu, ns, 1024, ExecPolicy{w});
    benchmark::DoNotOptimize(t.rows.data());
  }
}
BENCHMARK(BM_decay_trace)->Apply(worker_args);

void BM_transfer_apply(benchmark::State& state) {
  const auto m = CircleMapModel::perturbed2(0.5, 8192);
  const TransferOperator L(m);
  const auto h = sample_on_grid([](double x) { return 1.0 + 0.3 * std::sin(2.0 * std::numbers::pi * x); }, 8192);
  const int w = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto r = w == 0 ? L.apply_serial(h) : L.apply(h, ExecPolicy{w});
    benchmark::DoNotOptimize(r.data());
  }
}
BENCHMARK(BM_transfer_apply)->Apply(worker_args);

void BM_backward_birkhoff_sums(benchmark::State& state) {
  const auto m = CircleMapModel::perturbed2(0.5, 1024);
  const auto g = invariant_density(m);
  BackwardChainConfig cfg;
  cfg.n_steps = 256;
  cfg.n_trials = 2000;
  cfg.seed = 3;
  const auto phi = [](double x) { return std::cos(2.0 * std::numbers::pi * x); };
  const int w = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto s = w == 0 ? backward_birkhoff_sums_serial(m, g, phi, cfg)
                    : backward_birkhoff_sums(m, g, phi, cfg, ExecPolicy{w});
    benchmark::DoNotOptimize(s.data());
  }
  state.SetItemsProcessed(state.iterations() * cfg.n_steps * cfg.n_trials);
}
BENCHMARK(BM_backward_birkhoff_sums)->Apply(worker_args);

}  // namespace

BENCHMARK_MAIN();
