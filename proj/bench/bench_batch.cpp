// Parallel scenario batch vs. the serial reference.

#include "dcmg/sim.hpp"

#include <benchmark/benchmark.h>

namespace {

std::vector<dcmg::Scenario> make_batch(std::size_t count) {
  std::vector<dcmg::Scenario> out;
  for (std::size_t i = 0; i < count; ++i) {
    dcmg::Scenario sc;
    sc.attack = dcmg::AttackSpec::exponential(0.1, 7 + i);
    for (auto& ch : sc.attack.channels) ch.start *= 0.05;
    sc.horizon = 1.0;
    sc.controller.adaptation_gain.assign(3, 1.0 + static_cast<double>(i));
    out.push_back(sc);
  }
  return out;
}

void BM_BatchSerial(benchmark::State& state) {
  const auto batch = make_batch(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(dcmg::run_batch_serial(batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_BatchParallel(benchmark::State& state) {
  const auto batch = make_batch(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(dcmg::run_batch(batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

BENCHMARK(BM_BatchSerial)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_BatchParallel)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
