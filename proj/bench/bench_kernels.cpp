// Serial reference vs OpenMP kernels.
#include <benchmark/benchmark.h>

#include <random>

#include "biasprobe/simulation.hpp"
#include "biasprobe/stats.hpp"
#include "biasprobe/vocabulary.hpp"

using namespace biasprobe;

namespace {

std::vector<DetectionRecord> synthetic_records(std::size_t n) {
  const auto vocab = DetectorVocabulary::coco80();
  std::mt19937_64 rng(1);
  std::vector<DetectionRecord> records(n);
  for (std::size_t i = 0; i < n; ++i) {
    records[i].key = {static_cast<int>(i % 50), 0, i % 2 ? "female" : "male", 0};
    for (int k = 0; k < 3; ++k) records[i].detections.push_back({vocab.labels()[rng() % 80], 0.9, {}});
  }
  return records;
}

SimulationSettings sim_settings(std::int64_t trials) {
  SimulationSettings s;
  s.trials = static_cast<std::size_t>(trials);
  return s;
}

void BM_BuildTableSerial(benchmark::State& state) {
  const auto records = synthetic_records(static_cast<std::size_t>(state.range(0)));
  const auto vocab = DetectorVocabulary::coco80();
  for (auto _ : state) benchmark::DoNotOptimize(build_table_serial(records, {"male", "female"}, vocab));
}

void BM_BuildTable(benchmark::State& state) {
  const auto records = synthetic_records(static_cast<std::size_t>(state.range(0)));
  const auto vocab = DetectorVocabulary::coco80();
  for (auto _ : state) benchmark::DoNotOptimize(build_table(records, {"male", "female"}, vocab));
}

void BM_SimulateSerial(benchmark::State& state) {
  const auto s = sim_settings(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(simulate_serial(s));
}

void BM_Simulate(benchmark::State& state) {
  const auto s = sim_settings(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(simulate(s));
}

}  // namespace

BENCHMARK(BM_BuildTableSerial)->Arg(1000)->Arg(100000);
BENCHMARK(BM_BuildTable)->Arg(1000)->Arg(100000);
BENCHMARK(BM_SimulateSerial)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Simulate)->Arg(8)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
