#include "biasprobe/simulation.hpp"

#include <omp.h>

#include <exception>

#include "biasprobe/pipeline.hpp"
#include "biasprobe/rng.hpp"
#include "biasprobe/stats.hpp"

namespace biasprobe {

namespace {

SimulationResult summarize(std::vector<double> p_values, double alpha) {
  SimulationResult r;
  r.p_values = std::move(p_values);
  for (const double p : r.p_values) {
    if (p < alpha) ++r.rejections;
  }
  r.rejection_rate = r.p_values.empty() ? 0.0
                                        : static_cast<double>(r.rejections) / static_cast<double>(r.p_values.size());
  return r;
}

void require_trials(const SimulationSettings& settings) {
  if (settings.trials < 1) throw std::invalid_argument("at least one trial is required");
}

}  // namespace

std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t trial) noexcept {
  return mix64(base_seed + SplitMix64::kGamma * (static_cast<std::uint64_t>(trial) + 1));
}

MockConfig scenario_config(const SimulationSettings& settings) {
  const auto groups = validate_pairs(settings.pairs);
  return settings.scenario == Scenario::null ? null_mock_config(groups[0], groups[1])
                                             : biased_mock_config(groups[0], groups[1]);
}

double run_trial(const SimulationSettings& settings, const MockConfig& mock, std::size_t trial) {
  static const DetectorVocabulary vocabulary = DetectorVocabulary::coco80();
  const auto plan = expand(settings.templates, settings.pairs, settings.replicates,
                           trial_seed(settings.base_seed, trial));
  MockGenerator generator(mock);
  MockDetector detector(vocabulary);
  RunSettings run;
  run.generation = settings.generation;
  run.confidence_threshold = settings.confidence_threshold;

  std::vector<DetectionRecord> records;
  records.reserve(plan.instances.size());
  for (const auto& inst : plan.instances) {
    records.push_back(execute_instance(inst, generator, detector, vocabulary, run, std::nullopt));
  }
  const auto table = build_table_serial(records, {plan.groups[0], plan.groups[1]}, vocabulary);
  return chi_squared(table).p_value;
}

SimulationResult simulate_serial(const SimulationSettings& settings) {
  require_trials(settings);
  const auto mock = scenario_config(settings);
  std::vector<double> p(settings.trials);
  for (std::size_t t = 0; t < settings.trials; ++t) p[t] = run_trial(settings, mock, t);
  return summarize(std::move(p), settings.alpha);
}

SimulationResult simulate(const SimulationSettings& settings) {
  require_trials(settings);
  const auto mock = scenario_config(settings);
  std::vector<double> p(settings.trials);
  std::exception_ptr error;
  const auto n = static_cast<std::int64_t>(settings.trials);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t t = 0; t < n; ++t) {
    try {
      p[static_cast<std::size_t>(t)] = run_trial(settings, mock, static_cast<std::size_t>(t));
    } catch (...) {
#pragma omp critical(biasprobe_simulate_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return summarize(std::move(p), settings.alpha);
}

}  // namespace biasprobe
