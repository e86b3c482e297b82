#pragma once

#include <cstdint>
#include <vector>

#include "biasprobe/mock_backend.hpp"
#include "biasprobe/prompt_corpus.hpp"
#include "biasprobe/protocol.hpp"

namespace biasprobe {

enum class Scenario { null, biased };

struct SimulationSettings {
  Scenario scenario = Scenario::null;
  std::size_t trials = 1;
  std::uint64_t base_seed = 0;
  std::vector<PromptTemplate> templates = default_templates();
  std::vector<GenderPair> pairs = default_pairs();
  int replicates = kDefaultReplicates;
  // Mocks ignore generation parameters beyond the image size; keep images small.
  GenerationParams generation{64, 64, 1, 0.0};
  double confidence_threshold = 0.5;
  double alpha = 0.05;
};

struct SimulationResult {
  std::vector<double> p_values;  // one per trial, in trial order
  std::size_t rejections = 0;    // p < alpha
  double rejection_rate = 0;
};

// Experiment seed used for trial t.
std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t trial) noexcept;

// One complete mock audit: expand the plan, generate and detect every
// instance in-process, build the table over the full vocabulary and return
// the chi-squared p-value (zero-total categories dropped, no filtering).
double run_trial(const SimulationSettings& settings, const MockConfig& mock, std::size_t trial);

MockConfig scenario_config(const SimulationSettings& settings);

// Trials run in parallel with OpenMP; results are identical to simulate_serial.
SimulationResult simulate(const SimulationSettings& settings);
SimulationResult simulate_serial(const SimulationSettings& settings);

}  // namespace biasprobe
