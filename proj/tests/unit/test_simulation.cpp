#include <gtest/gtest.h>

#include "biasprobe/mock_backend.hpp"
#include "biasprobe/pipeline.hpp"
#include "biasprobe/simulation.hpp"
#include "biasprobe/stats.hpp"
#include "biasprobe/vocabulary.hpp"
#include "test_support.hpp"

using namespace biasprobe;

namespace {

SimulationSettings quick(Scenario s, std::size_t trials) {
  SimulationSettings settings;
  settings.scenario = s;
  settings.trials = trials;
  settings.replicates = 2;
  settings.base_seed = 77;
  return settings;
}

}  // namespace

TEST(Simulation, ParallelEqualsSerial) {
  const auto settings = quick(Scenario::null, 12);
  const auto a = simulate(settings);
  const auto b = simulate_serial(settings);
  EXPECT_EQ(a.p_values, b.p_values);
  EXPECT_EQ(a.rejections, b.rejections);
  EXPECT_DOUBLE_EQ(a.rejection_rate, b.rejection_rate);
}

TEST(Simulation, TrialsUseDistinctSeeds) {
  EXPECT_NE(trial_seed(0, 0), trial_seed(0, 1));
  EXPECT_NE(trial_seed(0, 0), trial_seed(1, 0));
  const auto r = simulate_serial(quick(Scenario::null, 5));
  std::set<double> distinct(r.p_values.begin(), r.p_values.end());
  EXPECT_EQ(distinct.size(), 5u);
}

TEST(Simulation, TrialMatchesFullPipelineRun) {
  auto settings = quick(Scenario::biased, 1);
  settings.replicates = 1;
  const auto mock = scenario_config(settings);
  const double p = run_trial(settings, mock, 0);

  biasprobe::testing::TempDir dir;
  const auto plan = expand(settings.templates, settings.pairs, settings.replicates, trial_seed(settings.base_seed, 0));
  MockGenerator gen(mock);
  const auto vocab = DetectorVocabulary::coco80();
  MockDetector det(vocab);
  RunSettings rs;
  rs.generation = settings.generation;
  rs.confidence_threshold = settings.confidence_threshold;
  run_plan(plan, gen, det, vocab, rs, dir / "run");
  const auto table = build_table(collect_results(dir / "run").records, {"male", "female"}, vocab);
  EXPECT_DOUBLE_EQ(chi_squared(table).p_value, p);
}

TEST(Simulation, BiasedScenarioHasPower) {
  auto settings = quick(Scenario::biased, 10);
  settings.replicates = 5;
  const auto r = simulate(settings);
  EXPECT_GE(r.rejections, 9u);
}

TEST(Simulation, RejectsZeroTrials) {
  EXPECT_THROW(simulate(quick(Scenario::null, 0)), std::invalid_argument);
}
