#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace biasprobe::cli {

enum ExitCode : int {
  kOk = 0,
  kRuntimeError = 1,
  kConfigError = 2,
  kFailureBudgetExceeded = 3,
};

// Values given on the command line; each overrides the config file and env.
struct Overrides {
  std::string config_path;
  std::optional<std::string> output_dir;
  std::optional<int> replicates;
  std::optional<std::uint64_t> seed;
  std::optional<double> confidence_threshold;
  std::optional<int> concurrency;
  std::optional<std::string> generator_endpoint;
  std::optional<std::string> detector_endpoint;
};

int cmd_plan(const Overrides& o, const std::string& plan_out);
int cmd_run(const Overrides& o, bool resume, std::optional<std::size_t> stop_after);
int cmd_analyze(const Overrides& o);
int cmd_report(const Overrides& o);
int cmd_reproduce_paper(const std::string& out_dir);
int cmd_simulate(const std::string& scenario, std::size_t trials, std::uint64_t seed, bool serial);
int cmd_serve_mock(const Overrides& o, const std::string& role, const std::string& host, int port);

}  // namespace biasprobe::cli
