// biasprobe: paired-prompt object association audit for text-to-image models.
#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"

using namespace biasprobe::cli;

namespace {

void add_config_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config_path, "Run configuration (TOML)")->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", o.output_dir, "Run directory (overrides output_dir)");
  cmd->add_option("--replicates", o.replicates, "Images per prompt");
  cmd->add_option("--seed", o.seed, "Experiment seed");
  cmd->add_option("--threshold", o.confidence_threshold, "Detector confidence threshold");
  cmd->add_option("--concurrency", o.concurrency, "In-flight jobs");
  cmd->add_option("--generator", o.generator_endpoint, "Generator endpoint (mock: or http://host:port)");
  cmd->add_option("--detector", o.detector_endpoint, "Detector endpoint (mock: or http://host:port)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"biasprobe: measure gendered object associations in text-to-image models"};
  app.require_subcommand(1);

  Overrides plan_o, run_o, analyze_o, report_o, serve_o;

  auto* plan = app.add_subcommand("plan", "Expand templates x gender pairs x replicates into a seeded plan");
  add_config_options(plan, plan_o);
  std::string plan_out = "plan.json";
  plan->add_option("--plan-file", plan_out, "Where to write the plan")->capture_default_str();

  auto* run = app.add_subcommand("run", "Execute the plan against the generator and detector");
  add_config_options(run, run_o);
  bool resume = false;
  std::optional<std::size_t> stop_after;
  run->add_flag("--resume", resume, "Continue an interrupted or partially failed run");
  run->add_option("--stop-after", stop_after, "Stop dispatching after N finished jobs (interruption drill)");

  auto* analyze = app.add_subcommand("analyze", "Count objects per group and run the chi-squared variants");
  add_config_options(analyze, analyze_o);

  auto* report = app.add_subcommand("report", "Render counts table, bar chart and summary from analysis.json");
  add_config_options(report, report_o);

  auto* repro = app.add_subcommand("reproduce-paper", "Chi-squared variants over the published object counts");
  std::string repro_out;
  repro->add_option("--out", repro_out, "Also write analysis and report bundles here");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo audits against mock backends");
  std::string scenario;
  std::size_t trials = 1;
  std::uint64_t sim_seed = 0;
  bool serial = false;
  sim->add_option("scenario", scenario, "null | biased")->required()->check(CLI::IsMember({"null", "biased"}));
  sim->add_option("trials", trials, "Number of simulated experiments")->required()->check(CLI::PositiveNumber);
  sim->add_option("--seed", sim_seed, "Base seed")->capture_default_str();
  sim->add_flag("--serial", serial, "Use the single-threaded reference path");

  auto* serve = app.add_subcommand("serve-mock", "Serve a mock backend over the HTTP protocol");
  add_config_options(serve, serve_o);
  std::string role;
  std::string host = "127.0.0.1";
  int port = 8700;
  serve->add_option("role", role, "generator | detector")->required()->check(CLI::IsMember({"generator", "detector"}));
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  if (*plan) return cmd_plan(plan_o, plan_out);
  if (*run) return cmd_run(run_o, resume, stop_after);
  if (*analyze) return cmd_analyze(analyze_o);
  if (*report) return cmd_report(report_o);
  if (*repro) return cmd_reproduce_paper(repro_out);
  if (*sim) return cmd_simulate(scenario, trials, sim_seed, serial);
  if (*serve) return cmd_serve_mock(serve_o, role, host, port);
  return kConfigError;
}
