#include "commands.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "biasprobe/analysis.hpp"
#include "biasprobe/config.hpp"
#include "biasprobe/http_backend.hpp"
#include "biasprobe/pipeline.hpp"
#include "biasprobe/published_counts.hpp"
#include "biasprobe/report.hpp"
#include "biasprobe/simulation.hpp"

namespace biasprobe::cli {

using nlohmann::json;

namespace {

RunConfig resolve_config(const Overrides& o) {
  RunConfig c = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  apply_env_overrides(c, process_env());
  if (o.output_dir) c.output_dir = *o.output_dir;
  if (o.replicates) c.replicates = *o.replicates;
  if (o.seed) c.experiment_seed = *o.seed;
  if (o.confidence_threshold) c.confidence_threshold = *o.confidence_threshold;
  if (o.concurrency) c.concurrency = *o.concurrency;
  if (o.generator_endpoint) c.generator_endpoint = *o.generator_endpoint;
  if (o.detector_endpoint) c.detector_endpoint = *o.detector_endpoint;
  validate(c);
  return c;
}

// Maps exceptions onto the exit-code contract.
template <class Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    std::cerr << "biasprobe: " << e.what() << "\n";
    return kConfigError;
  } catch (const CorpusError& e) {
    std::cerr << "biasprobe: invalid corpus: " << e.what() << "\n";
    return kConfigError;
  } catch (const RunAborted& e) {
    std::cerr << "biasprobe: aborted: " << e.what() << "\n";
    return kConfigError;
  } catch (const FailureBudgetExceeded& e) {
    std::cerr << "biasprobe: failure budget exceeded: " << e.what() << "\n";
    return kFailureBudgetExceeded;
  } catch (const std::exception& e) {
    std::cerr << "biasprobe: error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

json plan_json(const ExperimentPlan& plan) {
  json instances = json::array();
  for (const auto& i : plan.instances) {
    instances.push_back({{"key", i.key()},
                         {"template_id", i.template_id},
                         {"pair_id", i.pair_id},
                         {"group", i.group},
                         {"gender_word", i.gender_word},
                         {"replicate", i.replicate},
                         {"seed", i.seed},
                         {"prompt", i.rendered_text}});
  }
  return json{{"v", 1},
              {"experiment_seed", plan.experiment_seed},
              {"corpus_hash", plan.corpus_hash},
              {"groups", plan.groups},
              {"prompts", plan.distinct_prompt_count()},
              {"instances", instances}};
}

}  // namespace

int cmd_plan(const Overrides& o, const std::string& plan_out) {
  return guarded([&] {
    const auto c = resolve_config(o);
    const auto plan = make_plan(c);
    write_text(plan_out, plan_json(plan).dump(2) + "\n");
    std::cout << plan.distinct_prompt_count() << " prompts, " << plan.instances.size() << " instances\n";
    std::cout << "plan written to " << plan_out << " (corpus " << plan.corpus_hash.substr(0, 12) << ", seed "
              << plan.experiment_seed << ")\n";
    return kOk;
  });
}

int cmd_run(const Overrides& o, bool do_resume, std::optional<std::size_t> stop_after) {
  return guarded([&] {
    const auto c = resolve_config(o);
    const auto plan = make_plan(c);
    const auto vocabulary = load_vocabulary(c);
    auto generator = open_generator(Endpoint::parse(c.generator_endpoint), mock_config(c));
    auto detector = open_detector(Endpoint::parse(c.detector_endpoint), vocabulary);
    RunOptions options;
    options.stop_after = stop_after;
    const auto settings = run_settings(c);
    const auto summary = do_resume ? resume(plan, *generator, *detector, vocabulary, settings, c.output_dir, options)
                                   : run_plan(plan, *generator, *detector, vocabulary, settings, c.output_dir,
                                              config_to_json(c), options);
    std::cout << "run " << c.output_dir.string() << ": " << summary.done << "/" << summary.total << " done, "
              << summary.executed << " executed now, " << summary.skipped << " already done\n";
    if (summary.interrupted) std::cout << "interrupted before completion; continue with `run --resume`\n";
    if (summary.failed > 0) {
      std::cerr << "biasprobe: " << summary.failed << " instance(s) FAILED after retries; see journal.ndjson\n";
      return kRuntimeError;
    }
    return kOk;
  });
}

int cmd_analyze(const Overrides& o) {
  return guarded([&] {
    const auto c = resolve_config(o);
    const auto analysis = analyze_run(c.output_dir, load_vocabulary(c), analysis_config(c));
    const auto path = c.output_dir / "analysis.json";
    write_analysis(path, analysis);
    if (analysis.failed_instances > 0) {
      std::cout << "WARNING: " << analysis.failed_instances << " of " << analysis.total_instances
                << " instances failed and are excluded from the counts\n";
    }
    for (const auto& out : analysis.outcomes) {
      if (out.result) {
        std::cout << out.id << ": chi2=" << out.result->statistic << " df=" << out.result->df
                  << " p=" << format_p_value(out.result->p_value) << "\n";
      } else {
        std::cout << out.id << ": " << out.error << "\n";
      }
    }
    std::cout << "analysis written to " << path.string() << "\n";
    return kOk;
  });
}

int cmd_report(const Overrides& o) {
  return guarded([&] {
    const auto c = resolve_config(o);
    const auto analysis = read_analysis(c.output_dir / "analysis.json");
    const auto dir = c.output_dir / "report";
    if (!emit_report(analysis, dir, c.style)) {
      std::cerr << "biasprobe: warning: no categories survive the chart filter; chart is empty\n";
    }
    std::cout << "report written to " << dir.string() << "\n";
    return kOk;
  });
}

int cmd_reproduce_paper(const std::string& out_dir) {
  return guarded([&] {
    const auto entries = reproduce_published();
    const auto text = reproduction_report(entries);
    std::cout << text;
    if (!out_dir.empty()) {
      const std::filesystem::path dir(out_dir);
      write_text(dir / "reproduction.txt", text);
      for (const auto& model : published_models()) {
        AnalysisConfig config;
        config.filter = {model.chart_min_total, {"person"}, false};
        const auto analysis = analyze_table(model.table, config, model.name);
        const auto slug = model.short_name == "SD" ? std::string("sd") : std::string("dalle-mini");
        write_analysis(dir / slug / "analysis.json", analysis);
        emit_report(analysis, dir / slug / "report");
      }
    }
    return kOk;
  });
}

int cmd_simulate(const std::string& scenario, std::size_t trials, std::uint64_t seed, bool serial) {
  return guarded([&] {
    if (scenario != "null" && scenario != "biased") throw ConfigError("scenario must be 'null' or 'biased'");
    if (trials < 1) throw ConfigError("trials must be >= 1");
    SimulationSettings settings;
    settings.scenario = scenario == "null" ? Scenario::null : Scenario::biased;
    settings.trials = trials;
    settings.base_seed = seed;
    const auto start = std::chrono::steady_clock::now();
    const auto result = serial ? simulate_serial(settings) : simulate(settings);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    for (std::size_t t = 0; t < result.p_values.size(); ++t) {
      std::printf("trial %zu p=%.6e\n", t, result.p_values[t]);
    }
    std::printf("scenario %s, %zu trials of %zu instances, %.2f s\n", scenario.c_str(), trials,
                settings.templates.size() * settings.pairs.size() * 2 * static_cast<std::size_t>(settings.replicates),
                elapsed.count());
    std::printf("rejection rate at alpha=%.2f: %.4f (%zu/%zu)\n", settings.alpha, result.rejection_rate,
                result.rejections, trials);
    return kOk;
  });
}

int cmd_serve_mock(const Overrides& o, const std::string& role, const std::string& host, int port) {
  return guarded([&] {
    const auto c = resolve_config(o);
    if (role != "generator" && role != "detector") throw ConfigError("role must be 'generator' or 'detector'");
    auto server = role == "generator" ? MockBackendServer::generator(mock_config(c))
                                      : MockBackendServer::detector(load_vocabulary(c));
    std::cout << "mock " << role << " listening on http://" << host << ":" << port << std::endl;
    server.listen(host, port);
    return kOk;
  });
}

}  // namespace biasprobe::cli
