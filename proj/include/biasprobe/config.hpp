#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "biasprobe/analysis.hpp"
#include "biasprobe/mock_backend.hpp"
#include "biasprobe/pipeline.hpp"
#include "biasprobe/prompt_corpus.hpp"
#include "biasprobe/protocol.hpp"
#include "biasprobe/report.hpp"
#include "biasprobe/vocabulary.hpp"

namespace biasprobe {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct MockSettings {
  std::string preset = "null";  // "null" or "biased"
  int min_objects = 0;
  int max_objects = 3;
  double min_confidence = 0.6;
  double max_confidence = 0.99;
  // Optional per-group weights replacing the preset for that group.
  std::map<std::string, std::map<std::string, double>> weights;

  bool operator==(const MockSettings&) const = default;
};

// Declarative description of one audit. Relative paths are resolved against
// the directory of the config file.
struct RunConfig {
  std::filesystem::path templates;  // empty: shipped corpus
  std::vector<GenderPair> pairs = default_pairs();
  int replicates = kDefaultReplicates;
  std::uint64_t experiment_seed = 0;
  std::string generator_endpoint = "mock:";
  std::string detector_endpoint = "mock:";
  std::filesystem::path vocabulary;  // empty: shipped COCO-80 labels
  GenerationParams generation;
  double confidence_threshold = 0.5;
  FilterSpec filter{9, {"person"}, false};
  std::vector<std::string> variants;  // variant ids; empty: the standard four
  std::filesystem::path output_dir = "runs/default";
  int concurrency = 4;
  RetryPolicy retry;
  double max_failure_fraction = 0.05;
  MockSettings mock;
  ReportStyle style;
};

// Parses TOML text; `base_dir` anchors relative paths. Throws ConfigError.
RunConfig parse_config(std::string_view toml_text, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

// BIASPROBE_<FIELD> overrides for scalar fields, e.g. BIASPROBE_REPLICATES,
// BIASPROBE_EXPERIMENT_SEED, BIASPROBE_GENERATOR_ENDPOINT.
void apply_env_overrides(RunConfig& config, const EnvLookup& env);

// Referenced files exist, endpoints parse, numeric fields are in range.
void validate(const RunConfig& config);

std::vector<PromptTemplate> load_corpus(const RunConfig& config);
DetectorVocabulary load_vocabulary(const RunConfig& config);
ExperimentPlan make_plan(const RunConfig& config);
RunSettings run_settings(const RunConfig& config);
AnalysisConfig analysis_config(const RunConfig& config);
MockConfig mock_config(const RunConfig& config);

nlohmann::json config_to_json(const RunConfig& config);
RunConfig config_from_json(const nlohmann::json& j);

}  // namespace biasprobe
