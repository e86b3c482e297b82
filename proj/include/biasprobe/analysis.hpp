#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "biasprobe/stats.hpp"

namespace biasprobe {

class FailureBudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AnalysisConfig {
  FilterSpec filter{9, {"person"}, false};
  std::vector<AnalysisVariant> variants = AnalysisVariant::standard();
  double max_failure_fraction = 0.05;
};

struct VariantOutcome {
  std::string id;
  std::optional<ChiSquaredResult> result;
  std::string error;  // set when the variant has too few usable categories
};

// Everything the report layer prints. Serialized as analysis.json.
struct Analysis {
  std::string title;
  ContingencyTable table;
  FilterSpec filter;
  std::vector<VariantOutcome> outcomes;
  std::vector<Disparity> ranking;
  std::size_t total_instances = 0;
  std::size_t failed_instances = 0;
  nlohmann::json manifest = nlohmann::json::object();
};

Analysis analyze_table(const ContingencyTable& table, const AnalysisConfig& config,
                       std::string title = {});

// Builds the table from a run directory's done records. Throws
// FailureBudgetExceeded if failed/total exceeds config.max_failure_fraction.
Analysis analyze_run(const std::filesystem::path& run_dir, const DetectorVocabulary& vocabulary,
                     const AnalysisConfig& config);

nlohmann::json to_json(const Analysis& analysis);
Analysis analysis_from_json(const nlohmann::json& j);

void write_analysis(const std::filesystem::path& path, const Analysis& analysis);
Analysis read_analysis(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const ContingencyTable& t);
void from_json(const nlohmann::json& j, ContingencyTable& t);
void to_json(nlohmann::json& j, const FilterSpec& f);
void from_json(const nlohmann::json& j, FilterSpec& f);

}  // namespace biasprobe
