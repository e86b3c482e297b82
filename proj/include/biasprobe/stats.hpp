#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "biasprobe/detection_record.hpp"
#include "biasprobe/vocabulary.hpp"

namespace biasprobe {

class StatsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Categories x two groups of exact counts.
struct ContingencyTable {
  std::vector<std::string> categories;
  std::array<std::string, 2> groups;
  std::array<std::vector<std::int64_t>, 2> counts;

  static ContingencyTable zeros(std::vector<std::string> categories,
                                std::array<std::string, 2> groups);

  // Throws StatsError on negative counts, duplicate categories or ragged rows.
  void validate() const;
  std::size_t size() const { return categories.size(); }
  std::optional<std::size_t> find(std::string_view label) const;
  std::size_t group_index(std::string_view group) const;  // throws StatsError
  std::int64_t count(std::string_view group, std::string_view label) const;
  std::int64_t column_total(std::size_t category) const { return counts[0][category] + counts[1][category]; }
  std::int64_t row_total(std::size_t group) const;

  bool operator==(const ContingencyTable&) const = default;
};

struct FilterSpec {
  std::int64_t min_total = 0;  // categories with total strictly below are removed
  std::set<std::string> excluded_labels;
  // Retain when either group alone reaches min_total, instead of the combined total.
  bool per_group = false;

  bool operator==(const FilterSpec&) const = default;
};

struct ChiSquaredOptions {
  bool yates = false;      // continuity correction, applied only when df == 1
  bool pool_rare = false;  // merge categories with any expected count < 5
};

struct ChiSquaredResult {
  double statistic = 0;
  int df = 0;
  double p_value = 1;
  std::vector<std::string> dropped_categories;  // zero-total categories
  std::string variant;
};

// One preprocessing choice for the test. Together with the table's filter
// threshold this fully determines which categories enter the statistic.
struct AnalysisVariant {
  bool include_person = true;
  bool filtered = false;  // apply the min_total threshold
  ChiSquaredOptions options;

  // e.g. "person=exclude,categories=filtered(min_total=9)"
  std::string describe(std::int64_t min_total) const;
  // Inverse of the short id, e.g. "include-person/full", "exclude-person/filtered+yates".
  std::string id() const;
  static AnalysisVariant parse(std::string_view id);

  // The four {include|exclude person} x {full|filtered} combinations.
  static std::vector<AnalysisVariant> standard();
};

// Multiset counting: each detection adds one to counts[group][label].
// Categories are the vocabulary in order. OpenMP reduction over records.
ContingencyTable build_table(const std::vector<DetectionRecord>& records,
                             const std::array<std::string, 2>& groups,
                             const DetectorVocabulary& vocabulary);

// Single-threaded reference for build_table.
ContingencyTable build_table_serial(const std::vector<DetectionRecord>& records,
                                    const std::array<std::string, 2>& groups,
                                    const DetectorVocabulary& vocabulary);

ContingencyTable apply_filter(const ContingencyTable& table, const FilterSpec& spec);

// Pearson chi-squared test of homogeneity over the 2 x K table. Zero-total
// categories are dropped (and reported) before computing df = K' - 1.
ChiSquaredResult chi_squared(const ContingencyTable& table, const ChiSquaredOptions& options = {});

// Applies the variant's preprocessing (person exclusion, then min_total when
// filtered) and runs the test; result.variant = variant.describe(min_total).
ChiSquaredResult evaluate_variant(const ContingencyTable& table, const AnalysisVariant& variant,
                                  std::int64_t min_total);

struct Disparity {
  std::string label;
  std::int64_t count_a = 0;
  std::int64_t count_b = 0;
  std::int64_t delta = 0;  // count_a - count_b

  bool operator==(const Disparity&) const = default;
};

// Sorted by |delta| descending, then label.
std::vector<Disparity> rank_disparities(const ContingencyTable& table);

}  // namespace biasprobe
