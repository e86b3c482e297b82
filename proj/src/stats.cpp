#include "biasprobe/stats.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "biasprobe/special_functions.hpp"

namespace biasprobe {

namespace {

constexpr std::string_view kPersonLabel = "person";
constexpr std::string_view kPooledLabel = "(pooled)";
constexpr double kPoolBelowExpected = 5.0;

std::size_t group_slot(const std::array<std::string, 2>& groups, const std::string& g) {
  if (g == groups[0]) return 0;
  if (g == groups[1]) return 1;
  throw StatsError("detection record has unknown group '" + g + "'");
}

[[noreturn]] void throw_unknown_label(const DetectionRecord& r, const DetectorVocabulary& vocabulary) {
  for (const auto& d : r.detections) {
    if (!vocabulary.contains(d.label)) {
      throw StatsError("record " + r.key.str() + " has label outside the vocabulary: '" + d.label + "'");
    }
  }
  throw StatsError("record " + r.key.str() + " failed validation");
}

}  // namespace

ContingencyTable ContingencyTable::zeros(std::vector<std::string> categories,
                                         std::array<std::string, 2> groups) {
  ContingencyTable t;
  const auto k = categories.size();
  t.categories = std::move(categories);
  t.groups = std::move(groups);
  t.counts = {std::vector<std::int64_t>(k, 0), std::vector<std::int64_t>(k, 0)};
  return t;
}

void ContingencyTable::validate() const {
  if (groups[0].empty() || groups[1].empty() || groups[0] == groups[1]) {
    throw StatsError("contingency table needs two distinct group labels");
  }
  for (const auto& row : counts) {
    if (row.size() != categories.size()) throw StatsError("contingency table rows are ragged");
    for (const auto c : row) {
      if (c < 0) throw StatsError("contingency table has a negative count");
    }
  }
  std::unordered_set<std::string_view> seen;
  for (const auto& c : categories) {
    if (!seen.insert(c).second) throw StatsError("duplicate category '" + c + "'");
  }
}

std::optional<std::size_t> ContingencyTable::find(std::string_view label) const {
  const auto it = std::find(categories.begin(), categories.end(), label);
  if (it == categories.end()) return std::nullopt;
  return static_cast<std::size_t>(it - categories.begin());
}

std::size_t ContingencyTable::group_index(std::string_view group) const {
  if (group == groups[0]) return 0;
  if (group == groups[1]) return 1;
  throw StatsError("unknown group '" + std::string(group) + "'");
}

std::int64_t ContingencyTable::count(std::string_view group, std::string_view label) const {
  const auto idx = find(label);
  return idx ? counts[group_index(group)][*idx] : 0;
}

std::int64_t ContingencyTable::row_total(std::size_t group) const {
  std::int64_t total = 0;
  for (const auto c : counts[group]) total += c;
  return total;
}

ContingencyTable build_table_serial(const std::vector<DetectionRecord>& records,
                                    const std::array<std::string, 2>& groups,
                                    const DetectorVocabulary& vocabulary) {
  auto table = ContingencyTable::zeros(vocabulary.labels(), groups);
  for (const auto& r : records) {
    const auto g = group_slot(groups, r.key.group);
    for (const auto& d : r.detections) {
      if (!vocabulary.contains(d.label)) throw_unknown_label(r, vocabulary);
      ++table.counts[g][vocabulary.index_of(d.label)];
    }
  }
  return table;
}

ContingencyTable build_table(const std::vector<DetectionRecord>& records,
                             const std::array<std::string, 2>& groups,
                             const DetectorVocabulary& vocabulary) {
  const auto k = vocabulary.size();
  auto table = ContingencyTable::zeros(vocabulary.labels(), groups);
  std::vector<std::size_t> slots(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) slots[i] = group_slot(groups, records[i].key.group);

  const auto n = static_cast<std::int64_t>(records.size());
  std::atomic<std::int64_t> first_bad{n};
#pragma omp parallel
  {
    std::vector<std::int64_t> local(2 * k, 0);
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < n; ++i) {
      const auto& r = records[static_cast<std::size_t>(i)];
      const auto row = slots[static_cast<std::size_t>(i)] * k;
      for (const auto& d : r.detections) {
        if (!vocabulary.contains(d.label)) {
          auto seen = first_bad.load();
          while (i < seen && !first_bad.compare_exchange_weak(seen, i)) {
          }
          break;
        }
        ++local[row + vocabulary.index_of(d.label)];
      }
    }
#pragma omp critical(biasprobe_build_table)
    for (std::size_t c = 0; c < k; ++c) {
      table.counts[0][c] += local[c];
      table.counts[1][c] += local[k + c];
    }
  }
  if (first_bad.load() < n) throw_unknown_label(records[static_cast<std::size_t>(first_bad.load())], vocabulary);
  return table;
}

ContingencyTable apply_filter(const ContingencyTable& table, const FilterSpec& spec) {
  ContingencyTable out;
  out.groups = table.groups;
  for (std::size_t c = 0; c < table.size(); ++c) {
    if (spec.excluded_labels.count(table.categories[c]) != 0) continue;
    const bool keep = spec.per_group
                          ? std::max(table.counts[0][c], table.counts[1][c]) >= spec.min_total
                          : table.column_total(c) >= spec.min_total;
    if (!keep) continue;
    out.categories.push_back(table.categories[c]);
    out.counts[0].push_back(table.counts[0][c]);
    out.counts[1].push_back(table.counts[1][c]);
  }
  return out;
}

namespace {

// Pearson statistic for a table with no zero-total columns and non-empty rows.
double pearson(const std::array<std::vector<std::int64_t>, 2>& counts, bool yates) {
  const auto k = counts[0].size();
  std::array<double, 2> rows{0, 0};
  for (std::size_t g = 0; g < 2; ++g) {
    for (const auto c : counts[g]) rows[g] += static_cast<double>(c);
  }
  const double grand = rows[0] + rows[1];
  double stat = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const double col = static_cast<double>(counts[0][c] + counts[1][c]);
    for (std::size_t g = 0; g < 2; ++g) {
      const double expected = rows[g] * col / grand;
      double diff = std::abs(static_cast<double>(counts[g][c]) - expected);
      if (yates) diff = std::max(0.0, diff - 0.5);
      stat += diff * diff / expected;
    }
  }
  return stat;
}

}  // namespace

ChiSquaredResult chi_squared(const ContingencyTable& table, const ChiSquaredOptions& options) {
  table.validate();
  ChiSquaredResult result;
  std::array<std::vector<std::int64_t>, 2> kept;
  for (std::size_t c = 0; c < table.size(); ++c) {
    if (table.column_total(c) == 0) {
      result.dropped_categories.push_back(table.categories[c]);
      continue;
    }
    kept[0].push_back(table.counts[0][c]);
    kept[1].push_back(table.counts[1][c]);
  }
  for (std::size_t g = 0; g < 2; ++g) {
    std::int64_t total = 0;
    for (const auto c : kept[g]) total += c;
    if (total == 0) throw StatsError("group '" + table.groups[g] + "' has no observations");
  }

  if (options.pool_rare) {
    const double n0 = static_cast<double>(std::accumulate(kept[0].begin(), kept[0].end(), std::int64_t{0}));
    const double n1 = static_cast<double>(std::accumulate(kept[1].begin(), kept[1].end(), std::int64_t{0}));
    const double grand = n0 + n1;
    std::array<std::vector<std::int64_t>, 2> pooled;
    std::array<std::int64_t, 2> rare{0, 0};
    for (std::size_t c = 0; c < kept[0].size(); ++c) {
      const double col = static_cast<double>(kept[0][c] + kept[1][c]);
      if (std::min(n0, n1) * col / grand < kPoolBelowExpected) {
        rare[0] += kept[0][c];
        rare[1] += kept[1][c];
      } else {
        pooled[0].push_back(kept[0][c]);
        pooled[1].push_back(kept[1][c]);
      }
    }
    if (rare[0] + rare[1] > 0) {
      pooled[0].push_back(rare[0]);
      pooled[1].push_back(rare[1]);
    }
    kept = std::move(pooled);
  }

  if (kept[0].size() < 2) {
    throw StatsError("chi-squared needs at least 2 categories with observations, have " +
                     std::to_string(kept[0].size()));
  }
  result.df = static_cast<int>(kept[0].size()) - 1;
  result.statistic = pearson(kept, options.yates && result.df == 1);
  result.p_value = chi_squared_sf(result.statistic, result.df);
  result.variant = std::string("person=n/a") + (options.yates ? ",yates" : "") +
                   (options.pool_rare ? ",pooled" : "");
  return result;
}

std::string AnalysisVariant::describe(std::int64_t min_total) const {
  std::string s = include_person ? "person=include" : "person=exclude";
  s += filtered ? ",categories=filtered(min_total=" + std::to_string(min_total) + ")"
                : ",categories=all-nonzero";
  if (options.yates) s += ",yates";
  if (options.pool_rare) s += ",pool-rare(expected<5)";
  return s;
}

std::string AnalysisVariant::id() const {
  std::string s = include_person ? "include-person" : "exclude-person";
  s += filtered ? "/filtered" : "/full";
  if (options.yates) s += "+yates";
  if (options.pool_rare) s += "+pooled";
  return s;
}

AnalysisVariant AnalysisVariant::parse(std::string_view id) {
  AnalysisVariant v;
  const auto slash = id.find('/');
  if (slash == std::string_view::npos) throw StatsError("variant id needs '<person>/<categories>': " + std::string(id));
  const auto person = id.substr(0, slash);
  if (person == "include-person") {
    v.include_person = true;
  } else if (person == "exclude-person") {
    v.include_person = false;
  } else {
    throw StatsError("unknown person setting in variant '" + std::string(id) + "'");
  }
  std::vector<std::string_view> parts;
  for (auto rest = id.substr(slash + 1);;) {
    const auto plus = rest.find('+');
    parts.push_back(rest.substr(0, plus));
    if (plus == std::string_view::npos) break;
    rest = rest.substr(plus + 1);
  }
  if (parts[0] == "full") {
    v.filtered = false;
  } else if (parts[0] == "filtered") {
    v.filtered = true;
  } else {
    throw StatsError("unknown category set in variant '" + std::string(id) + "'");
  }
  for (std::size_t i = 1; i < parts.size(); ++i) {
    if (parts[i] == "yates") {
      v.options.yates = true;
    } else if (parts[i] == "pooled") {
      v.options.pool_rare = true;
    } else {
      throw StatsError("unknown flag '" + std::string(parts[i]) + "' in variant '" + std::string(id) + "'");
    }
  }
  return v;
}

std::vector<AnalysisVariant> AnalysisVariant::standard() {
  return {{true, false, {}}, {true, true, {}}, {false, false, {}}, {false, true, {}}};
}

ChiSquaredResult evaluate_variant(const ContingencyTable& table, const AnalysisVariant& variant,
                                  std::int64_t min_total) {
  FilterSpec spec;
  if (!variant.include_person) spec.excluded_labels.insert(std::string(kPersonLabel));
  if (variant.filtered) spec.min_total = min_total;
  auto result = chi_squared(apply_filter(table, spec), variant.options);
  result.variant = variant.describe(min_total);
  return result;
}

std::vector<Disparity> rank_disparities(const ContingencyTable& table) {
  std::vector<Disparity> out;
  out.reserve(table.size());
  for (std::size_t c = 0; c < table.size(); ++c) {
    out.push_back({table.categories[c], table.counts[0][c], table.counts[1][c],
                   table.counts[0][c] - table.counts[1][c]});
  }
  std::sort(out.begin(), out.end(), [](const Disparity& a, const Disparity& b) {
    const auto da = a.delta < 0 ? -a.delta : a.delta;
    const auto db = b.delta < 0 ? -b.delta : b.delta;
    if (da != db) return da > db;
    return a.label < b.label;
  });
  return out;
}

}  // namespace biasprobe
