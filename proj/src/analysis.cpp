#include "biasprobe/analysis.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "biasprobe/pipeline.hpp"

namespace biasprobe {

using nlohmann::json;

namespace {

std::string format_17g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void to_json(json& j, const ContingencyTable& t) {
  j = json{{"categories", t.categories},
           {"groups", t.groups},
           {"counts", {t.counts[0], t.counts[1]}}};
}

void from_json(const json& j, ContingencyTable& t) {
  j.at("categories").get_to(t.categories);
  j.at("groups").get_to(t.groups);
  const auto& c = j.at("counts");
  if (!c.is_array() || c.size() != 2) throw StatsError("table counts must have two rows");
  c[0].get_to(t.counts[0]);
  c[1].get_to(t.counts[1]);
  t.validate();
}

void to_json(json& j, const FilterSpec& f) {
  j = json{{"min_total", f.min_total}, {"exclude", f.excluded_labels}, {"per_group", f.per_group}};
}

void from_json(const json& j, FilterSpec& f) {
  j.at("min_total").get_to(f.min_total);
  f.excluded_labels = j.value("exclude", std::set<std::string>{});
  f.per_group = j.value("per_group", false);
}

Analysis analyze_table(const ContingencyTable& table, const AnalysisConfig& config, std::string title) {
  table.validate();
  Analysis a;
  a.title = std::move(title);
  a.table = table;
  a.filter = config.filter;
  for (const auto& variant : config.variants) {
    VariantOutcome outcome;
    outcome.id = variant.id();
    try {
      outcome.result = evaluate_variant(table, variant, config.filter.min_total);
    } catch (const StatsError& e) {
      outcome.error = e.what();
    }
    a.outcomes.push_back(std::move(outcome));
  }
  a.ranking = rank_disparities(table);
  return a;
}

Analysis analyze_run(const std::filesystem::path& run_dir, const DetectorVocabulary& vocabulary,
                     const AnalysisConfig& config) {
  const auto results = collect_results(run_dir);
  const auto& m = results.manifest;
  if (m.groups.size() != 2) throw StatsError("run manifest must name exactly two groups");
  const auto total = m.instance_count;
  if (total > 0) {
    const double fraction = static_cast<double>(results.failed) / static_cast<double>(total);
    if (fraction > config.max_failure_fraction) {
      std::ostringstream msg;
      msg << results.failed << " of " << total << " instances failed (" << fraction * 100
          << "%), above the failure budget of " << config.max_failure_fraction * 100 << "%";
      throw FailureBudgetExceeded(msg.str());
    }
  }
  auto table = build_table(results.records, {m.groups[0], m.groups[1]}, vocabulary);
  auto a = analyze_table(table, config, m.run_id);
  a.total_instances = total;
  a.failed_instances = results.failed;
  a.manifest = json(m);
  return a;
}

json to_json(const Analysis& a) {
  json outcomes = json::array();
  for (const auto& o : a.outcomes) {
    json entry{{"id", o.id}};
    if (o.result) {
      entry["variant"] = o.result->variant;
      entry["statistic"] = o.result->statistic;
      entry["df"] = o.result->df;
      entry["p_value"] = o.result->p_value;
      entry["p_value_text"] = format_17g(o.result->p_value);
      entry["dropped_categories"] = o.result->dropped_categories;
    } else {
      entry["error"] = o.error;
    }
    outcomes.push_back(std::move(entry));
  }
  json ranking = json::array();
  for (const auto& d : a.ranking) {
    ranking.push_back({{"label", d.label}, {"count_a", d.count_a}, {"count_b", d.count_b}, {"delta", d.delta}});
  }
  return json{{"v", 1},
              {"title", a.title},
              {"table", a.table},
              {"filter", a.filter},
              {"results", outcomes},
              {"ranking", ranking},
              {"instances", {{"total", a.total_instances}, {"failed", a.failed_instances}}},
              {"manifest", a.manifest}};
}

Analysis analysis_from_json(const json& j) {
  Analysis a;
  a.title = j.value("title", std::string{});
  j.at("table").get_to(a.table);
  j.at("filter").get_to(a.filter);
  for (const auto& e : j.at("results")) {
    VariantOutcome o;
    o.id = e.at("id").get<std::string>();
    if (e.contains("error")) {
      o.error = e["error"].get<std::string>();
    } else {
      ChiSquaredResult r;
      r.variant = e.at("variant").get<std::string>();
      r.statistic = e.at("statistic").get<double>();
      r.df = e.at("df").get<int>();
      r.p_value = e.at("p_value").get<double>();
      r.dropped_categories = e.at("dropped_categories").get<std::vector<std::string>>();
      o.result = std::move(r);
    }
    a.outcomes.push_back(std::move(o));
  }
  for (const auto& e : j.at("ranking")) {
    a.ranking.push_back({e.at("label").get<std::string>(), e.at("count_a").get<std::int64_t>(),
                         e.at("count_b").get<std::int64_t>(), e.at("delta").get<std::int64_t>()});
  }
  a.total_instances = j.at("instances").at("total").get<std::size_t>();
  a.failed_instances = j.at("instances").at("failed").get<std::size_t>();
  a.manifest = j.value("manifest", json::object());
  return a;
}

void write_analysis(const std::filesystem::path& path, const Analysis& analysis) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << to_json(analysis).dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

Analysis read_analysis(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return analysis_from_json(json::parse(in));
}

}  // namespace biasprobe
