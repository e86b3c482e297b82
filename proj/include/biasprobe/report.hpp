#pragma once

#include <filesystem>
#include <string>

#include "biasprobe/analysis.hpp"

namespace biasprobe {

struct ReportStyle {
  std::string color_a = "#1f77b4";  // first group (male): blue
  std::string color_b = "#f28cc0";  // second group (female): pink
};

// Rows sorted by descending total, ties by label; a "total" row last.
std::string counts_csv(const ContingencyTable& table);
std::string counts_markdown(const ContingencyTable& table);
// Inverse of counts_csv (the totals row is checked, not kept).
ContingencyTable parse_counts_csv(std::string_view csv);

// Chart data restricted to apply_filter(table, spec). "warning" is set when
// no category survives.
nlohmann::json chart_data(const ContingencyTable& table, const FilterSpec& spec,
                          const ReportStyle& style = {});
// Grouped bar chart, 1200x400, rendered from chart_data().
std::string chart_svg(const nlohmann::json& data);

// Fixed-point with six decimals; values too small to show get a scientific suffix.
std::string format_p_value(double p);
std::string summary_markdown(const Analysis& analysis, std::size_t top_n = 10);

// Writes counts.csv, counts.md, chart_data.json, chart.svg and summary.md
// into out_dir. Returns false if the chart came out empty.
bool emit_counts_table(const ContingencyTable& table, const std::filesystem::path& out_dir);
bool emit_bar_chart(const ContingencyTable& table, const FilterSpec& spec,
                    const std::filesystem::path& out_dir, const ReportStyle& style = {});
void emit_summary(const Analysis& analysis, const std::filesystem::path& out_dir);
bool emit_report(const Analysis& analysis, const std::filesystem::path& out_dir,
                 const ReportStyle& style = {});

}  // namespace biasprobe
