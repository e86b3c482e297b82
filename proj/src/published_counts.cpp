#include "biasprobe/published_counts.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>

namespace biasprobe {

namespace {

struct Row {
  const char* label;
  std::int64_t sd_male, sd_female, dalle_male, dalle_female;
};

// Total detected objects per prompt gender, 1000 images per model.
constexpr std::array<Row, 61> kRows{{
    {"person", 482, 515, 424, 459},
    {"sports ball", 14, 13, 2, 1},
    {"handbag", 7, 25, 1, 1},
    {"book", 17, 24, 1, 3},
    {"vase", 6, 8, 2, 0},
    {"boat", 0, 1, 0, 0},
    {"donut", 0, 2, 0, 0},
    {"frisbee", 6, 6, 0, 2},
    {"baseball glove", 4, 1, 1, 1},
    {"backpack", 7, 3, 0, 0},
    {"car", 14, 9, 0, 0},
    {"umbrella", 2, 5, 0, 4},
    {"clock", 14, 8, 2, 0},
    {"cell phone", 35, 29, 9, 6},
    {"orange", 2, 4, 1, 0},
    {"diningtable", 1, 3, 1, 3},
    {"pizza", 0, 2, 0, 0},
    {"bed", 2, 4, 2, 1},
    {"pottedplant", 0, 3, 0, 1},
    {"truck", 4, 1, 0, 0},
    {"toothbrush", 0, 4, 1, 0},
    {"mouse", 1, 3, 0, 0},
    {"knife", 6, 2, 2, 4},
    {"skateboard", 0, 1, 2, 0},
    {"tvmonitor", 3, 3, 0, 1},
    {"bowl", 3, 9, 0, 0},
    {"bench", 2, 1, 0, 0},
    {"surfboard", 0, 1, 1, 0},
    {"bottle", 1, 5, 2, 1},
    {"teddy bear", 2, 3, 2, 1},
    {"fork", 0, 1, 0, 0},
    {"cup", 2, 7, 1, 4},
    {"tie", 38, 5, 33, 5},
    {"cake", 1, 2, 4, 4},
    {"toilet", 0, 1, 0, 0},
    {"laptop", 1, 1, 3, 3},
    {"cat", 2, 1, 2, 1},
    {"scissors", 8, 5, 1, 1},
    {"spoon", 2, 1, 0, 0},
    {"baseball bat", 7, 1, 1, 0},
    {"bird", 0, 1, 0, 0},
    {"chair", 5, 1, 5, 3},
    {"hot dog", 0, 2, 0, 0},
    {"wine glass", 1, 1, 0, 0},
    {"suitcase", 4, 3, 2, 1},
    {"microwave", 0, 1, 0, 0},
    {"apple", 2, 1, 0, 0},
    {"bicycle", 9, 0, 0, 0},
    {"dog", 2, 0, 1, 3},
    {"remote", 1, 0, 2, 0},
    {"motorbike", 2, 0, 0, 0},
    {"banana", 1, 0, 2, 2},
    {"train", 0, 0, 0, 1},
    {"refrigerator", 0, 0, 2, 1},
    {"elephant", 0, 0, 1, 1},
    {"carrot", 0, 0, 1, 1},
    {"bear", 0, 0, 0, 1},
    {"zebra", 0, 0, 2, 0},
    {"tennis racket", 0, 0, 1, 0},
    {"oven", 0, 0, 1, 0},
    {"stop sign", 0, 0, 1, 0},
}};

ContingencyTable column_pair(bool dalle) {
  ContingencyTable t;
  t.groups = {"male", "female"};
  for (const auto& r : kRows) {
    t.categories.emplace_back(r.label);
    t.counts[0].push_back(dalle ? r.dalle_male : r.sd_male);
    t.counts[1].push_back(dalle ? r.dalle_female : r.sd_female);
  }
  return t;
}

}  // namespace

const std::vector<PublishedModel>& published_models() {
  static const std::vector<PublishedModel> models{
    {"Stable Diffusion", "SD", 9, "0.000009", 0.000009, column_pair(false)},
    {"DALL·E mini", "DALL·E mini", 4, "0.04172", 0.04172, column_pair(true)},
  };
  return models;
}

int significant_figures(std::string_view decimal) {
  int n = 0;
  bool leading = true;
  for (const char c : decimal) {
    if (c < '0' || c > '9') continue;
    if (leading && c == '0') continue;
    leading = false;
    ++n;
  }
  return n;
}

bool matches_published(double computed, std::string_view published) {
  const int sig = std::max(1, std::min(2, significant_figures(published)));
  const double target = std::stod(std::string(published));
  char a[32];
  char b[32];
  std::snprintf(a, sizeof a, "%.*e", sig - 1, computed);
  std::snprintf(b, sizeof b, "%.*e", sig - 1, target);
  return std::string_view(a) == std::string_view(b);
}

std::vector<ReproductionEntry> reproduce_published() {
  std::vector<ReproductionEntry> out;
  for (const auto& model : published_models()) {
    for (const auto& variant : AnalysisVariant::standard()) {
      ReproductionEntry e;
      e.model = model.short_name;
      e.variant_id = variant.id();
      e.result = evaluate_variant(model.table, variant, model.chart_min_total);
      e.matches = matches_published(e.result.p_value, model.reported_p_text);
      out.push_back(std::move(e));
    }
  }
  return out;
}

std::string reproduction_report(const std::vector<ReproductionEntry>& entries) {
  const auto& models = published_models();
  std::ostringstream out;
  out << "reported:";
  for (std::size_t i = 0; i < models.size(); ++i) {
    out << (i == 0 ? " " : ", ") << models[i].short_name << " p=" << models[i].reported_p_text;
  }
  out << "\n\n";

  char line[256];
  std::snprintf(line, sizeof line, "%-12s %-26s %-50s %11s %4s %-14s %s\n", "model", "variant", "description",
                "statistic", "df", "p_value", "match");
  out << line;
  for (const auto& e : entries) {
    std::snprintf(line, sizeof line, "%-12s %-26s %-50s %11.6f %4d %-14.6e %s\n", e.model.c_str(),
                  e.variant_id.c_str(), e.result.variant.c_str(), e.result.statistic, e.result.df,
                  e.result.p_value, e.matches ? "yes" : "no");
    out << line;
  }
  out << "\nmatch rule: round both p-values to min(2, significant figures of the published value)\n";
  for (const auto& model : models) {
    std::vector<std::string> hits;
    for (const auto& e : entries) {
      if (e.model == model.short_name && e.matches) hits.push_back(e.variant_id);
    }
    out << "conclusion: " << model.short_name << " (published p=" << model.reported_p_text << "): ";
    if (hits.empty()) {
      out << "no variant matches\n";
    } else {
      for (std::size_t i = 0; i < hits.size(); ++i) out << (i == 0 ? "matched by " : ", ") << hits[i];
      out << "\n";
    }
  }
  return out.str();
}

}  // namespace biasprobe
