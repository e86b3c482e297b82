#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "biasprobe/stats.hpp"

namespace biasprobe {

// Object counts reported for a full-scale audit of one text-to-image model,
// together with the p-value and bar-chart threshold reported alongside.
struct PublishedModel {
  std::string name;        // "Stable Diffusion"
  std::string short_name;  // "SD"
  std::int64_t chart_min_total = 0;
  std::string reported_p_text;  // as printed, e.g. "0.000009"
  double reported_p = 0;
  ContingencyTable table;  // groups {male, female}, 61 categories in published row order
};

// Stable Diffusion v2-1 and DALL·E mini, 1000 images each.
const std::vector<PublishedModel>& published_models();

struct ReproductionEntry {
  std::string model;       // short name
  std::string variant_id;  // AnalysisVariant::id()
  ChiSquaredResult result;
  bool matches = false;
};

// Significant figures printed in a decimal literal ("0.000009" -> 1, "0.04172" -> 4).
int significant_figures(std::string_view decimal);

// True when both values agree after rounding to min(2, significant figures
// of the published literal).
bool matches_published(double computed, std::string_view published);

// All standard variants for every published model (2 x 4 entries), each
// with the model's own chart threshold as min_total.
std::vector<ReproductionEntry> reproduce_published();

// The variant x p-value matrix followed by a one-line conclusion per model.
std::string reproduction_report(const std::vector<ReproductionEntry>& entries);

}  // namespace biasprobe
