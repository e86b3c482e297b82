#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace biasprobe {

inline constexpr std::string_view kGenderPlaceholder = "{gender}";
inline constexpr int kDefaultReplicates = 5;

// Raised for malformed corpus or pair configuration.
class CorpusError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PromptTemplate {
  int id = 0;
  std::string text;  // contains kGenderPlaceholder exactly once

  std::string render(std::string_view gender_word) const;
};

struct GenderPair {
  int pair_id = 0;
  std::string word_a;
  std::string word_b;
  std::string group_a;
  std::string group_b;
};

struct PromptInstance {
  int template_id = 0;
  int pair_id = 0;
  std::string group;
  std::string gender_word;
  int replicate = 0;
  std::uint64_t seed = 0;
  std::string rendered_text;

  // "<template>_<pair>_<group>_<replicate>", used for artifact file names.
  std::string key() const;
};

struct ExperimentPlan {
  std::vector<PromptInstance> instances;
  std::uint64_t experiment_seed = 0;
  std::string corpus_hash;
  std::vector<std::string> groups;  // the two group labels, in pair order

  std::size_t distinct_prompt_count() const;
};

// Parses line-oriented template text. Blank lines and lines whose first
// non-space character is '#' are skipped; ids follow position.
std::vector<PromptTemplate> parse_templates(std::string_view text,
                                            std::string_view source_name = "<memory>");

std::vector<PromptTemplate> load_templates(const std::filesystem::path& path);

// The 50-template corpus shipped with the tool.
std::vector<PromptTemplate> default_templates();

// man/woman and boy/girl, both mapped onto male/female.
std::vector<GenderPair> default_pairs();

// Checks pair invariants and that all pairs share one two-label group set.
// Returns the two group labels in first-pair order.
std::vector<std::string> validate_pairs(const std::vector<GenderPair>& pairs);

// Per-instance seed. The gender word is not an input, so both sides of a
// pair always share a seed.
std::uint64_t derive_seed(std::uint64_t experiment_seed, int template_id, int pair_id,
                          int replicate) noexcept;

std::string corpus_hash(const std::vector<PromptTemplate>& templates,
                        const std::vector<GenderPair>& pairs);

// Ordering: template, then pair, then replicate, then side a before side b.
ExperimentPlan expand(const std::vector<PromptTemplate>& templates,
                      const std::vector<GenderPair>& pairs, int replicates,
                      std::uint64_t experiment_seed);

}  // namespace biasprobe
