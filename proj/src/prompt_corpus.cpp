#include "biasprobe/prompt_corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "biasprobe/digest.hpp"
#include "biasprobe/rng.hpp"

namespace biasprobe {

namespace embedded {
extern const std::string_view kDefaultTemplates;
}

namespace {

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool is_label_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c == '-';
}

}  // namespace

std::string PromptTemplate::render(std::string_view gender_word) const {
  std::string out = text;
  const auto pos = out.find(kGenderPlaceholder);
  if (pos != std::string::npos) out.replace(pos, kGenderPlaceholder.size(), gender_word);
  return out;
}

std::string PromptInstance::key() const {
  return std::to_string(template_id) + "_" + std::to_string(pair_id) + "_" + group + "_" +
         std::to_string(replicate);
}

std::size_t ExperimentPlan::distinct_prompt_count() const {
  std::set<std::string_view> prompts;
  for (const auto& inst : instances) prompts.insert(inst.rendered_text);
  return prompts.size();
}

std::vector<PromptTemplate> parse_templates(std::string_view text, std::string_view source_name) {
  std::vector<PromptTemplate> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const auto line = trim(text.substr(start, end - start));
    start = end + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto n = count_occurrences(line, kGenderPlaceholder);
    if (n != 1) {
      std::ostringstream msg;
      msg << source_name << ":" << line_no << ": expected exactly one " << kGenderPlaceholder
          << " placeholder, found " << n << ": '" << line << "'";
      throw CorpusError(msg.str());
    }
    out.push_back({static_cast<int>(out.size()), std::string(line)});
  }
  if (out.empty()) {
    throw CorpusError(std::string(source_name) + ": template corpus contains no templates");
  }
  return out;
}

std::vector<PromptTemplate> load_templates(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot read template corpus: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_templates(buf.str(), path.string());
}

std::vector<PromptTemplate> default_templates() {
  return parse_templates(embedded::kDefaultTemplates, "<default corpus>");
}

std::vector<GenderPair> default_pairs() {
  return {
      {0, "man", "woman", "male", "female"},
      {1, "boy", "girl", "male", "female"},
  };
}

std::vector<std::string> validate_pairs(const std::vector<GenderPair>& pairs) {
  if (pairs.empty()) throw CorpusError("at least one gender pair is required");
  const std::vector<std::string> groups{pairs.front().group_a, pairs.front().group_b};
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    const std::string where = "gender pair " + std::to_string(i);
    if (p.pair_id != static_cast<int>(i)) {
      throw CorpusError(where + ": pair ids must be contiguous from 0");
    }
    if (p.word_a.empty() || p.word_b.empty()) throw CorpusError(where + ": empty gender word");
    if (p.word_a == p.word_b) throw CorpusError(where + ": both words are '" + p.word_a + "'");
    if (p.group_a == p.group_b) throw CorpusError(where + ": both groups are '" + p.group_a + "'");
    for (const auto& g : {p.group_a, p.group_b}) {
      if (g.empty() || !std::all_of(g.begin(), g.end(), is_label_char)) {
        throw CorpusError(where + ": group label '" + g + "' must match [A-Za-z0-9-]+");
      }
    }
    const bool same = p.group_a == groups[0] && p.group_b == groups[1];
    const bool swapped = p.group_a == groups[1] && p.group_b == groups[0];
    if (!same && !swapped) {
      throw CorpusError(where + ": groups {" + p.group_a + ", " + p.group_b +
                        "} differ from {" + groups[0] + ", " + groups[1] + "}");
    }
  }
  return groups;
}

std::uint64_t derive_seed(std::uint64_t experiment_seed, int template_id, int pair_id,
                          int replicate) noexcept {
  std::uint64_t h = mix64(experiment_seed + SplitMix64::kGamma);
  h = mix64(h ^ static_cast<std::uint32_t>(template_id));
  h = mix64(h ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(pair_id)) << 32));
  h = mix64(h ^ static_cast<std::uint32_t>(replicate) ^ 0x5bd1e9955bd1e995ULL);
  return h;
}

std::string corpus_hash(const std::vector<PromptTemplate>& templates,
                        const std::vector<GenderPair>& pairs) {
  std::string canon = "templates\n";
  for (const auto& t : templates) canon += std::to_string(t.id) + "\t" + t.text + "\n";
  canon += "pairs\n";
  for (const auto& p : pairs) {
    canon += std::to_string(p.pair_id) + "\t" + p.word_a + "\t" + p.word_b + "\t" + p.group_a +
             "\t" + p.group_b + "\n";
  }
  return sha256_hex(canon);
}

ExperimentPlan expand(const std::vector<PromptTemplate>& templates,
                      const std::vector<GenderPair>& pairs, int replicates,
                      std::uint64_t experiment_seed) {
  if (replicates < 1) throw CorpusError("replicates must be >= 1");
  ExperimentPlan plan;
  plan.groups = validate_pairs(pairs);
  plan.experiment_seed = experiment_seed;
  plan.corpus_hash = corpus_hash(templates, pairs);
  plan.instances.reserve(templates.size() * pairs.size() * 2 * static_cast<std::size_t>(replicates));
  for (const auto& t : templates) {
    for (const auto& p : pairs) {
      for (int r = 0; r < replicates; ++r) {
        const auto seed = derive_seed(experiment_seed, t.id, p.pair_id, r);
        plan.instances.push_back({t.id, p.pair_id, p.group_a, p.word_a, r, seed, t.render(p.word_a)});
        plan.instances.push_back({t.id, p.pair_id, p.group_b, p.word_b, r, seed, t.render(p.word_b)});
      }
    }
  }
  return plan;
}

}  // namespace biasprobe
