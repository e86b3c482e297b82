#include <gtest/gtest.h>

#include <map>
#include <set>

#include "biasprobe/prompt_corpus.hpp"
#include "test_support.hpp"

using namespace biasprobe;

TEST(Templates, ParseSkipsCommentsAndBlankLines) {
  const auto t = parse_templates("# header\n\nA {gender} with a dog\n  # indented comment\nA {gender} at work\n");
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[0].id, 0);
  EXPECT_EQ(t[1].id, 1);
  EXPECT_EQ(t[1].render("woman"), "A woman at work");
}

TEST(Templates, RejectsMissingOrRepeatedPlaceholder) {
  EXPECT_THROW(parse_templates("A person at work\n"), CorpusError);
  EXPECT_THROW(parse_templates("A {gender} and a {gender}\n"), CorpusError);
  try {
    parse_templates("A {gender} ok\nno slot here\n", "corpus.txt");
    FAIL();
  } catch (const CorpusError& e) {
    EXPECT_NE(std::string(e.what()).find("no slot here"), std::string::npos) << e.what();
  }
}

TEST(Templates, RejectsEmptyCorpus) {
  EXPECT_THROW(parse_templates(""), CorpusError);
  EXPECT_THROW(parse_templates("# only comments\n\n"), CorpusError);
}

TEST(Templates, ShippedCorpusHasFiftyTemplates) {
  const auto t = default_templates();
  EXPECT_EQ(t.size(), 50u);
  const auto from_file = load_templates(biasprobe::testing::source_path("data/templates.txt"));
  ASSERT_EQ(from_file.size(), t.size());
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(from_file[i].text, t[i].text);
}

TEST(Pairs, ValidationRejectsBadPairs) {
  EXPECT_EQ(validate_pairs(default_pairs()), (std::vector<std::string>{"male", "female"}));
  EXPECT_THROW(validate_pairs({}), CorpusError);
  EXPECT_THROW(validate_pairs({{0, "man", "man", "male", "female"}}), CorpusError);
  EXPECT_THROW(validate_pairs({{0, "man", "woman", "male", "male"}}), CorpusError);
  EXPECT_THROW(validate_pairs({{0, "man", "woman", "male", "female"}, {1, "boy", "girl", "male", "child"}}),
               CorpusError);
}

// Golden values from an independent Python reimplementation of the mixer.
TEST(Seeds, MatchIndependentReference) {
  EXPECT_EQ(derive_seed(0, 0, 0, 0), 1876653164528899092ULL);
  EXPECT_EQ(derive_seed(0, 3, 1, 4), 14784807463177724930ULL);
  EXPECT_EQ(derive_seed(42, 49, 1, 2), 15038368166675043500ULL);
  EXPECT_EQ(derive_seed(9223372036854775813ULL, 17, 0, 3), 7239779965655672983ULL);
}

TEST(Plan, DefaultArithmetic) {
  const auto plan = expand(default_templates(), default_pairs(), 5, 0);
  EXPECT_EQ(plan.instances.size(), 1000u);
  EXPECT_EQ(plan.distinct_prompt_count(), 200u);
  EXPECT_EQ(plan.groups, (std::vector<std::string>{"male", "female"}));

  std::set<std::string> keys;
  for (const auto& i : plan.instances) keys.insert(i.key());
  EXPECT_EQ(keys.size(), 1000u);
}

TEST(Plan, PairSidesShareSeedsAndDifferOnlyInGenderWord) {
  const auto plan = expand(default_templates(), default_pairs(), 5, 7);
  std::map<std::tuple<int, int, int>, std::vector<const PromptInstance*>> groups;
  for (const auto& i : plan.instances) groups[{i.template_id, i.pair_id, i.replicate}].push_back(&i);
  ASSERT_EQ(groups.size(), 500u);
  std::set<std::uint64_t> seeds;
  for (const auto& [k, members] : groups) {
    ASSERT_EQ(members.size(), 2u);
    EXPECT_EQ(members[0]->seed, members[1]->seed);
    EXPECT_NE(members[0]->group, members[1]->group);
    seeds.insert(members[0]->seed);
  }
  EXPECT_EQ(seeds.size(), 500u);
}

TEST(Plan, OrderingIsTemplatePairReplicateSide) {
  const auto plan = expand(default_templates(), default_pairs(), 2, 0);
  EXPECT_EQ(plan.instances[0].key(), "0_0_male_0");
  EXPECT_EQ(plan.instances[1].key(), "0_0_female_0");
  EXPECT_EQ(plan.instances[2].key(), "0_0_male_1");
  EXPECT_EQ(plan.instances[4].key(), "0_1_male_0");
  EXPECT_EQ(plan.instances[8].key(), "1_0_male_0");
  EXPECT_EQ(plan.instances[1].rendered_text, default_templates()[0].render("woman"));
}

TEST(Plan, ReplicatesMustBePositive) {
  EXPECT_THROW(expand(default_templates(), default_pairs(), 0, 0), CorpusError);
}

TEST(Plan, DeterministicAndSeedSensitive) {
  const auto a = expand(default_templates(), default_pairs(), 5, 1);
  const auto b = expand(default_templates(), default_pairs(), 5, 1);
  const auto c = expand(default_templates(), default_pairs(), 5, 2);
  EXPECT_EQ(a.corpus_hash, b.corpus_hash);
  EXPECT_EQ(a.corpus_hash, c.corpus_hash);
  for (std::size_t i = 0; i < a.instances.size(); ++i) EXPECT_EQ(a.instances[i].seed, b.instances[i].seed);
  EXPECT_NE(a.instances[0].seed, c.instances[0].seed);
}

TEST(Plan, CorpusHashTracksTemplatesAndPairs) {
  auto templates = default_templates();
  const auto base = corpus_hash(templates, default_pairs());
  templates[3].text = "A {gender} with a kite";
  EXPECT_NE(corpus_hash(templates, default_pairs()), base);
  auto pairs = default_pairs();
  pairs[1].word_b = "lady";
  EXPECT_NE(corpus_hash(default_templates(), pairs), base);
}
