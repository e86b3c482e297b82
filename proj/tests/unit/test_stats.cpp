#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <random>

#include "biasprobe/published_counts.hpp"
#include "biasprobe/stats.hpp"
#include "biasprobe/vocabulary.hpp"

using namespace biasprobe;

namespace {

ContingencyTable make(std::vector<std::string> cats, std::vector<std::int64_t> a, std::vector<std::int64_t> b) {
  ContingencyTable t;
  t.categories = std::move(cats);
  t.groups = {"male", "female"};
  t.counts = {std::move(a), std::move(b)};
  return t;
}

const ContingencyTable& sd() { return published_models().at(0).table; }
const ContingencyTable& dalle() { return published_models().at(1).table; }

// Textbook Pearson statistic in long double, for comparison only.
long double reference_statistic(const ContingencyTable& t) {
  long double n = 0, r0 = 0, r1 = 0;
  for (std::size_t j = 0; j < t.size(); ++j) {
    r0 += t.counts[0][j];
    r1 += t.counts[1][j];
  }
  n = r0 + r1;
  long double stat = 0;
  for (std::size_t j = 0; j < t.size(); ++j) {
    const long double c = t.counts[0][j] + t.counts[1][j];
    if (c == 0) continue;
    const long double e0 = r0 * c / n, e1 = r1 * c / n;
    stat += (t.counts[0][j] - e0) * (t.counts[0][j] - e0) / e0;
    stat += (t.counts[1][j] - e1) * (t.counts[1][j] - e1) / e1;
  }
  return stat;
}

double boost_sf(double stat, int df) {
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), stat));
}

}  // namespace

TEST(Fixture, PublishedRowsAreIntact) {
  EXPECT_EQ(sd().size(), 61u);
  EXPECT_EQ(sd().count("male", "tie"), 38);
  EXPECT_EQ(sd().count("female", "tie"), 5);
  EXPECT_EQ(sd().count("male", "handbag"), 7);
  EXPECT_EQ(sd().count("female", "handbag"), 25);
  EXPECT_EQ(dalle().count("male", "cell phone"), 9);
  EXPECT_EQ(dalle().count("female", "cell phone"), 6);
  EXPECT_EQ(sd().count("male", "person"), 482);
  EXPECT_EQ(sd().row_total(0) + sd().row_total(1), 1456);
  EXPECT_EQ(dalle().row_total(0) + dalle().row_total(1), 1043);
  EXPECT_NO_THROW(sd().validate());
  for (const auto& label : sd().categories) EXPECT_TRUE(DetectorVocabulary::coco80().contains(label)) << label;
}

TEST(Table, ValidationAndLookup) {
  auto t = make({"a", "b"}, {1, 2}, {3, 4});
  EXPECT_EQ(t.group_index("female"), 1u);
  EXPECT_THROW(t.group_index("other"), StatsError);
  EXPECT_EQ(t.column_total(1), 6);
  EXPECT_EQ(t.count("male", "zzz"), 0);
  t.counts[0][0] = -1;
  EXPECT_THROW(t.validate(), StatsError);
  EXPECT_THROW(make({"a", "a"}, {1, 2}, {3, 4}).validate(), StatsError);
  EXPECT_THROW(make({"a", "b"}, {1}, {3, 4}).validate(), StatsError);
}

TEST(BuildTable, MultisetCountingMatchesSerial) {
  const auto vocab = DetectorVocabulary::coco80();
  std::vector<DetectionRecord> records;
  std::mt19937_64 rng(9);
  for (int i = 0; i < 400; ++i) {
    DetectionRecord r{{i % 50, 0, i % 2 ? "female" : "male", i / 100}, {}, ""};
    for (int k = 0; k < 4; ++k) r.detections.push_back({vocab.labels()[rng() % 80], 0.9, {}});
    records.push_back(r);
  }
  records[0].detections = {{"cup", 0.9, {}}, {"cup", 0.8, {}}};
  const auto parallel = build_table(records, {"male", "female"}, vocab);
  const auto serial = build_table_serial(records, {"male", "female"}, vocab);
  EXPECT_EQ(parallel, serial);
  EXPECT_EQ(parallel.size(), 80u);
  EXPECT_EQ(parallel.row_total(0) + parallel.row_total(1), 1598);

  records.push_back({{0, 0, "robot", 0}, {{"cup", 0.9, {}}}, ""});
  EXPECT_THROW(build_table(records, {"male", "female"}, vocab), StatsError);
}

TEST(Filter, FigureThresholdOnStableDiffusion) {
  const auto f = apply_filter(sd(), {9, {"person"}, false});
  EXPECT_TRUE(f.find("bicycle"));
  EXPECT_FALSE(f.find("truck"));
  EXPECT_FALSE(f.find("person"));
  EXPECT_TRUE(f.find("tie"));
  for (std::size_t j = 0; j < f.size(); ++j) EXPECT_GE(f.column_total(j), 9);
  EXPECT_EQ(f.size(), 14u);
}

TEST(Filter, PerGroupAndExclusion) {
  const auto t = make({"a", "b", "c"}, {5, 3, 0}, {0, 3, 6});
  EXPECT_EQ(apply_filter(t, {6, {}, false}).categories, (std::vector<std::string>{"b", "c"}));
  EXPECT_EQ(apply_filter(t, {5, {}, true}).categories, (std::vector<std::string>{"a", "c"}));
  EXPECT_EQ(apply_filter(t, {0, {"b"}, false}).categories, (std::vector<std::string>{"a", "c"}));
  EXPECT_TRUE(apply_filter(t, {100, {}, false}).categories.empty());
}

TEST(ChiSquared, TwoByTwoOracle) {
  const auto r = chi_squared(make({"x", "y"}, {10, 20}, {20, 10}));
  EXPECT_NEAR(r.statistic, 20.0 / 3.0, 1e-12);
  EXPECT_EQ(r.df, 1);
  EXPECT_NEAR(r.p_value, 0.009823274507519235, 1e-12);  // scipy.stats.chi2.sf(20/3, 1)

  const auto y = chi_squared(make({"x", "y"}, {10, 20}, {20, 10}), {true, false});
  EXPECT_NEAR(y.statistic, 5.4, 1e-12);
  EXPECT_NEAR(y.p_value, 0.02013675155034633, 1e-12);  // scipy chi2_contingency(correction=True)
}

TEST(ChiSquared, ThreeCategoryOracle) {
  const auto r = chi_squared(make({"tie", "cup", "book"}, {38, 5, 9}, {5, 9, 6}), {true, false});
  EXPECT_NEAR(r.statistic, 16.00836187068745, 1e-10);
  EXPECT_EQ(r.df, 2);
  EXPECT_NEAR(r.p_value, 0.0003340630082434698, 1e-12);
}

TEST(ChiSquared, DropsZeroTotalCategories) {
  const auto r = chi_squared(make({"a", "b", "c"}, {10, 0, 20}, {20, 0, 10}));
  EXPECT_EQ(r.df, 1);
  EXPECT_EQ(r.dropped_categories, (std::vector<std::string>{"b"}));
  EXPECT_NEAR(r.statistic, 20.0 / 3.0, 1e-12);
}

TEST(ChiSquared, RejectsDegenerateTables) {
  EXPECT_THROW(chi_squared(make({"a"}, {3}, {4})), StatsError);
  EXPECT_THROW(chi_squared(make({"a", "b"}, {3, 0}, {4, 0})), StatsError);
  EXPECT_THROW(chi_squared(make({"a", "b"}, {3, 5}, {0, 0})), StatsError);
}

TEST(ChiSquared, PoolingRareCategories) {
  const auto t = make({"a", "b", "c", "d"}, {30, 25, 1, 2}, {20, 35, 2, 0});
  const auto pooled = chi_squared(t, {false, true});
  EXPECT_EQ(pooled.df, 2);
  const auto manual = chi_squared(make({"a", "b", "other"}, {30, 25, 3}, {20, 35, 2}));
  EXPECT_NEAR(pooled.statistic, manual.statistic, 1e-12);
}

TEST(ChiSquared, PublishedTablesAgainstScipy) {
  struct Case {
    const ContingencyTable* table;
    const char* variant;
    std::int64_t min_total;
    double stat;
    int df;
    double p;
  };
  const std::vector<Case> cases{
      {&sd(), "include-person/full", 9, 106.4148802925867, 51, 8.82453933430721e-06},
      {&sd(), "include-person/filtered", 9, 58.405118811832416, 14, 2.2294447762780787e-07},
      {&sd(), "exclude-person/full", 9, 104.49613950370268, 50, 1.0127225054275466e-05},
      {&sd(), "exclude-person/filtered", 9, 55.207351348006476, 13, 3.7160227513827867e-07},
      {&dalle(), "include-person/full", 4, 57.91798938372274, 41, 0.041719978094579106},
      {&dalle(), "include-person/filtered", 4, 32.30289158103368, 12, 0.001242362127187086},
      {&dalle(), "exclude-person/full", 4, 51.0141713731333, 40, 0.11376946378162871},
      {&dalle(), "exclude-person/filtered", 4, 28.977225780727476, 11, 0.0022885022054873303},
  };
  for (const auto& c : cases) {
    const auto r = evaluate_variant(*c.table, AnalysisVariant::parse(c.variant), c.min_total);
    EXPECT_NEAR(r.statistic, c.stat, 1e-10 * c.stat) << c.variant;
    EXPECT_EQ(r.df, c.df) << c.variant;
    EXPECT_NEAR(r.p_value, c.p, 1e-8) << c.variant;
    EXPECT_NEAR(r.p_value / c.p, 1.0, 1e-9) << c.variant;
  }
}

TEST(ChiSquared, RandomTablesAgainstBoost) {
  std::mt19937_64 rng(20240611);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 2 + static_cast<int>(rng() % 40);
    std::vector<std::string> cats;
    std::vector<std::int64_t> a, b;
    for (int j = 0; j < k; ++j) {
      cats.push_back("c" + std::to_string(j));
      a.push_back(static_cast<std::int64_t>(rng() % 60));
      b.push_back(static_cast<std::int64_t>(rng() % 60));
    }
    a[0] += 1;
    b[1] += 1;
    const auto t = make(cats, a, b);
    const auto r = chi_squared(t);
    const double ref_stat = static_cast<double>(reference_statistic(t));
    EXPECT_NEAR(r.statistic, ref_stat, 1e-10 * std::max(1.0, ref_stat));
    EXPECT_NEAR(r.p_value, boost_sf(r.statistic, r.df), 1e-8);
  }
}

TEST(ChiSquared, InvariantUnderPermutationAndGroupSwap) {
  const auto base = chi_squared(dalle());
  auto swapped = dalle();
  std::swap(swapped.counts[0], swapped.counts[1]);
  std::swap(swapped.groups[0], swapped.groups[1]);
  EXPECT_NEAR(chi_squared(swapped).statistic, base.statistic, 1e-9);

  auto permuted = dalle();
  std::mt19937 rng(4);
  std::vector<std::size_t> order(permuted.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  ContingencyTable p = ContingencyTable::zeros({}, permuted.groups);
  for (auto i : order) {
    p.categories.push_back(permuted.categories[i]);
    p.counts[0].push_back(permuted.counts[0][i]);
    p.counts[1].push_back(permuted.counts[1][i]);
  }
  EXPECT_NEAR(chi_squared(p).statistic, base.statistic, 1e-9);
  EXPECT_EQ(chi_squared(p).df, base.df);
}

TEST(ChiSquared, ProportionalGroupsGiveZero) {
  const auto r = chi_squared(make({"a", "b", "c"}, {10, 20, 30}, {20, 40, 60}));
  EXPECT_NEAR(r.statistic, 0.0, 1e-12);
  EXPECT_NEAR(r.p_value, 1.0, 1e-12);
}

TEST(ChiSquared, ScalingCountsScalesStatistic) {
  auto doubled = dalle();
  for (auto& row : doubled.counts)
    for (auto& c : row) c *= 2;
  EXPECT_NEAR(chi_squared(doubled).statistic, 2 * chi_squared(dalle()).statistic, 1e-9);
}

TEST(Variant, IdsAndDescriptions) {
  const auto all = AnalysisVariant::standard();
  ASSERT_EQ(all.size(), 4u);
  EXPECT_EQ(all[0].id(), "include-person/full");
  EXPECT_EQ(all[3].id(), "exclude-person/filtered");
  EXPECT_EQ(all[3].describe(9), "person=exclude,categories=filtered(min_total=9)");
  EXPECT_EQ(all[0].describe(9), "person=include,categories=all-nonzero");
  const auto v = AnalysisVariant::parse("exclude-person/filtered+yates+pooled");
  EXPECT_FALSE(v.include_person);
  EXPECT_TRUE(v.filtered);
  EXPECT_TRUE(v.options.yates);
  EXPECT_TRUE(v.options.pool_rare);
  EXPECT_EQ(AnalysisVariant::parse(v.id()).id(), v.id());
  EXPECT_THROW(AnalysisVariant::parse("include-person"), StatsError);
  EXPECT_THROW(AnalysisVariant::parse("include-person/full+magic"), StatsError);
}

TEST(Disparities, RankedByAbsoluteDelta) {
  const auto ranked = rank_disparities(sd());
  ASSERT_FALSE(ranked.empty());
  // person (482 vs 515) and tie (38 vs 5) tie on |delta|; label order breaks it.
  EXPECT_EQ(ranked[0].label, "person");
  EXPECT_EQ(ranked[0].delta, -33);
  EXPECT_EQ(ranked[1].label, "tie");
  EXPECT_EQ(ranked[1].delta, 33);
  for (std::size_t i = 1; i < ranked.size(); ++i) {
    EXPECT_GE(std::abs(ranked[i - 1].delta), std::abs(ranked[i].delta));
  }
}
