#include <gtest/gtest.h>

#include <map>

#include "biasprobe/mock_backend.hpp"
#include "biasprobe/mock_image.hpp"
#include "biasprobe/rng.hpp"
#include "biasprobe/vocabulary.hpp"

using namespace biasprobe;

namespace {

GenerateRequest request_for(std::uint64_t seed, const std::string& group) {
  GenerateRequest r{"prompt", seed, {64, 64, 1, 0.0}, RequestMetadata{group, 0, 0, 0}, std::nullopt};
  return r;
}

}  // namespace

TEST(LabelDistribution, RejectsUnnormalized) {
  EXPECT_THROW(LabelDistribution({{"tie", 0.5}, {"cup", 0.4}}), std::invalid_argument);
  EXPECT_THROW(LabelDistribution({{"tie", 1.5}, {"cup", -0.5}}), std::invalid_argument);
  EXPECT_NO_THROW(LabelDistribution({{"tie", 0.5}, {"cup", 0.5 + 5e-10}}));
  EXPECT_THROW(LabelDistribution::from_weights({{"tie", 0.0}}), std::invalid_argument);
}

TEST(LabelDistribution, CopiesSampleIdentically) {
  const auto original = LabelDistribution::from_weights({{"a", 1}, {"b", 2}, {"c", 3}});
  const auto copy = original;
  SplitMix64 r1(5), r2(5);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(original.sample(r1), copy.sample(r2));
}

TEST(LabelDistribution, FrequenciesFollowWeights) {
  const auto d = LabelDistribution::from_weights({{"a", 1}, {"b", 3}});
  SplitMix64 rng(11);
  int b = 0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) b += d.sample(rng) == "b";
  EXPECT_NEAR(static_cast<double>(b) / n, 0.75, 0.01);
}

TEST(MockSampling, PureFunctionOfSeedAndGroup) {
  const auto cfg = null_mock_config();
  EXPECT_EQ(sample_mock_objects(3, "male", cfg), sample_mock_objects(3, "male", cfg));
  bool differs = false;
  for (std::uint64_t s = 0; s < 20 && !differs; ++s) {
    differs = sample_mock_objects(s, "male", cfg) != sample_mock_objects(s, "female", cfg);
  }
  EXPECT_TRUE(differs);
  EXPECT_THROW(sample_mock_objects(1, "nonbinary", cfg), BackendError);
}

TEST(MockSampling, ObjectCountAndConfidenceRanges) {
  const auto cfg = null_mock_config();
  const auto vocab = DetectorVocabulary::coco80();
  for (std::uint64_t s = 0; s < 500; ++s) {
    const auto objs = sample_mock_objects(s, "female", cfg);
    EXPECT_LE(objs.size(), 3u);
    for (const auto& o : objs) {
      EXPECT_TRUE(vocab.contains(o.label)) << o.label;
      EXPECT_GE(o.confidence, 0.6);
      EXPECT_LE(o.confidence, 0.99);
      EXPECT_LE(o.bbox.x + o.bbox.w, 1.0);
      EXPECT_LE(o.bbox.y + o.bbox.h, 1.0);
    }
  }
}

TEST(MockPresets, NullIsSymmetricBiasedSkewsTie) {
  const auto null_cfg = null_mock_config();
  EXPECT_EQ(null_cfg.group_distributions.at("male").probabilities(),
            null_cfg.group_distributions.at("female").probabilities());
  const auto biased = biased_mock_config();
  const auto& m = biased.group_distributions.at("male").probabilities();
  const auto& f = biased.group_distributions.at("female").probabilities();
  EXPECT_NEAR(m.at("tie") / f.at("tie"), 38.0 / 5.0, 1e-9);
}

TEST(MockGenerator, EmbedsObjectsAndDetectorRecoversThem) {
  const auto cfg = null_mock_config();
  MockGenerator gen(cfg);
  MockDetector det(DetectorVocabulary::coco80());
  const auto response = gen.generate(request_for(17, "male"));
  const auto img = decode_png(response.image.bytes());
  EXPECT_EQ(img.width, 64);
  const auto all = det.detect(response.image, 0.0);
  EXPECT_EQ(all, sample_mock_objects(17, "male", cfg));
  for (const auto& d : det.detect(response.image, 0.9)) EXPECT_GE(d.confidence, 0.9);
}

TEST(MockGenerator, ThresholdIsMonotone) {
  MockGenerator gen(null_mock_config());
  MockDetector det(DetectorVocabulary::coco80());
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto image = gen.generate(request_for(s, "female")).image;
    std::size_t prev = SIZE_MAX;
    for (double t : {0.0, 0.5, 0.7, 0.9, 1.0}) {
      const auto n = det.detect(image, t).size();
      EXPECT_LE(n, prev);
      prev = n;
    }
  }
}

TEST(MockGenerator, RequiresMetadata) {
  MockGenerator gen(null_mock_config());
  auto r = request_for(1, "male");
  r.metadata.reset();
  EXPECT_THROW(gen.generate(r), BackendError);
}

TEST(MockDetector, RejectsUnknownLabelsInPayload) {
  auto labels = DetectorVocabulary::coco80().labels();
  labels[0] = "human";
  MockDetector det{DetectorVocabulary(labels)};
  MockConfig cfg;
  cfg.group_distributions["male"] = LabelDistribution({{"person", 1.0}});
  cfg.min_objects = 1;
  MockGenerator gen(cfg);
  const auto image = gen.generate(request_for(2, "male")).image;
  EXPECT_THROW(det.detect(image, 0.0), ProtocolViolation);
}

TEST(MockDetector, ForeignAndBrokenImages) {
  MockDetector det(DetectorVocabulary::coco80());
  const auto png = encode_mock_png(8, 8, "{}");
  EXPECT_THROW(det.detect(ImageRef::from_bytes(png), 0.5), ProtocolViolation);
  EXPECT_THROW(det.detect(ImageRef::from_bytes({1, 2, 3}), 0.5), BackendError);
}

TEST(MockDescriptors, ReportKindAndVocabulary) {
  MockGenerator gen(null_mock_config());
  MockDetector det(DetectorVocabulary::coco80());
  EXPECT_EQ(gen.health().kind, BackendKind::generator);
  EXPECT_TRUE(gen.health().deterministic);
  EXPECT_EQ(det.health().kind, BackendKind::detector);
  EXPECT_EQ(det.health().vocabulary_hash, DetectorVocabulary::coco80().hash());
}
