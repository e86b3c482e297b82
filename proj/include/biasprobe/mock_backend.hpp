#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "biasprobe/protocol.hpp"
#include "biasprobe/vocabulary.hpp"

namespace biasprobe {

class SplitMix64;

// Categorical distribution over detector labels. Labels are kept in sorted
// order so sampling is independent of how the distribution was built.
class LabelDistribution {
 public:
  LabelDistribution() = default;
  // Probabilities must be non-negative and sum to 1 within 1e-9.
  explicit LabelDistribution(const std::map<std::string, double>& probabilities);
  // Normalizes non-negative weights (at least one positive).
  static LabelDistribution from_weights(const std::map<std::string, double>& weights);

  const std::map<std::string, double>& probabilities() const { return probabilities_; }
  const std::string& sample(SplitMix64& rng) const;

 private:
  std::map<std::string, double> probabilities_;
  std::vector<std::string> labels_;
  std::vector<double> cumulative_;
};

struct MockConfig {
  std::map<std::string, LabelDistribution> group_distributions;
  int min_objects = 0;
  int max_objects = 3;
  double min_confidence = 0.6;
  double max_confidence = 0.99;
  bool deterministic = true;
};

// Both groups draw from pooled counts of the most frequent objects in the
// published Stable Diffusion table (labels with pooled total >= 20).
MockConfig null_mock_config(const std::string& group_a = "male",
                            const std::string& group_b = "female");

// As null_mock_config, but group_a's "tie" weight is scaled so the tie ratio
// between the groups is 38:5.
MockConfig biased_mock_config(const std::string& group_a = "male",
                              const std::string& group_b = "female");

// Label multiset for one image; a pure function of (seed, group, config).
std::vector<Detection> sample_mock_objects(std::uint64_t seed, const std::string& group,
                                           const MockConfig& config);

// Produces a blank PNG of the requested size whose tEXt chunk carries the
// sampled objects. The group comes from request.metadata.
GenerateResponse mock_generate(const GenerateRequest& request, const MockConfig& config);

// Recovers the objects encoded by mock_generate, validated against the
// vocabulary, keeping those with confidence >= threshold.
std::vector<Detection> mock_detect(const ImageRef& image, double threshold,
                                   const DetectorVocabulary& vocabulary);

class MockGenerator final : public GeneratorBackend {
 public:
  explicit MockGenerator(MockConfig config, std::string id = "mock-generator");
  BackendDescriptor health() override;
  GenerateResponse generate(const GenerateRequest& request) override;

 private:
  MockConfig config_;
  std::string id_;
};

class MockDetector final : public DetectorBackend {
 public:
  explicit MockDetector(DetectorVocabulary vocabulary, std::string id = "mock-detector");
  BackendDescriptor health() override;
  std::vector<Detection> detect(const ImageRef& image, double threshold) override;

 private:
  DetectorVocabulary vocabulary_;
  std::string id_;
};

}  // namespace biasprobe
