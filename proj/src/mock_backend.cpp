#include "biasprobe/mock_backend.hpp"

#include <chrono>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "biasprobe/mock_image.hpp"
#include "biasprobe/rng.hpp"

namespace biasprobe {

using nlohmann::json;

namespace {

constexpr double kNormalizationTolerance = 1e-9;

const std::map<std::string, double>& pooled_reference_weights() {
  static const std::map<std::string, double> weights{
      {"person", 997}, {"cell phone", 64}, {"tie", 43},  {"book", 41},
      {"handbag", 32}, {"sports ball", 27}, {"car", 23}, {"clock", 22},
  };
  return weights;
}

}  // namespace

LabelDistribution::LabelDistribution(const std::map<std::string, double>& probabilities)
    : probabilities_(probabilities) {
  if (probabilities_.empty()) throw std::invalid_argument("label distribution is empty");
  double total = 0;
  for (const auto& [label, p] : probabilities_) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument("negative or non-finite probability for '" + label + "'");
    }
    total += p;
    labels_.push_back(label);
    cumulative_.push_back(total);
  }
  if (std::abs(total - 1.0) > kNormalizationTolerance) {
    throw std::invalid_argument("label distribution sums to " + std::to_string(total) +
                                ", expected 1 within 1e-9");
  }
}

LabelDistribution LabelDistribution::from_weights(const std::map<std::string, double>& weights) {
  double total = 0;
  for (const auto& [label, w] : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("negative or non-finite weight for '" + label + "'");
    }
    total += w;
  }
  if (!(total > 0)) throw std::invalid_argument("label weights are all zero");
  std::map<std::string, double> probs;
  for (const auto& [label, w] : weights) probs[label] = w / total;
  return LabelDistribution(probs);
}

const std::string& LabelDistribution::sample(SplitMix64& rng) const {
  if (labels_.empty()) throw std::logic_error("sampling from an empty distribution");
  const double u = rng.uniform() * cumulative_.back();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()),
                                         labels_.size() - 1);
  return labels_[idx];
}

MockConfig null_mock_config(const std::string& group_a, const std::string& group_b) {
  MockConfig config;
  const auto dist = LabelDistribution::from_weights(pooled_reference_weights());
  config.group_distributions[group_a] = dist;
  config.group_distributions[group_b] = dist;
  return config;
}

MockConfig biased_mock_config(const std::string& group_a, const std::string& group_b) {
  constexpr double kTieRatio = 38.0 / 5.0;
  auto config = null_mock_config(group_a, group_b);
  auto weights = pooled_reference_weights();
  double total = 0;
  for (const auto& [label, w] : weights) total += w;
  const double tie = weights.at("tie");
  // Scale k solves k*total / (total - tie + k*tie) = kTieRatio.
  const double k = kTieRatio * (total - tie) / (total - kTieRatio * tie);
  weights["tie"] = tie * k;
  config.group_distributions[group_a] = LabelDistribution::from_weights(weights);
  return config;
}

std::vector<Detection> sample_mock_objects(std::uint64_t seed, const std::string& group,
                                           const MockConfig& config) {
  const auto it = config.group_distributions.find(group);
  if (it == config.group_distributions.end()) {
    throw BackendError("mock generator has no distribution for group '" + group + "'", false);
  }
  if (config.min_objects < 0 || config.max_objects < config.min_objects) {
    throw std::invalid_argument("mock objects_per_image range is invalid");
  }
  SplitMix64 rng(mix64(seed ^ fnv1a64(group)));
  const auto n = rng.uniform_int(static_cast<std::uint64_t>(config.min_objects),
                                 static_cast<std::uint64_t>(config.max_objects));
  std::vector<Detection> objects;
  objects.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    Detection d;
    d.label = it->second.sample(rng);
    d.confidence = config.min_confidence + (config.max_confidence - config.min_confidence) * rng.uniform();
    d.bbox.w = 0.05 + 0.45 * rng.uniform();
    d.bbox.h = 0.05 + 0.45 * rng.uniform();
    d.bbox.x = rng.uniform() * (1.0 - d.bbox.w);
    d.bbox.y = rng.uniform() * (1.0 - d.bbox.h);
    objects.push_back(std::move(d));
  }
  return objects;
}

GenerateResponse mock_generate(const GenerateRequest& request, const MockConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  try {
    validate(request);
  } catch (const std::invalid_argument& e) {
    throw BackendError(e.what(), false);
  }
  if (!request.metadata) {
    throw BackendError("mock generator needs request metadata to infer the group", false);
  }
  const auto objects = sample_mock_objects(request.seed, request.metadata->group, config);
  const json payload{{"v", kProtocolVersion}, {"objects", objects}};
  auto png = encode_mock_png(request.params.width, request.params.height, payload.dump());

  GenerateResponse response;
  response.backend_id = "mock-generator";
  if (request.output_path) {
    const std::filesystem::path out(*request.output_path);
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    f.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
    if (!f) throw BackendError("mock generator cannot write " + out.string(), true);
    response.image = ImageRef::from_path(out);
  } else {
    response.image = ImageRef::from_bytes(std::move(png));
  }
  response.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - start)
                            .count();
  return response;
}

std::vector<Detection> mock_detect(const ImageRef& image, double threshold,
                                   const DetectorVocabulary& vocabulary) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw BackendError("confidence threshold must lie in [0,1]", false);
  }
  DecodedImage decoded;
  try {
    decoded = decode_png(image.bytes());
  } catch (const ImageDecodeError& e) {
    throw BackendError(std::string("undecodable image: ") + e.what(), false);
  }
  if (!decoded.mock_payload) return {};  // nothing recognizable

  std::vector<Detection> objects;
  try {
    const auto payload = json::parse(*decoded.mock_payload);
    require_version(payload);
    objects = payload.at("objects").get<std::vector<Detection>>();
  } catch (const json::exception& e) {
    throw ProtocolViolation(std::string("malformed mock payload: ") + e.what());
  }
  std::vector<Detection> kept;
  for (auto& d : objects) {
    validate_detection(d, vocabulary);
    if (d.confidence >= threshold) kept.push_back(std::move(d));
  }
  return kept;
}

MockGenerator::MockGenerator(MockConfig config, std::string id)
    : config_(std::move(config)), id_(std::move(id)) {}

BackendDescriptor MockGenerator::health() {
  return {id_, BackendKind::generator, config_.deterministic, {}};
}

GenerateResponse MockGenerator::generate(const GenerateRequest& request) {
  auto response = mock_generate(request, config_);
  response.backend_id = id_;
  return response;
}

MockDetector::MockDetector(DetectorVocabulary vocabulary, std::string id)
    : vocabulary_(std::move(vocabulary)), id_(std::move(id)) {}

BackendDescriptor MockDetector::health() {
  return {id_, BackendKind::detector, true, vocabulary_.hash()};
}

std::vector<Detection> MockDetector::detect(const ImageRef& image, double threshold) {
  return mock_detect(image, threshold, vocabulary_);
}

}  // namespace biasprobe
