#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace biasprobe {

class DetectorVocabulary;

inline constexpr int kProtocolVersion = 1;

// Failure talking to a backend. Retryable errors (transport failures,
// timeouts, 5xx) may be retried by the pipeline; the rest fail the job.
class BackendError : public std::runtime_error {
 public:
  BackendError(const std::string& what, bool retryable)
      : std::runtime_error(what), retryable_(retryable) {}
  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

// The backend sent something the protocol forbids (wrong version, unknown
// label, out-of-range confidence). Never retried, never coerced.
class ProtocolViolation : public BackendError {
 public:
  explicit ProtocolViolation(const std::string& what) : BackendError(what, false) {}
};

struct GenerationParams {
  int width = 512;
  int height = 512;
  int steps = 30;
  double guidance = 7.5;

  bool operator==(const GenerationParams&) const = default;
};

// Side channel describing which plan instance a request belongs to. Real
// generators ignore it; the mock generator reads the group from it.
struct RequestMetadata {
  std::string group;
  int template_id = 0;
  int pair_id = 0;
  int replicate = 0;
};

struct GenerateRequest {
  std::string prompt;
  std::uint64_t seed = 0;
  GenerationParams params;
  std::optional<RequestMetadata> metadata;
  // When set, a local backend writes the image here and answers by path.
  std::optional<std::string> output_path;
};

// Throws std::invalid_argument if sizes are not positive multiples of 8 or steps < 1.
void validate(const GenerateRequest& request);

// An image either on the shared filesystem or carried inline.
struct ImageRef {
  std::string format = "png";
  std::optional<std::filesystem::path> path;
  std::vector<std::uint8_t> data;

  static ImageRef from_path(std::filesystem::path p);
  static ImageRef from_bytes(std::vector<std::uint8_t> bytes);

  // Reads from disk for path refs. Throws BackendError (non-retryable) when unreadable.
  std::vector<std::uint8_t> bytes() const;
};

struct GenerateResponse {
  ImageRef image;
  std::string backend_id;
  std::int64_t elapsed_ms = 0;
};

// Normalized box, each component in [0, 1].
struct BoundingBox {
  double x = 0, y = 0, w = 0, h = 0;
  bool operator==(const BoundingBox&) const = default;
};

struct Detection {
  std::string label;
  double confidence = 0;
  BoundingBox bbox;
  bool operator==(const Detection&) const = default;
};

enum class BackendKind { generator, detector };

std::string to_string(BackendKind kind);
BackendKind backend_kind_from_string(const std::string& s);

struct BackendDescriptor {
  std::string id;
  BackendKind kind = BackendKind::generator;
  bool deterministic = true;
  std::string vocabulary_hash;  // detectors only
};

// Throws ProtocolViolation naming the first offending field or label.
void validate_detection(const Detection& d, const DetectorVocabulary& vocabulary);

// Validates every detection and confirms the threshold was honoured.
void check_detections(const std::vector<Detection>& detections,
                      const DetectorVocabulary& vocabulary, double threshold);

// Throws BackendError (non-retryable) on kind mismatch.
void require_kind(const BackendDescriptor& descriptor, BackendKind expected);

class GeneratorBackend {
 public:
  virtual ~GeneratorBackend() = default;
  virtual BackendDescriptor health() = 0;
  virtual GenerateResponse generate(const GenerateRequest& request) = 0;
};

class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;
  virtual BackendDescriptor health() = 0;
  // Every returned detection has confidence >= threshold and a vocabulary label.
  virtual std::vector<Detection> detect(const ImageRef& image, double threshold) = 0;
};

// JSON field mapping for the wire protocol. Every body carries "v": 1.
void to_json(nlohmann::json& j, const GenerationParams& p);
void to_json(nlohmann::json& j, const RequestMetadata& m);
void from_json(const nlohmann::json& j, RequestMetadata& m);
void to_json(nlohmann::json& j, const GenerateRequest& r);
void from_json(const nlohmann::json& j, GenerateRequest& r);
void to_json(nlohmann::json& j, const ImageRef& r);
void from_json(const nlohmann::json& j, ImageRef& r);
void to_json(nlohmann::json& j, const GenerateResponse& r);
void from_json(const nlohmann::json& j, GenerateResponse& r);
void to_json(nlohmann::json& j, const Detection& d);
void from_json(const nlohmann::json& j, Detection& d);
void to_json(nlohmann::json& j, const BackendDescriptor& d);
void from_json(const nlohmann::json& j, BackendDescriptor& d);

// Throws ProtocolViolation unless body["v"] == kProtocolVersion.
void require_version(const nlohmann::json& body);

}  // namespace biasprobe
