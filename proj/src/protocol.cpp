#include "biasprobe/protocol.hpp"

#include <fstream>
#include <iterator>

#include "biasprobe/digest.hpp"
#include "biasprobe/vocabulary.hpp"

namespace biasprobe {

using nlohmann::json;

void validate(const GenerateRequest& r) {
  const auto& p = r.params;
  if (p.width <= 0 || p.height <= 0 || p.width % 8 != 0 || p.height % 8 != 0) {
    throw std::invalid_argument("image size must be positive multiples of 8, got " +
                                std::to_string(p.width) + "x" + std::to_string(p.height));
  }
  if (p.steps < 1) throw std::invalid_argument("steps must be >= 1");
}

ImageRef ImageRef::from_path(std::filesystem::path p) {
  ImageRef r;
  r.path = std::move(p);
  return r;
}

ImageRef ImageRef::from_bytes(std::vector<std::uint8_t> bytes) {
  ImageRef r;
  r.data = std::move(bytes);
  return r;
}

std::vector<std::uint8_t> ImageRef::bytes() const {
  if (!path) return data;
  std::ifstream in(*path, std::ios::binary);
  if (!in) throw BackendError("cannot read image " + path->string(), false);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string to_string(BackendKind kind) {
  return kind == BackendKind::generator ? "generator" : "detector";
}

BackendKind backend_kind_from_string(const std::string& s) {
  if (s == "generator") return BackendKind::generator;
  if (s == "detector") return BackendKind::detector;
  throw ProtocolViolation("unknown backend kind '" + s + "'");
}

void validate_detection(const Detection& d, const DetectorVocabulary& vocabulary) {
  if (!vocabulary.contains(d.label)) {
    throw ProtocolViolation("detector returned label outside the vocabulary: '" + d.label + "'");
  }
  if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
    throw ProtocolViolation("confidence out of [0,1] for '" + d.label + "'");
  }
  const auto& b = d.bbox;
  const bool in_unit = b.x >= 0 && b.y >= 0 && b.w >= 0 && b.h >= 0 && b.x <= 1 && b.y <= 1 &&
                       b.w <= 1 && b.h <= 1;
  if (!in_unit) throw ProtocolViolation("bbox outside the unit square for '" + d.label + "'");
}

void check_detections(const std::vector<Detection>& detections,
                      const DetectorVocabulary& vocabulary, double threshold) {
  for (const auto& d : detections) {
    validate_detection(d, vocabulary);
    if (d.confidence < threshold) {
      throw ProtocolViolation("detector returned '" + d.label + "' below the requested threshold");
    }
  }
}

void require_kind(const BackendDescriptor& descriptor, BackendKind expected) {
  if (descriptor.kind != expected) {
    throw BackendError("backend '" + descriptor.id + "' is a " + to_string(descriptor.kind) +
                           ", expected a " + to_string(expected),
                       false);
  }
}

void require_version(const json& body) {
  if (!body.is_object() || !body.contains("v") || body["v"] != kProtocolVersion) {
    throw ProtocolViolation("missing or unsupported protocol version (expected \"v\": 1)");
  }
}

void to_json(json& j, const GenerationParams& p) {
  j = json{{"width", p.width}, {"height", p.height}, {"steps", p.steps}, {"guidance", p.guidance}};
}

void to_json(json& j, const RequestMetadata& m) {
  j = json{{"group", m.group},
           {"template_id", m.template_id},
           {"pair_id", m.pair_id},
           {"replicate", m.replicate}};
}

void from_json(const json& j, RequestMetadata& m) {
  j.at("group").get_to(m.group);
  m.template_id = j.value("template_id", 0);
  m.pair_id = j.value("pair_id", 0);
  m.replicate = j.value("replicate", 0);
}

void to_json(json& j, const GenerateRequest& r) {
  j = json{{"v", kProtocolVersion}, {"prompt", r.prompt}, {"seed", r.seed}};
  j["width"] = r.params.width;
  j["height"] = r.params.height;
  j["steps"] = r.params.steps;
  j["guidance"] = r.params.guidance;
  if (r.metadata) j["metadata"] = *r.metadata;
  if (r.output_path) j["output_path"] = *r.output_path;
}

void from_json(const json& j, GenerateRequest& r) {
  require_version(j);
  j.at("prompt").get_to(r.prompt);
  j.at("seed").get_to(r.seed);
  j.at("width").get_to(r.params.width);
  j.at("height").get_to(r.params.height);
  j.at("steps").get_to(r.params.steps);
  j.at("guidance").get_to(r.params.guidance);
  if (j.contains("metadata")) r.metadata = j["metadata"].get<RequestMetadata>();
  if (j.contains("output_path")) r.output_path = j["output_path"].get<std::string>();
}

void to_json(json& j, const ImageRef& r) {
  j = json{{"format", r.format}};
  if (r.path) {
    j["path"] = r.path->string();
  } else {
    j["data"] = base64_encode(r.data);
  }
}

void from_json(const json& j, ImageRef& r) {
  j.at("format").get_to(r.format);
  if (j.contains("path")) {
    r.path = j["path"].get<std::string>();
  } else if (j.contains("data")) {
    try {
      r.data = base64_decode(j["data"].get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ProtocolViolation(std::string("inline image: ") + e.what());
    }
  } else {
    throw ProtocolViolation("image reference has neither \"path\" nor \"data\"");
  }
}

void to_json(json& j, const GenerateResponse& r) {
  j = json{{"v", kProtocolVersion},
           {"image", r.image},
           {"backend_id", r.backend_id},
           {"elapsed_ms", r.elapsed_ms}};
}

void from_json(const json& j, GenerateResponse& r) {
  require_version(j);
  j.at("image").get_to(r.image);
  j.at("backend_id").get_to(r.backend_id);
  r.elapsed_ms = j.value("elapsed_ms", std::int64_t{0});
}

void to_json(json& j, const Detection& d) {
  j = json{{"label", d.label},
           {"confidence", d.confidence},
           {"bbox", {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h}}};
}

void from_json(const json& j, Detection& d) {
  j.at("label").get_to(d.label);
  j.at("confidence").get_to(d.confidence);
  const auto& b = j.at("bbox");
  if (!b.is_array() || b.size() != 4) throw ProtocolViolation("bbox must be [x, y, w, h]");
  d.bbox = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
}

void to_json(json& j, const BackendDescriptor& d) {
  j = json{{"v", kProtocolVersion},
           {"id", d.id},
           {"kind", to_string(d.kind)},
           {"deterministic", d.deterministic}};
  if (d.kind == BackendKind::detector) j["vocabulary_hash"] = d.vocabulary_hash;
}

void from_json(const json& j, BackendDescriptor& d) {
  require_version(j);
  j.at("id").get_to(d.id);
  d.kind = backend_kind_from_string(j.at("kind").get<std::string>());
  d.deterministic = j.value("deterministic", false);
  d.vocabulary_hash = j.value("vocabulary_hash", std::string{});
}

}  // namespace biasprobe
