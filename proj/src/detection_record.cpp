#include "biasprobe/detection_record.hpp"

namespace biasprobe {

using nlohmann::json;

std::string InstanceKey::str() const {
  return std::to_string(template_id) + "_" + std::to_string(pair_id) + "_" + group + "_" +
         std::to_string(replicate);
}

void to_json(json& j, const InstanceKey& k) {
  j = json{{"template_id", k.template_id},
           {"pair_id", k.pair_id},
           {"group", k.group},
           {"replicate", k.replicate}};
}

void from_json(const json& j, InstanceKey& k) {
  j.at("template_id").get_to(k.template_id);
  j.at("pair_id").get_to(k.pair_id);
  j.at("group").get_to(k.group);
  j.at("replicate").get_to(k.replicate);
}

void to_json(json& j, const DetectionRecord& r) {
  j = json{{"v", kProtocolVersion}, {"key", r.key}, {"image", r.image_path}, {"detections", r.detections}};
}

void from_json(const json& j, DetectionRecord& r) {
  require_version(j);
  j.at("key").get_to(r.key);
  j.at("image").get_to(r.image_path);
  j.at("detections").get_to(r.detections);
}

}  // namespace biasprobe
