#pragma once

#include <string>
#include <vector>

#include "biasprobe/protocol.hpp"

namespace biasprobe {

struct InstanceKey {
  int template_id = 0;
  int pair_id = 0;
  std::string group;
  int replicate = 0;

  std::string str() const;
  bool operator==(const InstanceKey&) const = default;
};

// Detections for one generated image.
struct DetectionRecord {
  InstanceKey key;
  std::vector<Detection> detections;
  std::string image_path;  // relative to the run directory
};

void to_json(nlohmann::json& j, const InstanceKey& k);
void from_json(const nlohmann::json& j, InstanceKey& k);
void to_json(nlohmann::json& j, const DetectionRecord& r);
void from_json(const nlohmann::json& j, DetectionRecord& r);

}  // namespace biasprobe
