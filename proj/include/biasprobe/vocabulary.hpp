#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace biasprobe {

// Ordered detector label set. Lookup is by exact spelling; the legacy darknet
// names ("diningtable", "pottedplant", "tvmonitor", "motorbike") are kept.
class DetectorVocabulary {
 public:
  explicit DetectorVocabulary(std::vector<std::string> labels);

  static DetectorVocabulary parse(std::string_view text);
  static DetectorVocabulary load(const std::filesystem::path& path);
  // The 80-class COCO label file shipped with darknet YOLOv3.
  static DetectorVocabulary coco80();

  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  bool contains(std::string_view label) const;
  // Throws std::out_of_range for unknown labels.
  std::size_t index_of(std::string_view label) const;

  // SHA-256 over the labels joined with '\n' plus a trailing newline, i.e. the
  // digest of a canonical one-label-per-line file.
  std::string hash() const;

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace biasprobe
