#include "biasprobe/vocabulary.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "biasprobe/digest.hpp"

namespace biasprobe {

namespace embedded {
extern const std::string_view kDefaultVocabulary;
}

DetectorVocabulary::DetectorVocabulary(std::vector<std::string> labels)
    : labels_(std::move(labels)) {
  if (labels_.empty()) throw std::invalid_argument("detector vocabulary is empty");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i].empty()) throw std::invalid_argument("detector vocabulary has an empty label");
    if (labels_[i].find(',') != std::string::npos) {
      throw std::invalid_argument("detector label contains a comma: '" + labels_[i] + "'");
    }
    if (!index_.emplace(labels_[i], i).second) {
      throw std::invalid_argument("duplicate detector label '" + labels_[i] + "'");
    }
  }
}

DetectorVocabulary DetectorVocabulary::parse(std::string_view text) {
  std::vector<std::string> labels;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    labels.push_back(line);
  }
  return DetectorVocabulary(std::move(labels));
}

DetectorVocabulary DetectorVocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot read vocabulary file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

DetectorVocabulary DetectorVocabulary::coco80() { return parse(embedded::kDefaultVocabulary); }

bool DetectorVocabulary::contains(std::string_view label) const {
  return index_.find(std::string(label)) != index_.end();
}

std::size_t DetectorVocabulary::index_of(std::string_view label) const {
  const auto it = index_.find(std::string(label));
  if (it == index_.end()) throw std::out_of_range("label not in vocabulary: '" + std::string(label) + "'");
  return it->second;
}

std::string DetectorVocabulary::hash() const {
  std::string canon;
  for (const auto& l : labels_) {
    canon += l;
    canon += '\n';
  }
  return sha256_hex(canon);
}

}  // namespace biasprobe
