#include "biasprobe/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "biasprobe/http_backend.hpp"
#include "toml.hpp"

namespace biasprobe {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ConfigError("config: " + msg); }

void reject_unknown(const toml::table& t, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [k, v] : t) {
    if (known.count(std::string(k.str())) == 0) fail("unknown key '" + std::string(k.str()) + "' in " + where);
  }
}

template <class T>
std::optional<T> get(const toml::table& t, std::string_view key, const std::string& where) {
  const auto* node = t.get(key);
  if (node == nullptr) return std::nullopt;
  if constexpr (std::is_same_v<T, double>) {
    if (const auto v = node->value<double>()) return *v;  // integers convert too
  } else if constexpr (std::is_same_v<T, std::int64_t>) {
    if (node->is_integer()) return node->as_integer()->get();
  } else if constexpr (std::is_same_v<T, bool>) {
    if (node->is_boolean()) return node->as_boolean()->get();
  } else {
    if (node->is_string()) return node->as_string()->get();
  }
  fail("'" + std::string(key) + "' in " + where + " has the wrong type");
}

std::vector<std::string> string_array(const toml::table& t, std::string_view key, const std::string& where) {
  std::vector<std::string> out;
  const auto* node = t.get(key);
  if (node == nullptr) return out;
  const auto* arr = node->as_array();
  if (arr == nullptr) fail("'" + std::string(key) + "' in " + where + " must be an array of strings");
  for (const auto& el : *arr) {
    if (!el.is_string()) fail("'" + std::string(key) + "' in " + where + " must be an array of strings");
    out.push_back(el.as_string()->get());
  }
  return out;
}

std::vector<double> number_array(const toml::table& t, std::string_view key, const std::string& where) {
  std::vector<double> out;
  const auto* node = t.get(key);
  if (node == nullptr) return out;
  const auto* arr = node->as_array();
  if (arr == nullptr) fail("'" + std::string(key) + "' in " + where + " must be an array of numbers");
  for (const auto& el : *arr) {
    const auto v = el.value<double>();
    if (!v) fail("'" + std::string(key) + "' in " + where + " must be an array of numbers");
    out.push_back(*v);
  }
  return out;
}

const toml::table* subtable(const toml::table& t, std::string_view key) {
  const auto* node = t.get(key);
  if (node == nullptr) return nullptr;
  if (!node->is_table()) fail("'" + std::string(key) + "' must be a table");
  return node->as_table();
}

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) fail(what + " must be an unsigned 64-bit integer, got '" + s + "'");
  return v;
}

int to_int(std::int64_t v, const std::string& what) {
  if (v < INT32_MIN || v > INT32_MAX) fail(what + " is out of range");
  return static_cast<int>(v);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

template <class T>
T parse_number(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    T v{};
    if constexpr (std::is_same_v<T, double>) {
      v = std::stod(s, &used);
    } else {
      v = static_cast<T>(std::stoll(s, &used));
    }
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(what + " is not a valid number: '" + s + "'");
  }
}

}  // namespace

RunConfig parse_config(std::string_view toml_text, const std::filesystem::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "TOML parse error at line " << e.source().begin.line << ": " << e.description();
    fail(msg.str());
  }
  reject_unknown(root,
                 {"templates", "vocabulary", "replicates", "experiment_seed", "output_dir",
                  "confidence_threshold", "concurrency", "max_failure_fraction", "variants", "pairs",
                  "generator", "detector", "generation", "filter", "retry", "mock", "report"},
                 "top level");

  RunConfig c;
  const std::string top = "top level";
  if (auto v = get<std::string>(root, "templates", top)) c.templates = resolve(base_dir, *v);
  if (auto v = get<std::string>(root, "vocabulary", top)) c.vocabulary = resolve(base_dir, *v);
  if (auto v = get<std::int64_t>(root, "replicates", top)) c.replicates = to_int(*v, "replicates");
  if (const auto* node = root.get("experiment_seed")) {
    if (node->is_integer()) {
      const auto v = node->as_integer()->get();
      if (v < 0) fail("experiment_seed must be non-negative (use a string for values >= 2^63)");
      c.experiment_seed = static_cast<std::uint64_t>(v);
    } else if (node->is_string()) {
      c.experiment_seed = parse_u64(node->as_string()->get(), "experiment_seed");
    } else {
      fail("experiment_seed must be an integer or a decimal string");
    }
  }
  if (auto v = get<std::string>(root, "output_dir", top)) c.output_dir = resolve(base_dir, *v);
  if (auto v = get<double>(root, "confidence_threshold", top)) c.confidence_threshold = *v;
  if (auto v = get<std::int64_t>(root, "concurrency", top)) c.concurrency = to_int(*v, "concurrency");
  if (auto v = get<double>(root, "max_failure_fraction", top)) c.max_failure_fraction = *v;
  if (root.contains("variants")) c.variants = string_array(root, "variants", top);

  if (const auto* node = root.get("pairs")) {
    const auto* arr = node->as_array();
    if (arr == nullptr) fail("'pairs' must be an array of tables ([[pairs]])");
    c.pairs.clear();
    for (const auto& el : *arr) {
      const auto* t = el.as_table();
      if (t == nullptr) fail("'pairs' entries must be tables");
      const auto where = "pairs[" + std::to_string(c.pairs.size()) + "]";
      reject_unknown(*t, {"words", "groups"}, where);
      const auto words = string_array(*t, "words", where);
      const auto groups = string_array(*t, "groups", where);
      if (words.size() != 2 || groups.size() != 2) fail(where + " needs words = [a, b] and groups = [a, b]");
      c.pairs.push_back({static_cast<int>(c.pairs.size()), words[0], words[1], groups[0], groups[1]});
    }
  }

  for (const auto* role : {"generator", "detector"}) {
    if (const auto* t = subtable(root, role)) {
      reject_unknown(*t, {"endpoint"}, role);
      if (auto v = get<std::string>(*t, "endpoint", role)) {
        (std::string_view(role) == "generator" ? c.generator_endpoint : c.detector_endpoint) = *v;
      }
    }
  }

  if (const auto* t = subtable(root, "generation")) {
    reject_unknown(*t, {"width", "height", "steps", "guidance"}, "generation");
    if (auto v = get<std::int64_t>(*t, "width", "generation")) c.generation.width = to_int(*v, "width");
    if (auto v = get<std::int64_t>(*t, "height", "generation")) c.generation.height = to_int(*v, "height");
    if (auto v = get<std::int64_t>(*t, "steps", "generation")) c.generation.steps = to_int(*v, "steps");
    if (auto v = get<double>(*t, "guidance", "generation")) c.generation.guidance = *v;
  }

  if (const auto* t = subtable(root, "filter")) {
    reject_unknown(*t, {"min_total", "exclude", "per_group"}, "filter");
    if (auto v = get<std::int64_t>(*t, "min_total", "filter")) c.filter.min_total = *v;
    if (t->contains("exclude")) {
      const auto ex = string_array(*t, "exclude", "filter");
      c.filter.excluded_labels = {ex.begin(), ex.end()};
    }
    if (auto v = get<bool>(*t, "per_group", "filter")) c.filter.per_group = *v;
  }

  if (const auto* t = subtable(root, "retry")) {
    reject_unknown(*t, {"max_attempts", "backoff_seconds"}, "retry");
    if (auto v = get<std::int64_t>(*t, "max_attempts", "retry")) c.retry.max_attempts = to_int(*v, "max_attempts");
    if (t->contains("backoff_seconds")) c.retry.backoff_seconds = number_array(*t, "backoff_seconds", "retry");
  }

  if (const auto* t = subtable(root, "mock")) {
    reject_unknown(*t, {"preset", "objects_per_image", "confidence", "weights"}, "mock");
    if (auto v = get<std::string>(*t, "preset", "mock")) c.mock.preset = *v;
    if (t->contains("objects_per_image")) {
      const auto r = number_array(*t, "objects_per_image", "mock");
      if (r.size() != 2) fail("mock.objects_per_image must be [min, max]");
      c.mock.min_objects = static_cast<int>(r[0]);
      c.mock.max_objects = static_cast<int>(r[1]);
    }
    if (t->contains("confidence")) {
      const auto r = number_array(*t, "confidence", "mock");
      if (r.size() != 2) fail("mock.confidence must be [min, max]");
      c.mock.min_confidence = r[0];
      c.mock.max_confidence = r[1];
    }
    if (const auto* w = subtable(*t, "weights")) {
      for (const auto& [group, node] : *w) {
        const auto* gt = node.as_table();
        if (gt == nullptr) fail("mock.weights." + std::string(group.str()) + " must be a table");
        auto& dst = c.mock.weights[std::string(group.str())];
        for (const auto& [label, value] : *gt) {
          const auto x = value.value<double>();
          if (!x) fail("mock weight for '" + std::string(label.str()) + "' must be a number");
          dst[std::string(label.str())] = *x;
        }
      }
    }
  }

  if (const auto* t = subtable(root, "report")) {
    reject_unknown(*t, {"colors"}, "report");
    if (t->contains("colors")) {
      const auto colors = string_array(*t, "colors", "report");
      if (colors.size() != 2) fail("report.colors must list two colors");
      c.style = {colors[0], colors[1]};
    }
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::filesystem::absolute(path).parent_path());
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

void apply_env_overrides(RunConfig& c, const EnvLookup& env) {
  const auto var = [&](const char* field) { return env(std::string("BIASPROBE_") + field); };
  if (auto v = var("TEMPLATES")) c.templates = *v;
  if (auto v = var("VOCABULARY")) c.vocabulary = *v;
  if (auto v = var("REPLICATES")) c.replicates = parse_number<int>(*v, "BIASPROBE_REPLICATES");
  if (auto v = var("EXPERIMENT_SEED")) c.experiment_seed = parse_u64(*v, "BIASPROBE_EXPERIMENT_SEED");
  if (auto v = var("OUTPUT_DIR")) c.output_dir = *v;
  if (auto v = var("CONFIDENCE_THRESHOLD")) {
    c.confidence_threshold = parse_number<double>(*v, "BIASPROBE_CONFIDENCE_THRESHOLD");
  }
  if (auto v = var("CONCURRENCY")) c.concurrency = parse_number<int>(*v, "BIASPROBE_CONCURRENCY");
  if (auto v = var("MAX_FAILURE_FRACTION")) {
    c.max_failure_fraction = parse_number<double>(*v, "BIASPROBE_MAX_FAILURE_FRACTION");
  }
  if (auto v = var("GENERATOR_ENDPOINT")) c.generator_endpoint = *v;
  if (auto v = var("DETECTOR_ENDPOINT")) c.detector_endpoint = *v;
}

void validate(const RunConfig& c) {
  if (!c.templates.empty() && !std::filesystem::exists(c.templates)) {
    fail("template corpus not found: " + c.templates.string());
  }
  if (!c.vocabulary.empty() && !std::filesystem::exists(c.vocabulary)) {
    fail("vocabulary file not found: " + c.vocabulary.string());
  }
  if (c.replicates < 1) fail("replicates must be >= 1");
  if (c.concurrency < 1) fail("concurrency must be >= 1");
  if (!(c.confidence_threshold >= 0.0 && c.confidence_threshold <= 1.0)) {
    fail("confidence_threshold must lie in [0,1]");
  }
  if (!(c.max_failure_fraction >= 0.0 && c.max_failure_fraction <= 1.0)) {
    fail("max_failure_fraction must lie in [0,1]");
  }
  if (c.filter.min_total < 0) fail("filter.min_total must be >= 0");
  if (c.retry.max_attempts < 1) fail("retry.max_attempts must be >= 1");
  for (const double d : c.retry.backoff_seconds) {
    if (d < 0) fail("retry.backoff_seconds must be non-negative");
  }
  if (c.mock.preset != "null" && c.mock.preset != "biased") fail("mock.preset must be 'null' or 'biased'");
  if (c.mock.min_objects < 0 || c.mock.max_objects < c.mock.min_objects) fail("mock.objects_per_image is invalid");
  if (!(c.mock.min_confidence >= 0 && c.mock.min_confidence <= c.mock.max_confidence && c.mock.max_confidence <= 1)) {
    fail("mock.confidence must satisfy 0 <= min <= max <= 1");
  }
  for (const auto& [name, ep] : {std::pair{"generator", c.generator_endpoint}, {"detector", c.detector_endpoint}}) {
    try {
      Endpoint::parse(ep);
    } catch (const std::invalid_argument& e) {
      fail(std::string(name) + ": " + e.what());
    }
  }
  try {
    validate_pairs(c.pairs);
    validate(GenerateRequest{"", 0, c.generation, std::nullopt, std::nullopt});
    for (const auto& id : c.variants) AnalysisVariant::parse(id);
    mock_config(c);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
}

std::vector<PromptTemplate> load_corpus(const RunConfig& c) {
  return c.templates.empty() ? default_templates() : load_templates(c.templates);
}

DetectorVocabulary load_vocabulary(const RunConfig& c) {
  return c.vocabulary.empty() ? DetectorVocabulary::coco80() : DetectorVocabulary::load(c.vocabulary);
}

ExperimentPlan make_plan(const RunConfig& c) {
  return expand(load_corpus(c), c.pairs, c.replicates, c.experiment_seed);
}

RunSettings run_settings(const RunConfig& c) {
  return {c.generation, c.confidence_threshold, c.concurrency, c.retry};
}

AnalysisConfig analysis_config(const RunConfig& c) {
  AnalysisConfig a;
  a.filter = c.filter;
  a.max_failure_fraction = c.max_failure_fraction;
  if (!c.variants.empty()) {
    a.variants.clear();
    for (const auto& id : c.variants) a.variants.push_back(AnalysisVariant::parse(id));
  }
  return a;
}

MockConfig mock_config(const RunConfig& c) {
  const auto groups = validate_pairs(c.pairs);
  auto m = c.mock.preset == "biased" ? biased_mock_config(groups[0], groups[1])
                                     : null_mock_config(groups[0], groups[1]);
  for (const auto& [group, weights] : c.mock.weights) {
    m.group_distributions[group] = LabelDistribution::from_weights(weights);
  }
  m.min_objects = c.mock.min_objects;
  m.max_objects = c.mock.max_objects;
  m.min_confidence = c.mock.min_confidence;
  m.max_confidence = c.mock.max_confidence;
  return m;
}

json config_to_json(const RunConfig& c) {
  json pairs = json::array();
  for (const auto& p : c.pairs) {
    pairs.push_back({{"words", {p.word_a, p.word_b}}, {"groups", {p.group_a, p.group_b}}});
  }
  return json{{"templates", c.templates.string()},
              {"vocabulary", c.vocabulary.string()},
              {"replicates", c.replicates},
              {"experiment_seed", c.experiment_seed},
              {"output_dir", c.output_dir.string()},
              {"confidence_threshold", c.confidence_threshold},
              {"concurrency", c.concurrency},
              {"max_failure_fraction", c.max_failure_fraction},
              {"variants", c.variants},
              {"pairs", pairs},
              {"generator_endpoint", c.generator_endpoint},
              {"detector_endpoint", c.detector_endpoint},
              {"generation", c.generation},
              {"filter", c.filter},
              {"retry", {{"max_attempts", c.retry.max_attempts}, {"backoff_seconds", c.retry.backoff_seconds}}},
              {"mock",
               {{"preset", c.mock.preset},
                {"objects_per_image", {c.mock.min_objects, c.mock.max_objects}},
                {"confidence", {c.mock.min_confidence, c.mock.max_confidence}},
                {"weights", c.mock.weights}}},
              {"report", {{"colors", {c.style.color_a, c.style.color_b}}}}};
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  c.templates = j.at("templates").get<std::string>();
  c.vocabulary = j.at("vocabulary").get<std::string>();
  j.at("replicates").get_to(c.replicates);
  j.at("experiment_seed").get_to(c.experiment_seed);
  c.output_dir = j.at("output_dir").get<std::string>();
  j.at("confidence_threshold").get_to(c.confidence_threshold);
  j.at("concurrency").get_to(c.concurrency);
  j.at("max_failure_fraction").get_to(c.max_failure_fraction);
  j.at("variants").get_to(c.variants);
  c.pairs.clear();
  for (const auto& p : j.at("pairs")) {
    c.pairs.push_back({static_cast<int>(c.pairs.size()), p.at("words")[0].get<std::string>(),
                       p.at("words")[1].get<std::string>(), p.at("groups")[0].get<std::string>(),
                       p.at("groups")[1].get<std::string>()});
  }
  j.at("generator_endpoint").get_to(c.generator_endpoint);
  j.at("detector_endpoint").get_to(c.detector_endpoint);
  const auto& g = j.at("generation");
  c.generation = {g.at("width").get<int>(), g.at("height").get<int>(), g.at("steps").get<int>(),
                  g.at("guidance").get<double>()};
  j.at("filter").get_to(c.filter);
  j.at("retry").at("max_attempts").get_to(c.retry.max_attempts);
  j.at("retry").at("backoff_seconds").get_to(c.retry.backoff_seconds);
  const auto& m = j.at("mock");
  m.at("preset").get_to(c.mock.preset);
  c.mock.min_objects = m.at("objects_per_image")[0].get<int>();
  c.mock.max_objects = m.at("objects_per_image")[1].get<int>();
  c.mock.min_confidence = m.at("confidence")[0].get<double>();
  c.mock.max_confidence = m.at("confidence")[1].get<double>();
  m.at("weights").get_to(c.mock.weights);
  c.style = {j.at("report").at("colors")[0].get<std::string>(), j.at("report").at("colors")[1].get<std::string>()};
  return c;
}

}  // namespace biasprobe
