#include "biasprobe/pipeline.hpp"

#include <atomic>
#include <ctime>
#include <fstream>
#include <sstream>
#include <thread>

#include "biasprobe/digest.hpp"
#include "biasprobe/mock_image.hpp"

namespace biasprobe {

using nlohmann::json;

namespace {

constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kJournalFile = "journal.ndjson";
constexpr const char* kImagesDir = "images";
constexpr const char* kDetectionsDir = "detections";

void write_file_atomic(const fs::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string utc_now_iso8601() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string image_rel(const std::string& key) { return std::string(kImagesDir) + "/" + key + ".png"; }
std::string detections_rel(const std::string& key) {
  return std::string(kDetectionsDir) + "/" + key + ".json";
}

InstanceKey key_of(const PromptInstance& inst) {
  return {inst.template_id, inst.pair_id, inst.group, inst.replicate};
}

void check_backends(GeneratorBackend& generator, DetectorBackend& detector,
                    const DetectorVocabulary& vocabulary, BackendDescriptor& gen_out,
                    BackendDescriptor& det_out) {
  gen_out = generator.health();
  require_kind(gen_out, BackendKind::generator);
  det_out = detector.health();
  require_kind(det_out, BackendKind::detector);
  if (det_out.vocabulary_hash != vocabulary.hash()) {
    throw RunAborted("detector '" + det_out.id + "' vocabulary hash " + det_out.vocabulary_hash +
                     " does not match the configured vocabulary " + vocabulary.hash());
  }
}

void default_sleep(std::chrono::duration<double> d) { std::this_thread::sleep_for(d); }

RunSummary execute(const ExperimentPlan& plan, std::vector<const PromptInstance*> pending,
                   std::size_t already_done, GeneratorBackend& generator,
                   DetectorBackend& detector, const DetectorVocabulary& vocabulary,
                   const RunSettings& settings, const fs::path& run_dir, const RunOptions& options) {
  RunSummary summary;
  summary.total = plan.instances.size();
  summary.skipped = already_done;

  JobJournal journal(run_dir / kJournalFile);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> finished{0};
  std::atomic<std::size_t> done{0};
  std::atomic<std::size_t> failed{0};
  std::atomic<bool> stopped{false};

  auto worker = [&] {
    for (;;) {
      if (options.stop_after && finished.load() >= *options.stop_after) {
        stopped = true;
        return;
      }
      const auto i = next.fetch_add(1);
      if (i >= pending.size()) return;
      const auto& inst = *pending[i];
      const auto key = inst.key();
      JournalRecord rec;
      rec.key = key;
      try {
        const auto image = run_dir / image_rel(key);
        auto record = execute_instance(inst, generator, detector, vocabulary, settings, image,
                                       options, &rec.attempts);
        record.image_path = image_rel(key);
        write_file_atomic(run_dir / detections_rel(key), json(record).dump(2) + "\n");
        rec.status = JobStatus::done;
        rec.image_path = image_rel(key);
        rec.detections_path = detections_rel(key);
        journal.append(rec);
        ++done;
      } catch (const std::exception& e) {
        rec.status = JobStatus::failed;
        rec.error = e.what();
        if (rec.attempts == 0) rec.attempts = 1;
        journal.append(rec);
        ++failed;
      }
      ++finished;
    }
  };

  const auto workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, settings.concurrency)),
                                               1, std::max<std::size_t>(1, pending.size()));
  if (!pending.empty()) {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  summary.executed = finished.load();
  summary.failed = failed.load();
  summary.done = already_done + done.load();
  summary.interrupted = stopped.load() && next.load() < pending.size();
  return summary;
}

}  // namespace

std::chrono::duration<double> RetryPolicy::delay(int retry) const {
  if (backoff_seconds.empty() || retry < 1) return std::chrono::duration<double>(0);
  const auto idx = std::min<std::size_t>(static_cast<std::size_t>(retry - 1), backoff_seconds.size() - 1);
  return std::chrono::duration<double>(backoff_seconds[idx]);
}

void to_json(json& j, const RunManifest& m) {
  j = json{{"v", kProtocolVersion},
           {"run_id", m.run_id},
           {"experiment_seed", m.experiment_seed},
           {"corpus_hash", m.corpus_hash},
           {"groups", m.groups},
           {"generator", {{"endpoint", m.generator_endpoint}, {"descriptor", m.generator}}},
           {"detector", {{"endpoint", m.detector_endpoint}, {"descriptor", m.detector}}},
           {"generation", m.generation},
           {"confidence_threshold", m.confidence_threshold},
           {"created_at", m.created_at},
           {"plan", {{"instances", m.instance_count}, {"prompts", m.prompt_count}}},
           {"config", m.config}};
}

void from_json(const json& j, RunManifest& m) {
  require_version(j);
  j.at("run_id").get_to(m.run_id);
  j.at("experiment_seed").get_to(m.experiment_seed);
  j.at("corpus_hash").get_to(m.corpus_hash);
  j.at("groups").get_to(m.groups);
  j.at("generator").at("endpoint").get_to(m.generator_endpoint);
  j.at("generator").at("descriptor").get_to(m.generator);
  j.at("detector").at("endpoint").get_to(m.detector_endpoint);
  j.at("detector").at("descriptor").get_to(m.detector);
  const auto& g = j.at("generation");
  m.generation = {g.at("width").get<int>(), g.at("height").get<int>(), g.at("steps").get<int>(),
                  g.at("guidance").get<double>()};
  j.at("confidence_threshold").get_to(m.confidence_threshold);
  j.at("created_at").get_to(m.created_at);
  j.at("plan").at("instances").get_to(m.instance_count);
  j.at("plan").at("prompts").get_to(m.prompt_count);
  m.config = j.value("config", json::object());
}

RunManifest read_manifest(const fs::path& run_dir) {
  const auto path = run_dir / kManifestFile;
  if (!fs::exists(path)) throw RunAborted("no manifest at " + path.string());
  try {
    return json::parse(read_file(path)).get<RunManifest>();
  } catch (const json::exception& e) {
    throw RunAborted("malformed manifest " + path.string() + ": " + e.what());
  }
}

void to_json(json& j, const JournalRecord& r) {
  j = json{{"key", r.key},
           {"status", r.status == JobStatus::done ? "done" : "failed"},
           {"attempts", r.attempts}};
  if (r.status == JobStatus::done) {
    j["image"] = r.image_path;
    j["detections"] = r.detections_path;
  } else {
    j["error"] = r.error;
  }
}

void from_json(const json& j, JournalRecord& r) {
  j.at("key").get_to(r.key);
  const auto status = j.at("status").get<std::string>();
  if (status == "done") {
    r.status = JobStatus::done;
  } else if (status == "failed") {
    r.status = JobStatus::failed;
  } else {
    throw JournalError("unknown journal status '" + status + "'");
  }
  r.attempts = j.value("attempts", 0);
  r.image_path = j.value("image", std::string{});
  r.detections_path = j.value("detections", std::string{});
  r.error = j.value("error", std::string{});
}

std::size_t JournalState::failed_count() const {
  std::size_t n = 0;
  for (const auto& [key, rec] : latest) {
    if (rec.status == JobStatus::failed && !is_done(key)) ++n;
  }
  return n;
}

JobJournal::JobJournal(fs::path path) : path_(std::move(path)) {
  if (fs::exists(path_)) {
    const auto content = read_file(path_);
    if (!content.empty() && content.back() != '\n') {
      const auto last_nl = content.rfind('\n');
      fs::resize_file(path_, last_nl == std::string::npos ? 0 : last_nl + 1);
    }
  }
  file_ = std::fopen(path_.c_str(), "ab");
  if (file_ == nullptr) throw JournalError("cannot open journal " + path_.string());
}

JobJournal::~JobJournal() {
  if (file_ != nullptr) std::fclose(file_);
}

void JobJournal::append(const JournalRecord& record) {
  const auto line = json(record).dump() + "\n";
  std::lock_guard lock(mu_);
  if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0) {
    throw JournalError("cannot append to journal " + path_.string());
  }
}

JournalState JobJournal::replay(const fs::path& path) {
  JournalState state;
  if (!fs::exists(path)) return state;
  const auto content = read_file(path);
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < content.size()) {
    const auto end = content.find('\n', start);
    ++line_no;
    if (end == std::string::npos) {
      state.torn_tail = true;  // partial final write
      break;
    }
    const auto line = std::string_view(content).substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    JournalRecord rec;
    try {
      rec = json::parse(line).get<JournalRecord>();
    } catch (const json::exception& e) {
      throw JournalError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    ++state.record_count;
    if (rec.status == JobStatus::done) state.done.insert(rec.key);
    state.latest[rec.key] = std::move(rec);
  }
  return state;
}

DetectionRecord execute_instance(const PromptInstance& instance, GeneratorBackend& generator,
                                 DetectorBackend& detector, const DetectorVocabulary& vocabulary,
                                 const RunSettings& settings,
                                 const std::optional<fs::path>& image_path,
                                 const RunOptions& options, int* attempts_out) {
  GenerateRequest request;
  request.prompt = instance.rendered_text;
  request.seed = instance.seed;
  request.params = settings.generation;
  request.metadata = RequestMetadata{instance.group, instance.template_id, instance.pair_id,
                                     instance.replicate};
  if (image_path) request.output_path = image_path->string();
  validate(request);

  const auto& sleep = options.sleep ? options.sleep : default_sleep;
  const int max_attempts = std::max(1, settings.retry.max_attempts);
  for (int attempt = 1;; ++attempt) {
    if (attempts_out != nullptr) *attempts_out = attempt;
    try {
      auto response = generator.generate(request);
      ImageRef image = response.image;
      if (image_path) {
        if (image.path) {
          if (fs::absolute(*image.path) != fs::absolute(*image_path)) {
            fs::copy_file(*image.path, *image_path, fs::copy_options::overwrite_existing);
          }
        } else {
          write_file_atomic(*image_path, std::string_view(reinterpret_cast<const char*>(image.data.data()),
                                                          image.data.size()));
        }
        image = ImageRef::from_path(*image_path);
      }
      DecodedImage decoded;
      try {
        decoded = decode_png(image.bytes());
      } catch (const ImageDecodeError& e) {
        throw ProtocolViolation(std::string("generator returned an undecodable image: ") + e.what());
      }
      if (decoded.width != request.params.width || decoded.height != request.params.height) {
        throw ProtocolViolation("generator returned " + std::to_string(decoded.width) + "x" +
                                std::to_string(decoded.height) + ", requested " +
                                std::to_string(request.params.width) + "x" +
                                std::to_string(request.params.height));
      }
      auto detections = detector.detect(image, settings.confidence_threshold);
      check_detections(detections, vocabulary, settings.confidence_threshold);
      return DetectionRecord{key_of(instance), std::move(detections), {}};
    } catch (const BackendError& e) {
      if (!e.retryable() || attempt >= max_attempts) throw;
      sleep(settings.retry.delay(attempt));
    }
  }
}

RunSummary run_plan(const ExperimentPlan& plan, GeneratorBackend& generator,
                    DetectorBackend& detector, const DetectorVocabulary& vocabulary,
                    const RunSettings& settings, const fs::path& run_dir,
                    const json& config_echo, const RunOptions& options) {
  if (fs::exists(run_dir) && !fs::is_empty(run_dir)) {
    throw RunAborted("run directory " + run_dir.string() + " is not empty (use resume)");
  }
  RunManifest manifest;
  check_backends(generator, detector, vocabulary, manifest.generator, manifest.detector);

  const auto dir = fs::absolute(run_dir);
  fs::create_directories(dir / kImagesDir);
  fs::create_directories(dir / kDetectionsDir);

  manifest.experiment_seed = plan.experiment_seed;
  manifest.corpus_hash = plan.corpus_hash;
  manifest.groups = plan.groups;
  manifest.generation = settings.generation;
  manifest.confidence_threshold = settings.confidence_threshold;
  manifest.created_at = utc_now_iso8601();
  manifest.instance_count = plan.instances.size();
  manifest.prompt_count = plan.distinct_prompt_count();
  manifest.config = config_echo.is_object() ? config_echo : json::object();
  manifest.generator_endpoint = manifest.config.value("generator_endpoint", std::string{});
  manifest.detector_endpoint = manifest.config.value("detector_endpoint", std::string{});
  manifest.run_id = "run-" + sha256_hex(plan.corpus_hash + ":" + std::to_string(plan.experiment_seed) +
                                        ":" + manifest.created_at)
                                 .substr(0, 12);
  write_file_atomic(dir / kManifestFile, json(manifest).dump(2) + "\n");

  std::vector<const PromptInstance*> pending;
  pending.reserve(plan.instances.size());
  for (const auto& inst : plan.instances) pending.push_back(&inst);
  return execute(plan, std::move(pending), 0, generator, detector, vocabulary, settings, dir, options);
}

RunSummary resume(const ExperimentPlan& plan, GeneratorBackend& generator,
                  DetectorBackend& detector, const DetectorVocabulary& vocabulary,
                  const RunSettings& settings, const fs::path& run_dir, const RunOptions& options) {
  const auto dir = fs::absolute(run_dir);
  const auto manifest = read_manifest(dir);
  auto mismatch = [](const std::string& what) {
    throw RunAborted(what + " differs from the run manifest; refusing to resume");
  };
  if (manifest.experiment_seed != plan.experiment_seed) mismatch("experiment_seed");
  if (manifest.corpus_hash != plan.corpus_hash) mismatch("template/pair corpus");
  if (manifest.instance_count != plan.instances.size()) mismatch("plan size");
  if (manifest.confidence_threshold != settings.confidence_threshold) mismatch("confidence_threshold");
  if (!(manifest.generation == settings.generation)) mismatch("generation parameters");

  BackendDescriptor gen, det;
  check_backends(generator, detector, vocabulary, gen, det);
  fs::create_directories(dir / kImagesDir);
  fs::create_directories(dir / kDetectionsDir);

  const auto state = JobJournal::replay(dir / kJournalFile);
  std::vector<const PromptInstance*> pending;
  std::size_t already = 0;
  for (const auto& inst : plan.instances) {
    if (state.is_done(inst.key())) {
      ++already;
    } else {
      pending.push_back(&inst);
    }
  }
  return execute(plan, std::move(pending), already, generator, detector, vocabulary, settings, dir,
                 options);
}

RunResults collect_results(const fs::path& run_dir) {
  RunResults results;
  results.manifest = read_manifest(run_dir);
  const auto state = JobJournal::replay(run_dir / kJournalFile);
  for (const auto& key : state.done) {  // std::set: sorted by key
    const auto& rec = state.latest.at(key);
    const auto path = run_dir / (rec.detections_path.empty() ? detections_rel(key) : rec.detections_path);
    try {
      results.records.push_back(json::parse(read_file(path)).get<DetectionRecord>());
    } catch (const json::exception& e) {
      throw JournalError("malformed detection record " + path.string() + ": " + e.what());
    }
  }
  results.failed = results.manifest.instance_count - std::min(results.manifest.instance_count, state.done.size());
  return results;
}

}  // namespace biasprobe
