#pragma once

#include <chrono>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "biasprobe/detection_record.hpp"
#include "biasprobe/prompt_corpus.hpp"
#include "biasprobe/protocol.hpp"
#include "biasprobe/vocabulary.hpp"

namespace biasprobe {

namespace fs = std::filesystem;

// Precondition failures that must stop a run before any job executes:
// non-empty run directory, vocabulary mismatch, manifest/config mismatch.
class RunAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class JournalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::vector<double> backoff_seconds{0.5, 2.0, 8.0};

  // Delay before retry number `retry` (1-based); the last entry repeats.
  std::chrono::duration<double> delay(int retry) const;
  bool operator==(const RetryPolicy&) const = default;
};

struct RunSettings {
  GenerationParams generation;
  double confidence_threshold = 0.5;
  int concurrency = 4;
  RetryPolicy retry;
};

struct RunManifest {
  std::string run_id;
  std::uint64_t experiment_seed = 0;
  std::string corpus_hash;
  std::vector<std::string> groups;
  std::string generator_endpoint;
  std::string detector_endpoint;
  BackendDescriptor generator;
  BackendDescriptor detector;
  GenerationParams generation;
  double confidence_threshold = 0.5;
  std::string created_at;  // UTC, ISO 8601
  std::size_t instance_count = 0;
  std::size_t prompt_count = 0;
  nlohmann::json config;  // validated run configuration, echoed verbatim
};

void to_json(nlohmann::json& j, const RunManifest& m);
void from_json(const nlohmann::json& j, RunManifest& m);

RunManifest read_manifest(const fs::path& run_dir);

enum class JobStatus { done, failed };

struct JournalRecord {
  std::string key;
  JobStatus status = JobStatus::done;
  std::string image_path;
  std::string detections_path;
  int attempts = 0;
  std::string error;
};

void to_json(nlohmann::json& j, const JournalRecord& r);
void from_json(const nlohmann::json& j, JournalRecord& r);

// Completion state reconstructed from the journal.
struct JournalState {
  std::map<std::string, JournalRecord> latest;  // last record per key
  std::set<std::string> done;
  std::size_t record_count = 0;
  bool torn_tail = false;  // final line was a partial write

  bool is_done(const std::string& key) const { return done.count(key) != 0; }
  std::size_t failed_count() const;
};

// Append-only newline-delimited JSON; one record per line, flushed per record.
// Appends from concurrent jobs are serialized here.
class JobJournal {
 public:
  // Opens for append, first truncating a torn final line if present.
  explicit JobJournal(fs::path path);
  ~JobJournal();
  JobJournal(const JobJournal&) = delete;
  JobJournal& operator=(const JobJournal&) = delete;

  // Tolerates a torn final line; any other malformed line is a JournalError.
  static JournalState replay(const fs::path& path);

  void append(const JournalRecord& record);
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
  std::mutex mu_;
  std::FILE* file_ = nullptr;
};

struct RunOptions {
  // Stop dispatching once this many jobs have finished in this invocation;
  // in-flight jobs still complete. Models an interrupted run.
  std::optional<std::size_t> stop_after;
  // Replaced in tests to avoid real backoff sleeps.
  std::function<void(std::chrono::duration<double>)> sleep;
};

struct RunSummary {
  std::size_t total = 0;      // plan instances
  std::size_t skipped = 0;    // already done before this invocation
  std::size_t executed = 0;   // jobs attempted in this invocation
  std::size_t done = 0;       // instances with a done record after this invocation
  std::size_t failed = 0;     // jobs that exhausted retries in this invocation
  bool interrupted = false;

  bool complete() const { return done == total; }
};

// Runs one instance: generate, persist the image (when image_path is set),
// detect, with job-level retries for retryable errors. Throws BackendError
// once retries are exhausted or on a non-retryable error.
DetectionRecord execute_instance(const PromptInstance& instance, GeneratorBackend& generator,
                                 DetectorBackend& detector, const DetectorVocabulary& vocabulary,
                                 const RunSettings& settings,
                                 const std::optional<fs::path>& image_path,
                                 const RunOptions& options = {}, int* attempts_out = nullptr);

// Layout under run_dir: manifest.json, journal.ndjson, images/<key>.png,
// detections/<key>.json. run_dir must be absent or empty.
RunSummary run_plan(const ExperimentPlan& plan, GeneratorBackend& generator,
                    DetectorBackend& detector, const DetectorVocabulary& vocabulary,
                    const RunSettings& settings, const fs::path& run_dir,
                    const nlohmann::json& config_echo = nlohmann::json::object(),
                    const RunOptions& options = {});

// Executes only instances without a done record. The supplied plan and
// settings must match the manifest (seed, corpus, threshold, generation params).
RunSummary resume(const ExperimentPlan& plan, GeneratorBackend& generator,
                  DetectorBackend& detector, const DetectorVocabulary& vocabulary,
                  const RunSettings& settings, const fs::path& run_dir,
                  const RunOptions& options = {});

struct RunResults {
  RunManifest manifest;
  std::vector<DetectionRecord> records;  // done instances, sorted by key
  std::size_t failed = 0;                // instances without a done record
};

RunResults collect_results(const fs::path& run_dir);

}  // namespace biasprobe
