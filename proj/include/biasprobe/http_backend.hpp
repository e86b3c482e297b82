#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "biasprobe/mock_backend.hpp"
#include "biasprobe/protocol.hpp"
#include "biasprobe/vocabulary.hpp"

namespace biasprobe {

// "http://host:port" or "mock:" (in-process mock backend).
struct Endpoint {
  std::string scheme;
  std::string host;
  int port = 0;

  static Endpoint parse(std::string_view text);  // throws std::invalid_argument
  bool is_mock() const { return scheme == "mock"; }
  // Loopback backends share our filesystem, so images travel by path.
  bool is_local() const;
  std::string str() const;
};

struct HttpOptions {
  std::chrono::milliseconds connect_timeout{2000};
  std::chrono::milliseconds read_timeout{std::chrono::minutes(5)};
};

class HttpGeneratorClient final : public GeneratorBackend {
 public:
  explicit HttpGeneratorClient(Endpoint endpoint, HttpOptions options = {});
  BackendDescriptor health() override;
  GenerateResponse generate(const GenerateRequest& request) override;

 private:
  Endpoint endpoint_;
  HttpOptions options_;
};

class HttpDetectorClient final : public DetectorBackend {
 public:
  HttpDetectorClient(Endpoint endpoint, DetectorVocabulary vocabulary, HttpOptions options = {});
  BackendDescriptor health() override;
  // Validates every label against the vocabulary; throws ProtocolViolation otherwise.
  std::vector<Detection> detect(const ImageRef& image, double threshold) override;

 private:
  Endpoint endpoint_;
  DetectorVocabulary vocabulary_;
  HttpOptions options_;
};

// Queries /health and checks the reported kind. Throws BackendError
// (retryable) if unreachable, non-retryable on kind mismatch.
BackendDescriptor health_check(const Endpoint& endpoint, BackendKind expected,
                               HttpOptions options = {});

std::unique_ptr<GeneratorBackend> open_generator(const Endpoint& endpoint,
                                                 const MockConfig& mock_config,
                                                 HttpOptions options = {});
std::unique_ptr<DetectorBackend> open_detector(const Endpoint& endpoint,
                                               const DetectorVocabulary& vocabulary,
                                               HttpOptions options = {});

// Serves the wire protocol on loopback using the in-process mocks. One kind
// per server, as with real adapters.
class MockBackendServer {
 public:
  static MockBackendServer generator(MockConfig config);
  static MockBackendServer detector(DetectorVocabulary vocabulary);

  MockBackendServer(MockBackendServer&&) noexcept;
  MockBackendServer& operator=(MockBackendServer&&) noexcept;
  ~MockBackendServer();

  // Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Serves on the calling thread until stop() is called elsewhere.
  void listen(const std::string& host, int port);
  void stop();
  Endpoint endpoint() const;

 private:
  struct Impl;
  explicit MockBackendServer(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

}  // namespace biasprobe
