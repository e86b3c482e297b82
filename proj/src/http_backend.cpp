#include "biasprobe/http_backend.hpp"

#include <charconv>

#include "httplib.h"

namespace biasprobe {

using nlohmann::json;

Endpoint Endpoint::parse(std::string_view text) {
  Endpoint ep;
  if (text == "mock:" || text == "mock" || text == "mock://") {
    ep.scheme = "mock";
    return ep;
  }
  constexpr std::string_view kHttp = "http://";
  if (text.substr(0, kHttp.size()) != kHttp) {
    throw std::invalid_argument("endpoint must be 'mock:' or 'http://host:port', got '" +
                                std::string(text) + "'");
  }
  auto rest = text.substr(kHttp.size());
  if (!rest.empty() && rest.back() == '/') rest.remove_suffix(1);
  const auto colon = rest.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw std::invalid_argument("endpoint needs an explicit host and port: '" + std::string(text) + "'");
  }
  ep.scheme = "http";
  ep.host = std::string(rest.substr(0, colon));
  const auto port = rest.substr(colon + 1);
  const auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), ep.port);
  if (ec != std::errc{} || ptr != port.data() + port.size() || ep.port <= 0 || ep.port > 65535) {
    throw std::invalid_argument("invalid port in endpoint '" + std::string(text) + "'");
  }
  return ep;
}

bool Endpoint::is_local() const {
  return is_mock() || host == "127.0.0.1" || host == "localhost" || host == "::1";
}

std::string Endpoint::str() const {
  if (is_mock()) return "mock:";
  return scheme + "://" + host + ":" + std::to_string(port);
}

namespace {

template <class Rep, class Period>
std::pair<time_t, time_t> split(std::chrono::duration<Rep, Period> d) {
  const auto us = std::chrono::duration_cast<std::chrono::microseconds>(d).count();
  return {static_cast<time_t>(us / 1000000), static_cast<time_t>(us % 1000000)};
}

json post(const Endpoint& ep, const std::string& path, const json& body, const HttpOptions& opts) {
  httplib::Client client(ep.host, ep.port);
  const auto [cs, cus] = split(opts.connect_timeout);
  const auto [rs, rus] = split(opts.read_timeout);
  client.set_connection_timeout(cs, cus);
  client.set_read_timeout(rs, rus);
  client.set_write_timeout(rs, rus);

  const auto res = client.Post(path, body.dump(), "application/json");
  if (!res) {
    throw BackendError("transport error on " + ep.str() + path + ": " + httplib::to_string(res.error()),
                       true);
  }
  json reply;
  try {
    reply = json::parse(res->body);
  } catch (const json::parse_error&) {
    if (res->status != 200) {
      const bool retryable = res->status >= 500 || res->status == 408 || res->status == 429;
      throw BackendError(ep.str() + path + " returned HTTP " + std::to_string(res->status), retryable);
    }
    throw ProtocolViolation(ep.str() + path + " returned a non-JSON body");
  }
  if (res->status != 200) {
    bool retryable = res->status >= 500 || res->status == 408 || res->status == 429;
    if (reply.is_object() && reply.contains("retryable") && reply["retryable"].is_boolean()) {
      retryable = reply["retryable"].get<bool>();
    }
    std::string msg = ep.str() + path + " returned HTTP " + std::to_string(res->status);
    if (reply.is_object() && reply.contains("error")) msg += ": " + reply["error"].dump();
    throw BackendError(msg, retryable);
  }
  require_version(reply);
  return reply;
}

BackendDescriptor fetch_health(const Endpoint& ep, BackendKind role, const HttpOptions& opts) {
  const auto reply = post(ep, "/health", json{{"v", kProtocolVersion}, {"role", to_string(role)}}, opts);
  try {
    return reply.get<BackendDescriptor>();
  } catch (const json::exception& e) {
    throw ProtocolViolation(std::string("malformed /health response: ") + e.what());
  }
}

}  // namespace

BackendDescriptor health_check(const Endpoint& endpoint, BackendKind expected, HttpOptions options) {
  auto descriptor = fetch_health(endpoint, expected, options);
  require_kind(descriptor, expected);
  return descriptor;
}

HttpGeneratorClient::HttpGeneratorClient(Endpoint endpoint, HttpOptions options)
    : endpoint_(std::move(endpoint)), options_(options) {}

BackendDescriptor HttpGeneratorClient::health() {
  return fetch_health(endpoint_, BackendKind::generator, options_);
}

GenerateResponse HttpGeneratorClient::generate(const GenerateRequest& request) {
  validate(request);
  GenerateRequest wire = request;
  if (!endpoint_.is_local()) wire.output_path.reset();
  const auto reply = post(endpoint_, "/generate", json(wire), options_);
  try {
    return reply.get<GenerateResponse>();
  } catch (const json::exception& e) {
    throw ProtocolViolation(std::string("malformed /generate response: ") + e.what());
  }
}

HttpDetectorClient::HttpDetectorClient(Endpoint endpoint, DetectorVocabulary vocabulary,
                                       HttpOptions options)
    : endpoint_(std::move(endpoint)), vocabulary_(std::move(vocabulary)), options_(options) {}

BackendDescriptor HttpDetectorClient::health() {
  return fetch_health(endpoint_, BackendKind::detector, options_);
}

std::vector<Detection> HttpDetectorClient::detect(const ImageRef& image, double threshold) {
  ImageRef wire = image;
  if (wire.path && !endpoint_.is_local()) {
    wire = ImageRef::from_bytes(image.bytes());
    wire.format = image.format;
  }
  if (wire.path) wire.path = std::filesystem::absolute(*wire.path);
  const json body{{"v", kProtocolVersion}, {"image", wire}, {"confidence_threshold", threshold}};
  const auto reply = post(endpoint_, "/detect", body, options_);
  std::vector<Detection> detections;
  try {
    detections = reply.at("detections").get<std::vector<Detection>>();
  } catch (const json::exception& e) {
    throw ProtocolViolation(std::string("malformed /detect response: ") + e.what());
  }
  check_detections(detections, vocabulary_, threshold);
  return detections;
}

std::unique_ptr<GeneratorBackend> open_generator(const Endpoint& endpoint,
                                                 const MockConfig& mock_config,
                                                 HttpOptions options) {
  if (endpoint.is_mock()) return std::make_unique<MockGenerator>(mock_config);
  return std::make_unique<HttpGeneratorClient>(endpoint, options);
}

std::unique_ptr<DetectorBackend> open_detector(const Endpoint& endpoint,
                                               const DetectorVocabulary& vocabulary,
                                               HttpOptions options) {
  if (endpoint.is_mock()) return std::make_unique<MockDetector>(vocabulary);
  return std::make_unique<HttpDetectorClient>(endpoint, vocabulary, options);
}

// ---------------------------------------------------------------------------
// Mock server

struct MockBackendServer::Impl {
  BackendKind kind = BackendKind::generator;
  std::optional<MockGenerator> generator;
  std::optional<MockDetector> detector;
  httplib::Server server;
  std::thread thread;
  std::string host;
  int port = 0;

  static void reply_error(httplib::Response& res, int status, const std::string& message,
                          bool retryable) {
    res.status = status;
    res.set_content(json{{"v", kProtocolVersion}, {"error", message}, {"retryable", retryable}}.dump(),
                    "application/json");
  }

  template <class Fn>
  static void guarded(const httplib::Request& req, httplib::Response& res, Fn&& fn) {
    try {
      const auto body = json::parse(req.body);
      require_version(body);
      res.set_content(fn(body).dump(), "application/json");
    } catch (const json::exception& e) {
      reply_error(res, 400, e.what(), false);
    } catch (const BackendError& e) {
      reply_error(res, e.retryable() ? 503 : 400, e.what(), e.retryable());
    } catch (const std::invalid_argument& e) {
      reply_error(res, 400, e.what(), false);
    } catch (const std::exception& e) {
      reply_error(res, 500, e.what(), true);
    }
  }

  void install_routes() {
    server.Post("/health", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(req, res, [this](const json&) {
        return json(kind == BackendKind::generator ? generator->health() : detector->health());
      });
    });
    if (kind == BackendKind::generator) {
      server.Post("/generate", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(req, res, [this](const json& body) {
          const auto request = body.get<GenerateRequest>();
          return json(generator->generate(request));
        });
      });
    } else {
      server.Post("/detect", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(req, res, [this](const json& body) {
          const auto image = body.at("image").get<ImageRef>();
          const double threshold = body.value("confidence_threshold", 0.5);
          return json{{"v", kProtocolVersion},
                      {"backend_id", detector->health().id},
                      {"detections", detector->detect(image, threshold)}};
        });
      });
    }
  }
};

MockBackendServer::MockBackendServer(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {
  impl_->install_routes();
}

MockBackendServer MockBackendServer::generator(MockConfig config) {
  auto impl = std::make_unique<Impl>();
  impl->kind = BackendKind::generator;
  impl->generator.emplace(std::move(config));
  return MockBackendServer(std::move(impl));
}

MockBackendServer MockBackendServer::detector(DetectorVocabulary vocabulary) {
  auto impl = std::make_unique<Impl>();
  impl->kind = BackendKind::detector;
  impl->detector.emplace(std::move(vocabulary));
  return MockBackendServer(std::move(impl));
}

MockBackendServer::MockBackendServer(MockBackendServer&&) noexcept = default;
MockBackendServer& MockBackendServer::operator=(MockBackendServer&&) noexcept = default;

MockBackendServer::~MockBackendServer() {
  if (impl_) stop();
}

int MockBackendServer::start(const std::string& host, int port) {
  impl_->host = host;
  impl_->port = port == 0 ? impl_->server.bind_to_any_port(host) : port;
  if (port != 0 && !impl_->server.bind_to_port(host, port)) impl_->port = -1;
  if (impl_->port < 0) throw std::runtime_error("mock server cannot bind " + host);
  Impl* impl = impl_.get();
  impl_->thread = std::thread([impl] { impl->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->port;
}

void MockBackendServer::listen(const std::string& host, int port) {
  impl_->host = host;
  impl_->port = port;
  if (!impl_->server.listen(host, port)) {
    throw std::runtime_error("mock server cannot listen on " + host + ":" + std::to_string(port));
  }
}

void MockBackendServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

Endpoint MockBackendServer::endpoint() const {
  return Endpoint{"http", impl_->host, impl_->port};
}

}  // namespace biasprobe
