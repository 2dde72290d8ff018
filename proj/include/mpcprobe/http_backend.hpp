#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "mpcprobe/backend.hpp"
#include "mpcprobe/error.hpp"

namespace mpcprobe {

// Wire contract (JSON over HTTP, UTF-8):
//   POST /v1/logprobs {"context", "continuation"} -> {"tokens", "logprobs", "log_base": "e"}
//   POST /v1/generate {"prompt", "max_tokens", "greedy": true} -> {"text"}
namespace wire {

inline constexpr std::string_view kLogprobsPath = "/v1/logprobs";
inline constexpr std::string_view kGeneratePath = "/v1/generate";

inline std::string logprobs_request(std::string_view context, std::string_view continuation) {
  nlohmann::ordered_json j = {{"context", context}, {"continuation", continuation}};
  return j.dump();
}

inline std::string generate_request(std::string_view prompt, int max_tokens) {
  nlohmann::ordered_json j = {{"prompt", prompt}, {"max_tokens", max_tokens}, {"greedy", true}};
  return j.dump();
}

inline std::string logprobs_response(const LogprobResult& r) {
  nlohmann::ordered_json j = {{"tokens", r.tokens}, {"logprobs", r.logprobs}, {"log_base", "e"}};
  return j.dump();
}

inline std::string generate_response(std::string_view text) {
  nlohmann::ordered_json j = {{"text", text}};
  return j.dump();
}

inline LogprobResult parse_logprobs_response(std::string_view body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::kBackendError, std::string("malformed logprobs response: ") + e.what());
  }
  if (!j.is_object() || !j.contains("tokens") || !j.contains("logprobs")) {
    throw Error(Errc::kBackendError, "logprobs response lacks tokens/logprobs");
  }
  const std::string base = j.value("log_base", "e");
  LogprobResult r;
  r.tokens = j["tokens"].get<std::vector<std::string>>();
  r.logprobs = j["logprobs"].get<std::vector<double>>();
  if (base == "2") {
    for (auto& lp : r.logprobs) lp *= std::log(2.0);
  } else if (base == "10") {
    for (auto& lp : r.logprobs) lp *= std::log(10.0);
  } else if (base != "e") {
    throw Error(Errc::kBackendError, "unsupported log_base '" + base + "'");
  }
  return r;
}

inline std::string parse_generate_response(std::string_view body) {
  try {
    auto j = nlohmann::json::parse(body);
    return j.at("text").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kBackendError, std::string("malformed generate response: ") + e.what());
  }
}

}  // namespace wire

/// Client for a server that speaks the wire contract above.
class HttpBackend : public Backend {
 public:
  struct Options {
    std::chrono::seconds connect_timeout{5};
    std::chrono::seconds read_timeout{120};
  };

  explicit HttpBackend(std::string endpoint) : HttpBackend(std::move(endpoint), Options{}) {}

  HttpBackend(std::string endpoint, Options opts) : endpoint_(std::move(endpoint)), opts_(opts) {}

  LogprobResult continuation_logprobs(std::string_view context, std::string_view continuation) override {
    if (whitespace_tokens(continuation).empty()) throw Error(Errc::kEmptyContinuation, "continuation has no tokens");
    auto body = post(wire::kLogprobsPath, wire::logprobs_request(context, continuation));
    auto r = wire::parse_logprobs_response(body);
    check_logprob_result(r);
    return r;
  }

  std::string generate(std::string_view prompt, int max_tokens) override {
    return wire::parse_generate_response(post(wire::kGeneratePath, wire::generate_request(prompt, max_tokens)));
  }

  std::string identity() const override { return "http:" + endpoint_; }

 private:
  std::string post(std::string_view path, const std::string& body) {
    // httplib::Client is not safe for concurrent use; one per call keeps the
    // backend shareable across worker threads.
    httplib::Client client(endpoint_);
    client.set_connection_timeout(opts_.connect_timeout);
    client.set_read_timeout(opts_.read_timeout);
    auto res = client.Post(std::string(path), body, "application/json");
    if (!res) {
      throw Error(Errc::kBackendError, "POST " + endpoint_ + std::string(path) + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status >= 500 || res->status == 429) {
      throw Error(Errc::kBackendError, "POST " + std::string(path) + " returned HTTP " + std::to_string(res->status));
    }
    if (res->status != 200) {
      // Client-side errors will not go away on retry.
      throw Error(Errc::kInvalidConfig, "POST " + std::string(path) + " returned HTTP " + std::to_string(res->status) +
                                            ": " + res->body);
    }
    return res->body;
  }

  std::string endpoint_;
  Options opts_;
};

/// Serves the wire contract on top of any Backend. Used as the stub server in
/// tests and by `mpc_probe serve-stub`.
class StubServer {
 public:
  explicit StubServer(Backend& model) : model_(model) {
    server_.Post(std::string(wire::kLogprobsPath), [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res, [this](const nlohmann::json& j) {
        auto r = model_.continuation_logprobs(j.at("context").get<std::string>(), j.at("continuation").get<std::string>());
        return wire::logprobs_response(r);
      });
    });
    server_.Post(std::string(wire::kGeneratePath), [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res, [this](const nlohmann::json& j) {
        return wire::generate_response(model_.generate(j.at("prompt").get<std::string>(), j.at("max_tokens").get<int>()));
      });
    });
  }

  ~StubServer() { stop(); }

  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  /// Binds to an ephemeral port on localhost and serves in a background thread.
  int start() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    if (port_ <= 0) throw Error(Errc::kIoError, "stub server could not bind");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  void listen(const std::string& host, int port) { server_.listen(host, port); }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

  /// Every request body received, in arrival order.
  std::vector<std::pair<std::string, std::string>> exchanges() const {
    std::lock_guard lock(mu_);
    return exchanges_;
  }

  /// Makes the next `n` requests fail with HTTP 503.
  void fail_next(int n) {
    std::lock_guard lock(mu_);
    failures_ = n;
  }

 private:
  template <typename Handler>
  void handle(const httplib::Request& req, httplib::Response& res, Handler&& h) {
    {
      std::lock_guard lock(mu_);
      exchanges_.emplace_back(req.path, req.body);
      if (failures_ > 0) {
        --failures_;
        res.status = 503;
        return;
      }
    }
    try {
      auto j = nlohmann::json::parse(req.body);
      res.set_content(h(j), "application/json");
    } catch (const Error& e) {
      res.status = 422;
      res.set_content(e.what(), "text/plain");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(e.what(), "text/plain");
    }
  }

  Backend& model_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  mutable std::mutex mu_;
  std::vector<std::pair<std::string, std::string>> exchanges_;
  int failures_ = 0;
};

}  // namespace mpcprobe
