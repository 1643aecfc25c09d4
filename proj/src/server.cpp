#include "lmprobe/server.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <thread>

#include "lmprobe/error.hpp"
#include "lmprobe/wire_json.hpp"

namespace lmprobe {

using nlohmann::json;
using nlohmann::ordered_json;

struct WireServer::Impl {
  Scorer& scorer;
  WireServerOptions options;
  httplib::Server server;
  std::thread thread;

  Impl(Scorer& s, WireServerOptions o) : scorer(s), options(o) {
    setup_routes();
  }

  static void send_json(httplib::Response& res, int status,
                        const ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status,
                         const std::string& message) {
    ordered_json body;
    body["error"] = message;
    send_json(res, status, body);
  }

  // Client-side mistakes (bad JSON, bad query shape) are 400; scorer
  // failures are 500.
  template <typename Fn>
  void handle(const httplib::Request& req, httplib::Response& res, Fn&& fn) {
    json body;
    if (!req.body.empty()) {
      body = json::parse(req.body, nullptr, false);
      if (body.is_discarded()) {
        send_error(res, 400, "request body is not valid JSON");
        return;
      }
    }
    try {
      send_json(res, 200, fn(body));
    } catch (const BackendError& e) {
      send_error(res, 500, e.what());
    } catch (const Error& e) {
      send_error(res, 400, e.what());
    }
  }

  void setup_routes() {
    server.Get("/v1/identity", [this](const httplib::Request& req,
                                      httplib::Response& res) {
      handle(req, res, [this](const json&) {
        const BackendIdentity& id = scorer.identity();
        ordered_json out;
        out["name"] = id.name;
        out["revision"] = id.revision;
        out["base"] = to_string(id.base);
        out["supported_modes"] = ordered_json::array();
        if (id.supports_causal) out["supported_modes"].push_back("causal");
        if (id.supports_masked) out["supported_modes"].push_back("masked");
        return out;
      });
    });

    server.Post("/v1/tokenize", [this](const httplib::Request& req,
                                       httplib::Response& res) {
      handle(req, res, [this](const json& body) {
        if (!body.contains("text") || !body["text"].is_string()) {
          throw ProtocolError("'text' (string) is required");
        }
        ordered_json out;
        out["tokens"] =
            tokens_to_json(scorer.tokenize(body["text"].get<std::string>()));
        return out;
      });
    });

    server.Post("/v1/causal_logprobs", [this](const httplib::Request& req,
                                              httplib::Response& res) {
      handle(req, res, [this](const json& body) {
        if (!body.contains("text") || !body["text"].is_string()) {
          throw ProtocolError("'text' (string) is required");
        }
        ordered_json arr = ordered_json::array();
        for (const auto& v :
             scorer.causal_logprobs(body["text"].get<std::string>())) {
          if (v) {
            arr.push_back(*v);
          } else {
            arr.push_back(nullptr);
          }
        }
        ordered_json out;
        out["logprobs"] = std::move(arr);
        out["base"] = "natural";
        return out;
      });
    });

    server.Post("/v1/masked_logprob", [this](const httplib::Request& req,
                                             httplib::Response& res) {
      handle(req, res, [this](const json& body) {
        const MaskedLogprobRequest q = masked_request_from_json(body);
        check_masked_request(q);
        ordered_json out;
        out["logprob"] = scorer.masked_logprob(q);
        out["base"] = "natural";
        return out;
      });
    });

    if (options.enable_batch) {
      server.Post("/v1/masked_logprob_batch",
                  [this](const httplib::Request& req, httplib::Response& res) {
                    handle(req, res, [this](const json& body) {
                      if (!body.contains("queries") ||
                          !body["queries"].is_array()) {
                        throw ProtocolError("'queries' (array) is required");
                      }
                      std::vector<MaskedLogprobRequest> reqs;
                      reqs.reserve(body["queries"].size());
                      for (const json& q : body["queries"]) {
                        reqs.push_back(masked_request_from_json(q));
                        check_masked_request(reqs.back());
                      }
                      ordered_json results = ordered_json::array();
                      for (double v : scorer.masked_logprob_batch(reqs)) {
                        ordered_json r;
                        r["logprob"] = v;
                        results.push_back(std::move(r));
                      }
                      ordered_json out;
                      out["results"] = std::move(results);
                      out["base"] = "natural";
                      return out;
                    });
                  });
    }
  }
};

WireServer::WireServer(Scorer& scorer, WireServerOptions options)
    : impl_(std::make_unique<Impl>(scorer, options)) {}

WireServer::~WireServer() { stop(); }

int WireServer::start_on_any_port(const std::string& host) {
  const int port = impl_->server.bind_to_any_port(host);
  if (port <= 0) throw BackendError("cannot bind a port on " + host);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  const auto deadline =
      std::chrono::steady_clock::now() + std::chrono::seconds(10);
  while (!impl_->server.is_running()) {
    if (std::chrono::steady_clock::now() > deadline) {
      throw BackendError("wire server failed to start");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  return port;
}

void WireServer::serve_blocking(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    throw BackendError("cannot listen on " + host + ":" +
                       std::to_string(port));
  }
}

void WireServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace lmprobe
