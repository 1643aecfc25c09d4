#include "lmprobe/http_scorer.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <mutex>
#include <random>
#include <semaphore>
#include <thread>
#include <vector>

#include "lmprobe/error.hpp"
#include "lmprobe/text_util.hpp"
#include "lmprobe/wire_json.hpp"

namespace lmprobe {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

bool retryable_status(int status) {
  return status == 429 || (status >= 500 && status <= 599);
}

int jitter_ms() {
  thread_local std::mt19937 rng(
      std::random_device{}() ^
      static_cast<unsigned>(
          std::hash<std::thread::id>{}(std::this_thread::get_id())));
  return static_cast<int>(rng() % 100);
}

class HttpScorer final : public Scorer {
 public:
  HttpScorer(std::string base_url, HttpScorerOptions opts)
      : base_url_(std::move(base_url)),
        opts_(opts),
        in_flight_(static_cast<std::ptrdiff_t>(
            opts.max_in_flight == 0 ? 1 : opts.max_in_flight)) {
    if (opts_.max_attempts < 1) {
      throw ConfigError("http backend needs max_attempts >= 1");
    }
  }

  const BackendIdentity& identity() override {
    std::lock_guard<std::mutex> lock(identity_mu_);
    if (!identity_loaded_) {
      const json body = expect_ok(round_trip("GET", "/v1/identity", ""),
                                  "/v1/identity");
      identity_.name = field_str(body, "name", "/v1/identity");
      identity_.revision = field_str(body, "revision", "/v1/identity");
      identity_.base = log_base_from_string(
          body.value("base", std::string("natural")));
      identity_.supports_causal = false;
      identity_.supports_masked = false;
      if (!body.contains("supported_modes") ||
          !body["supported_modes"].is_array()) {
        throw ProtocolError("/v1/identity lacks a 'supported_modes' array");
      }
      for (const json& m : body["supported_modes"]) {
        if (m == "causal") identity_.supports_causal = true;
        if (m == "masked") identity_.supports_masked = true;
      }
      identity_loaded_ = true;
    }
    return identity_;
  }

  TokenizedStatement tokenize(const std::string& text) override {
    require_utf8(text);
    ordered_json req;
    req["text"] = text;
    const json body = expect_ok(
        round_trip("POST", "/v1/tokenize", req.dump()), "/v1/tokenize");
    if (!body.contains("tokens")) {
      throw ProtocolError("/v1/tokenize response lacks 'tokens'");
    }
    TokenizedStatement ts = tokens_from_json(body["tokens"]);
    validate_tokenization(text, ts);
    return ts;
  }

  std::vector<std::optional<double>> causal_logprobs(
      const std::string& text) override {
    require_utf8(text);
    ordered_json req;
    req["text"] = text;
    const json body =
        expect_ok(round_trip("POST", "/v1/causal_logprobs", req.dump()),
                  "/v1/causal_logprobs");
    if (!body.contains("logprobs") || !body["logprobs"].is_array()) {
      throw ProtocolError("/v1/causal_logprobs response lacks 'logprobs'");
    }
    const double factor = response_base_factor(body);
    std::vector<std::optional<double>> out;
    out.reserve(body["logprobs"].size());
    for (const json& v : body["logprobs"]) {
      if (v.is_null()) {
        out.emplace_back(std::nullopt);
      } else if (v.is_number()) {
        out.emplace_back(v.get<double>() * factor);
      } else {
        throw ProtocolError("'logprobs' entries must be numbers or null");
      }
    }
    return out;
  }

  double masked_logprob(const MaskedLogprobRequest& req) override {
    check_masked_request(req);
    const json body = expect_ok(
        round_trip("POST", "/v1/masked_logprob",
                   masked_request_to_json(req).dump()),
        "/v1/masked_logprob");
    return extract_logprob(body, response_base_factor(body),
                           "/v1/masked_logprob");
  }

  std::vector<double> masked_logprob_batch(
      const std::vector<MaskedLogprobRequest>& reqs) override {
    if (reqs.empty()) return {};
    if (!opts_.enable_batch ||
        !batch_supported_.load(std::memory_order_relaxed)) {
      return Scorer::masked_logprob_batch(reqs);
    }
    for (const MaskedLogprobRequest& req : reqs) check_masked_request(req);
    ordered_json payload;
    payload["queries"] = ordered_json::array();
    for (const MaskedLogprobRequest& req : reqs) {
      payload["queries"].push_back(masked_request_to_json(req));
    }
    WireResponse res =
        round_trip("POST", "/v1/masked_logprob_batch", payload.dump());
    if (res.status == 404) {
      // Backend has no batch endpoint; remember and never ask again.
      batch_supported_.store(false, std::memory_order_relaxed);
      return Scorer::masked_logprob_batch(reqs);
    }
    const json body = expect_ok(std::move(res), "/v1/masked_logprob_batch");
    if (!body.contains("results") || !body["results"].is_array()) {
      throw ProtocolError("batch response lacks a 'results' array");
    }
    if (body["results"].size() != reqs.size()) {
      throw ProtocolError("batch response has " +
                          std::to_string(body["results"].size()) +
                          " results for " + std::to_string(reqs.size()) +
                          " queries");
    }
    const double factor = response_base_factor(body);
    std::vector<double> out;
    out.reserve(reqs.size());
    for (const json& r : body["results"]) {
      out.push_back(extract_logprob(r, factor, "/v1/masked_logprob_batch"));
    }
    return out;
  }

 private:
  struct WireResponse {
    int status = 0;
    json body;  // parsed when possible, otherwise null
  };

  // Pooled, keep-alive HTTP clients; the semaphore caps concurrent requests.
  struct ClientLease {
    HttpScorer& owner;
    std::unique_ptr<httplib::Client> client;
    ClientLease(HttpScorer& o) : owner(o) {
      owner.in_flight_.acquire();
      std::lock_guard<std::mutex> lock(owner.pool_mu_);
      if (!owner.pool_.empty()) {
        client = std::move(owner.pool_.back());
        owner.pool_.pop_back();
      } else {
        client = std::make_unique<httplib::Client>(owner.base_url_);
        client->set_connection_timeout(owner.opts_.connect_timeout_s, 0);
        client->set_read_timeout(owner.opts_.read_timeout_s, 0);
        client->set_write_timeout(owner.opts_.read_timeout_s, 0);
      }
    }
    ~ClientLease() {
      {
        std::lock_guard<std::mutex> lock(owner.pool_mu_);
        owner.pool_.push_back(std::move(client));
      }
      owner.in_flight_.release();
    }
  };

  void require_utf8(const std::string& text) const {
    if (!is_valid_utf8(text)) {
      throw ProtocolError(
          "statement text is not valid UTF-8; refusing to send it to the "
          "backend");
    }
  }

  httplib::Headers headers() const {
    httplib::Headers h;
    if (!opts_.auth_token.empty()) {
      h.emplace("Authorization", "Bearer " + opts_.auth_token);
    }
    return h;
  }

  WireResponse round_trip(const char* method, const std::string& path,
                          const std::string& body) {
    std::string last_error;
    for (int attempt = 1; attempt <= opts_.max_attempts; ++attempt) {
      if (attempt > 1) {
        const int delay = opts_.backoff_initial_ms * (1 << (attempt - 2));
        std::this_thread::sleep_for(
            std::chrono::milliseconds(delay + jitter_ms()));
      }
      httplib::Result result = [&] {
        ClientLease lease(*this);
        if (std::string_view(method) == "GET") {
          return lease.client->Get(path, headers());
        }
        return lease.client->Post(path, headers(), body, "application/json");
      }();
      if (!result) {
        last_error = httplib::to_string(result.error());
        continue;  // transport failure -> retry
      }
      if (retryable_status(result->status)) {
        last_error = "HTTP " + std::to_string(result->status);
        continue;
      }
      WireResponse out;
      out.status = result->status;
      if (!result->body.empty()) {
        out.body = json::parse(result->body, nullptr, false);
        if (out.body.is_discarded()) {
          if (out.status == 200) {
            throw ProtocolError("backend sent invalid JSON for " + path);
          }
          out.body = nullptr;
        }
      }
      return out;
    }
    throw BackendError("backend unreachable: " + std::to_string(
                           opts_.max_attempts) + " attempts failed for " +
                       base_url_ + path + " (last error: " + last_error + ")");
  }

  static json expect_ok(WireResponse res, const std::string& path) {
    if (res.status == 200) return std::move(res.body);
    std::string detail;
    if (res.body.is_object() && res.body.contains("error") &&
        res.body["error"].is_string()) {
      detail = ": " + res.body["error"].get<std::string>();
    }
    throw BackendError("backend returned HTTP " + std::to_string(res.status) +
                       " for " + path + detail);
  }

  static std::string field_str(const json& j, const char* key,
                               const std::string& path) {
    if (!j.contains(key) || !j[key].is_string()) {
      throw ProtocolError(path + " response lacks string field '" +
                          std::string(key) + "'");
    }
    return j[key].get<std::string>();
  }

  double response_base_factor(const json& body) {
    if (body.is_object() && body.contains("base")) {
      if (!body["base"].is_string()) {
        throw ProtocolError("'base' must be a string");
      }
      return log_base_factor(
          log_base_from_string(body["base"].get<std::string>()));
    }
    // No per-response base: fall back to the identity's declared base.
    return log_base_factor(identity().base);
  }

  static double extract_logprob(const json& j, double factor,
                                const std::string& path) {
    if (!j.is_object() || !j.contains("logprob") || !j["logprob"].is_number()) {
      throw ProtocolError(path + " response lacks a numeric 'logprob'");
    }
    return j["logprob"].get<double>() * factor;
  }

  std::string base_url_;
  HttpScorerOptions opts_;

  std::mutex identity_mu_;
  bool identity_loaded_ = false;
  BackendIdentity identity_;

  std::mutex pool_mu_;
  std::vector<std::unique_ptr<httplib::Client>> pool_;
  std::counting_semaphore<4096> in_flight_;

  std::atomic<bool> batch_supported_{true};
};

}  // namespace

std::unique_ptr<Scorer> make_http_scorer(std::string base_url,
                                         HttpScorerOptions options) {
  return std::make_unique<HttpScorer>(std::move(base_url), options);
}

}  // namespace lmprobe
