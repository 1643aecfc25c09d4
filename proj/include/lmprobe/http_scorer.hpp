#pragma once

#include <memory>
#include <string>

#include "lmprobe/scorer.hpp"

namespace lmprobe {

struct HttpScorerOptions {
  int max_attempts = 3;           // total attempts per request
  int backoff_initial_ms = 250;   // doubled each retry, plus jitter
  int connect_timeout_s = 5;
  int read_timeout_s = 120;
  size_t max_in_flight = 8;       // concurrent requests to the backend
  std::string auth_token;         // sent as "Authorization: Bearer <token>"
  bool enable_batch = true;       // try /v1/masked_logprob_batch once
};

// Client for the scoring wire protocol:
//   GET  /v1/identity            -> {name, revision, base, supported_modes}
//   POST /v1/tokenize            {text} -> {tokens: [...]}
//   POST /v1/causal_logprobs     {text} -> {logprobs: [null, ...], base}
//   POST /v1/masked_logprob      {token_ids, masked_positions,
//                                 target_position} -> {logprob, base}
//   POST /v1/masked_logprob_batch {queries: [...]} -> {results: [...], base}
//
// Transport failures, HTTP 429 and 5xx are retried with exponential backoff;
// logprobs are converted to natural log using the response's declared base;
// a 404 on the batch endpoint permanently falls back to per-query requests.
// Outbound text is validated as UTF-8 before any bytes hit the wire.
std::unique_ptr<Scorer> make_http_scorer(std::string base_url,
                                         HttpScorerOptions options = {});

}  // namespace lmprobe
