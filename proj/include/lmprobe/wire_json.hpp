#pragma once

#include <json.hpp>

#include <string>

#include "lmprobe/scorer.hpp"

namespace lmprobe {

// JSON shapes shared by the wire protocol and the score cache.  Parsing is
// strict: missing or mistyped fields raise ProtocolError.

nlohmann::ordered_json token_to_json(const Token& token);
Token token_from_json(const nlohmann::json& j);

nlohmann::ordered_json tokens_to_json(const TokenizedStatement& ts);
TokenizedStatement tokens_from_json(const nlohmann::json& j);

nlohmann::ordered_json masked_request_to_json(const MaskedLogprobRequest& req);
MaskedLogprobRequest masked_request_from_json(const nlohmann::json& j);

// Canonical payload string for cache digests: stable, order-preserving text
// rendering of a masked query.
std::string canonical_masked_payload(const MaskedLogprobRequest& req);

}  // namespace lmprobe
