#include "lmprobe/wire_json.hpp"

#include <sstream>

#include "lmprobe/error.hpp"

namespace lmprobe {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

const json& require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw ProtocolError(std::string("missing field '") + key + "'");
  }
  return j.at(key);
}

int64_t require_int(const json& j, const char* key) {
  const json& v = require(j, key);
  if (!v.is_number_integer()) {
    throw ProtocolError(std::string("field '") + key + "' must be an integer");
  }
  return v.get<int64_t>();
}

std::string require_str(const json& j, const char* key) {
  const json& v = require(j, key);
  if (!v.is_string()) {
    throw ProtocolError(std::string("field '") + key + "' must be a string");
  }
  return v.get<std::string>();
}

}  // namespace

ordered_json token_to_json(const Token& token) {
  ordered_json j;
  j["id"] = token.id;
  j["surface"] = token.surface;
  j["word_index"] = token.word_index;
  j["char_start"] = token.char_start;
  j["char_end"] = token.char_end;
  return j;
}

Token token_from_json(const json& j) {
  Token t;
  t.id = require_int(j, "id");
  t.surface = require_str(j, "surface");
  t.word_index = static_cast<int>(require_int(j, "word_index"));
  const int64_t start = require_int(j, "char_start");
  const int64_t end = require_int(j, "char_end");
  if (start < 0 || end < 0) {
    throw ProtocolError("token offsets must be non-negative");
  }
  t.char_start = static_cast<size_t>(start);
  t.char_end = static_cast<size_t>(end);
  return t;
}

ordered_json tokens_to_json(const TokenizedStatement& ts) {
  ordered_json arr = ordered_json::array();
  for (const Token& t : ts.tokens) arr.push_back(token_to_json(t));
  return arr;
}

TokenizedStatement tokens_from_json(const json& j) {
  if (!j.is_array()) throw ProtocolError("'tokens' must be an array");
  TokenizedStatement ts;
  ts.tokens.reserve(j.size());
  for (const json& t : j) ts.tokens.push_back(token_from_json(t));
  return ts;
}

ordered_json masked_request_to_json(const MaskedLogprobRequest& req) {
  ordered_json j;
  j["token_ids"] = req.token_ids;
  j["masked_positions"] = req.masked_positions;
  j["target_position"] = req.target_position;
  return j;
}

MaskedLogprobRequest masked_request_from_json(const json& j) {
  MaskedLogprobRequest req;
  const json& ids = require(j, "token_ids");
  const json& masked = require(j, "masked_positions");
  if (!ids.is_array() || !masked.is_array()) {
    throw ProtocolError("'token_ids' and 'masked_positions' must be arrays");
  }
  for (const json& v : ids) {
    if (!v.is_number_integer()) {
      throw ProtocolError("'token_ids' entries must be integers");
    }
    req.token_ids.push_back(v.get<int64_t>());
  }
  for (const json& v : masked) {
    if (!v.is_number_integer() || v.get<int64_t>() < 0) {
      throw ProtocolError(
          "'masked_positions' entries must be non-negative integers");
    }
    req.masked_positions.push_back(static_cast<size_t>(v.get<int64_t>()));
  }
  const int64_t target = require_int(j, "target_position");
  if (target < 0) throw ProtocolError("'target_position' must be >= 0");
  req.target_position = static_cast<size_t>(target);
  return req;
}

std::string canonical_masked_payload(const MaskedLogprobRequest& req) {
  std::ostringstream out;
  out << "ids=";
  for (size_t i = 0; i < req.token_ids.size(); ++i) {
    if (i) out << ",";
    out << req.token_ids[i];
  }
  out << ";masked=";
  for (size_t i = 0; i < req.masked_positions.size(); ++i) {
    if (i) out << ",";
    out << req.masked_positions[i];
  }
  out << ";target=" << req.target_position;
  return out.str();
}

}  // namespace lmprobe
