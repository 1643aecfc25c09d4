#include "lmprobe/cache.hpp"

#include <ctime>
#include <iostream>

#include "lmprobe/error.hpp"
#include "lmprobe/text_util.hpp"
#include "lmprobe/wire_json.hpp"

namespace lmprobe {

using nlohmann::json;
using nlohmann::ordered_json;

ScoreCache::ScoreCache(std::filesystem::path file) : file_(std::move(file)) {
  if (file_.has_parent_path()) {
    std::filesystem::create_directories(file_.parent_path());
  }
  load_and_compact();
  out_.open(file_, std::ios::app);
  if (!out_) throw DataError("cannot open score cache " + file_.string());
}

void ScoreCache::load_and_compact() {
  std::ifstream in(file_);
  if (!in) return;  // fresh cache

  std::unordered_map<std::string, std::string> kinds;
  size_t corrupt = 0, duplicates = 0;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("key") ||
        !j["key"].is_string() || !j.contains("value")) {
      ++corrupt;
      std::cerr << "warning: skipping corrupt cache line " << file_.string()
                << ":" << line_no << "\n";
      continue;
    }
    const std::string key = j["key"].get<std::string>();
    auto [it, inserted] = entries_.emplace(key, j["value"]);
    if (inserted) {
      order_.push_back(key);
    } else {
      it->second = j["value"];  // last write wins
      ++duplicates;
    }
    kinds[key] = j.value("kind", std::string{});
  }
  in.close();

  if (corrupt == 0 && duplicates == 0) return;

  // Rewrite one clean record per key, preserving first-seen order.
  const std::filesystem::path tmp = file_.string() + ".compact";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    for (const std::string& key : order_) {
      ordered_json j;
      j["key"] = key;
      j["kind"] = kinds[key];
      j["value"] = entries_[key];
      j["created_at"] = static_cast<int64_t>(std::time(nullptr));
      out << j.dump() << "\n";
    }
  }
  std::filesystem::rename(tmp, file_);
}

std::optional<ordered_json> ScoreCache::get(const std::string& key) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ScoreCache::put(const std::string& key, std::string_view kind,
                     ordered_json value) {
  std::lock_guard<std::mutex> lock(mu_);
  ordered_json j;
  j["key"] = key;
  j["kind"] = std::string(kind);
  j["value"] = value;
  j["created_at"] = static_cast<int64_t>(std::time(nullptr));
  out_ << j.dump() << "\n";
  out_.flush();
  auto [it, inserted] = entries_.emplace(key, std::move(value));
  if (inserted) {
    order_.push_back(key);
  } else {
    it->second = j["value"];
  }
}

size_t ScoreCache::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return entries_.size();
}

std::string ScoreCache::key_digest(const BackendIdentity& identity,
                                   std::string_view kind,
                                   std::string_view payload) {
  std::string material;
  material.reserve(identity.name.size() + identity.revision.size() +
                   kind.size() + payload.size() + 3);
  material += identity.name;
  material += '\x1f';
  material += identity.revision;
  material += '\x1f';
  material += kind;
  material += '\x1f';
  material += payload;
  return sha256_hex(material);
}

// ---------------------------------------------------------------------------

TokenizedStatement CachedScorer::tokenize(const std::string& text) {
  const std::string key =
      ScoreCache::key_digest(inner_.identity(), "tokenize", text);
  if (auto hit = cache_.get(key)) {
    return tokens_from_json(*hit);
  }
  TokenizedStatement ts = inner_.tokenize(text);
  cache_.put(key, "tokenize", tokens_to_json(ts));
  return ts;
}

std::vector<std::optional<double>> CachedScorer::causal_logprobs(
    const std::string& text) {
  const std::string key =
      ScoreCache::key_digest(inner_.identity(), "causal_logprobs", text);
  auto decode = [](const json& arr) {
    if (!arr.is_array()) throw ProtocolError("cached causal value corrupted");
    std::vector<std::optional<double>> out;
    out.reserve(arr.size());
    for (const json& v : arr) {
      if (v.is_null()) {
        out.emplace_back(std::nullopt);
      } else {
        out.emplace_back(v.get<double>());
      }
    }
    return out;
  };
  if (auto hit = cache_.get(key)) {
    return decode(*hit);
  }
  std::vector<std::optional<double>> values = inner_.causal_logprobs(text);
  ordered_json arr = ordered_json::array();
  for (const auto& v : values) {
    if (v) {
      arr.push_back(*v);
    } else {
      arr.push_back(nullptr);
    }
  }
  cache_.put(key, "causal_logprobs", std::move(arr));
  return values;
}

double CachedScorer::masked_logprob(const MaskedLogprobRequest& req) {
  check_masked_request(req);
  const std::string key = ScoreCache::key_digest(
      inner_.identity(), "masked_logprob", canonical_masked_payload(req));
  if (auto hit = cache_.get(key)) {
    if (!hit->is_number()) {
      throw ProtocolError("cached masked value corrupted");
    }
    return hit->get<double>();
  }
  const double value = inner_.masked_logprob(req);
  cache_.put(key, "masked_logprob", value);
  return value;
}

std::vector<double> CachedScorer::masked_logprob_batch(
    const std::vector<MaskedLogprobRequest>& reqs) {
  std::vector<double> out(reqs.size(), 0.0);
  std::vector<size_t> miss_indices;
  std::vector<std::string> keys(reqs.size());
  for (size_t i = 0; i < reqs.size(); ++i) {
    check_masked_request(reqs[i]);
    keys[i] = ScoreCache::key_digest(inner_.identity(), "masked_logprob",
                                     canonical_masked_payload(reqs[i]));
    if (auto hit = cache_.get(keys[i])) {
      if (!hit->is_number()) {
        throw ProtocolError("cached masked value corrupted");
      }
      out[i] = hit->get<double>();
    } else {
      miss_indices.push_back(i);
    }
  }
  if (!miss_indices.empty()) {
    std::vector<MaskedLogprobRequest> misses;
    misses.reserve(miss_indices.size());
    for (size_t i : miss_indices) misses.push_back(reqs[i]);
    const std::vector<double> values = inner_.masked_logprob_batch(misses);
    if (values.size() != misses.size()) {
      throw ProtocolError("backend batch returned wrong result count");
    }
    for (size_t j = 0; j < miss_indices.size(); ++j) {
      out[miss_indices[j]] = values[j];
      cache_.put(keys[miss_indices[j]], "masked_logprob", values[j]);
    }
  }
  return out;
}

}  // namespace lmprobe
