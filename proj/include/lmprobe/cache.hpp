#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lmprobe/scorer.hpp"

namespace lmprobe {

// Append-only JSONL score cache.  Each line is {"key": <sha256 hex>,
// "kind": ..., "value": ..., "created_at": <unix seconds>}.  Duplicate keys
// resolve last-write-wins; the file is compacted on open when duplicates or
// corrupt lines are found (corrupt lines are skipped with a warning, never
// fatal).  Keys digest (backend name, revision, query kind, canonical query
// payload), so caches are safely shared across configs but never across
// backends.  Values are stored in natural log.
class ScoreCache {
 public:
  explicit ScoreCache(std::filesystem::path file);

  std::optional<nlohmann::ordered_json> get(const std::string& key) const;
  void put(const std::string& key, std::string_view kind,
           nlohmann::ordered_json value);

  size_t size() const;
  const std::filesystem::path& path() const { return file_; }

  static std::string key_digest(const BackendIdentity& identity,
                                std::string_view kind,
                                std::string_view payload);

 private:
  void load_and_compact();

  std::filesystem::path file_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, nlohmann::ordered_json> entries_;
  std::vector<std::string> order_;  // first-seen key order, for compaction
  std::ofstream out_;
};

// Decorator that serves repeated queries from a ScoreCache.  Results are
// bit-identical to the wrapped scorer's: values pass through untouched.
class CachedScorer : public Scorer {
 public:
  CachedScorer(Scorer& inner, ScoreCache& cache)
      : inner_(inner), cache_(cache) {}

  const BackendIdentity& identity() override { return inner_.identity(); }
  TokenizedStatement tokenize(const std::string& text) override;
  std::vector<std::optional<double>> causal_logprobs(
      const std::string& text) override;
  double masked_logprob(const MaskedLogprobRequest& req) override;
  std::vector<double> masked_logprob_batch(
      const std::vector<MaskedLogprobRequest>& reqs) override;

 private:
  Scorer& inner_;
  ScoreCache& cache_;
};

}  // namespace lmprobe
