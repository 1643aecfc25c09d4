#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace lmprobe {

// Log base a backend reports in.  Everything internal is natural log; the
// HTTP client converts on receipt.
enum class LogBase { Natural, Base2, Base10 };

std::string to_string(LogBase b);
LogBase log_base_from_string(const std::string& s);
double log_base_factor(LogBase b);  // multiply reported value by this -> ln

struct BackendIdentity {
  std::string name;
  std::string revision;
  LogBase base = LogBase::Natural;
  bool supports_causal = true;
  bool supports_masked = true;
};

struct Token {
  int64_t id = 0;
  std::string surface;
  int word_index = 0;     // tokens of one word share this
  size_t char_start = 0;  // byte offsets into the source text
  size_t char_end = 0;
};

struct TokenizedStatement {
  std::vector<Token> tokens;
};

// A pseudo-log-likelihood query: score the token at target_position with the
// tokens at masked_positions hidden.  target_position must be masked.
struct MaskedLogprobRequest {
  std::vector<int64_t> token_ids;
  std::vector<size_t> masked_positions;  // strictly increasing
  size_t target_position = 0;
};

// Throws ConfigError unless masked_positions is strictly increasing, within
// range, and contains target_position.
void check_masked_request(const MaskedLogprobRequest& req);

// Throws ProtocolError unless tokens cover the text consistently: surfaces
// match their [char_start, char_end) slice, offsets are ordered and
// non-overlapping, and gaps between tokens are whitespace only.
void validate_tokenization(const std::string& text,
                           const TokenizedStatement& ts);

// Backend abstraction.  All logprobs returned from these methods are natural
// log.  Implementations must be safe to call from multiple threads.
class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual const BackendIdentity& identity() = 0;

  virtual TokenizedStatement tokenize(const std::string& text) = 0;

  // One entry per token; the first entry is nullopt (nothing conditions it).
  virtual std::vector<std::optional<double>> causal_logprobs(
      const std::string& text) = 0;

  virtual double masked_logprob(const MaskedLogprobRequest& req) = 0;

  // Default implementation loops over masked_logprob; backends with a real
  // batch path override.  Results align with reqs.
  virtual std::vector<double> masked_logprob_batch(
      const std::vector<MaskedLogprobRequest>& reqs);
};

// Decorator counting calls that reach the wrapped scorer; used to prove cache
// transparency (a fully warmed cache issues zero backend calls).
class CountingScorer : public Scorer {
 public:
  explicit CountingScorer(Scorer& inner) : inner_(inner) {}

  const BackendIdentity& identity() override { return inner_.identity(); }
  TokenizedStatement tokenize(const std::string& text) override;
  std::vector<std::optional<double>> causal_logprobs(
      const std::string& text) override;
  double masked_logprob(const MaskedLogprobRequest& req) override;
  std::vector<double> masked_logprob_batch(
      const std::vector<MaskedLogprobRequest>& reqs) override;

  struct Counts {
    uint64_t tokenize = 0;
    uint64_t causal = 0;
    uint64_t masked = 0;  // individual masked queries, batch included
    uint64_t total() const { return tokenize + causal + masked; }
  };
  Counts counts() const;

 private:
  Scorer& inner_;
  std::atomic<uint64_t> tokenize_{0}, causal_{0}, masked_{0};
};

}  // namespace lmprobe
