#include "lmprobe/scorer.hpp"

#include <cctype>
#include <cmath>

#include "lmprobe/error.hpp"

namespace lmprobe {

std::string to_string(LogBase b) {
  switch (b) {
    case LogBase::Natural: return "natural";
    case LogBase::Base2: return "base2";
    case LogBase::Base10: return "base10";
  }
  return "natural";
}

LogBase log_base_from_string(const std::string& s) {
  if (s == "natural") return LogBase::Natural;
  if (s == "base2") return LogBase::Base2;
  if (s == "base10") return LogBase::Base10;
  throw ProtocolError("unknown log base '" + s + "'");
}

double log_base_factor(LogBase b) {
  switch (b) {
    case LogBase::Natural: return 1.0;
    case LogBase::Base2: return std::log(2.0);
    case LogBase::Base10: return std::log(10.0);
  }
  return 1.0;
}

void check_masked_request(const MaskedLogprobRequest& req) {
  if (req.masked_positions.empty()) {
    throw ConfigError("masked query has no masked positions");
  }
  bool target_masked = false;
  size_t prev = 0;
  for (size_t i = 0; i < req.masked_positions.size(); ++i) {
    const size_t p = req.masked_positions[i];
    if (p >= req.token_ids.size()) {
      throw ConfigError("masked position " + std::to_string(p) +
                        " out of range for " +
                        std::to_string(req.token_ids.size()) + " tokens");
    }
    if (i > 0 && p <= prev) {
      throw ConfigError("masked positions must be strictly increasing");
    }
    prev = p;
    if (p == req.target_position) target_masked = true;
  }
  if (!target_masked) {
    throw ConfigError("target position " +
                      std::to_string(req.target_position) +
                      " is not among the masked positions");
  }
}

void validate_tokenization(const std::string& text,
                           const TokenizedStatement& ts) {
  size_t cursor = 0;
  for (size_t i = 0; i < ts.tokens.size(); ++i) {
    const Token& tok = ts.tokens[i];
    if (tok.char_end < tok.char_start || tok.char_end > text.size()) {
      throw ProtocolError("token " + std::to_string(i) +
                          " has out-of-range offsets");
    }
    if (tok.char_start < cursor) {
      throw ProtocolError("token " + std::to_string(i) +
                          " overlaps the previous token");
    }
    for (size_t p = cursor; p < tok.char_start; ++p) {
      if (!std::isspace(static_cast<unsigned char>(text[p]))) {
        throw ProtocolError("non-whitespace gap before token " +
                            std::to_string(i));
      }
    }
    if (text.compare(tok.char_start, tok.char_end - tok.char_start,
                     tok.surface) != 0) {
      throw ProtocolError("token " + std::to_string(i) + " surface '" +
                          tok.surface + "' does not match its offsets");
    }
    if (i > 0 && tok.word_index < ts.tokens[i - 1].word_index) {
      throw ProtocolError("token word indices must be non-decreasing");
    }
    cursor = tok.char_end;
  }
  for (size_t p = cursor; p < text.size(); ++p) {
    if (!std::isspace(static_cast<unsigned char>(text[p]))) {
      throw ProtocolError("non-whitespace text after the last token");
    }
  }
}

std::vector<double> Scorer::masked_logprob_batch(
    const std::vector<MaskedLogprobRequest>& reqs) {
  std::vector<double> out;
  out.reserve(reqs.size());
  for (const MaskedLogprobRequest& req : reqs) {
    out.push_back(masked_logprob(req));
  }
  return out;
}

TokenizedStatement CountingScorer::tokenize(const std::string& text) {
  tokenize_.fetch_add(1, std::memory_order_relaxed);
  return inner_.tokenize(text);
}

std::vector<std::optional<double>> CountingScorer::causal_logprobs(
    const std::string& text) {
  causal_.fetch_add(1, std::memory_order_relaxed);
  return inner_.causal_logprobs(text);
}

double CountingScorer::masked_logprob(const MaskedLogprobRequest& req) {
  masked_.fetch_add(1, std::memory_order_relaxed);
  return inner_.masked_logprob(req);
}

std::vector<double> CountingScorer::masked_logprob_batch(
    const std::vector<MaskedLogprobRequest>& reqs) {
  masked_.fetch_add(reqs.size(), std::memory_order_relaxed);
  return inner_.masked_logprob_batch(reqs);
}

CountingScorer::Counts CountingScorer::counts() const {
  return Counts{tokenize_.load(), causal_.load(), masked_.load()};
}

}  // namespace lmprobe
