#include "lmprobe/reference_scorer.hpp"

#include <cctype>

#include "lmprobe/error.hpp"
#include "lmprobe/statement.hpp"
#include "lmprobe/text_util.hpp"

namespace lmprobe {

namespace {

bool is_peelable_punct(char c) {
  return c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':';
}

int64_t surface_id(const std::string& surface) {
  return static_cast<int64_t>(fnv1a64(surface));
}

const int64_t kMaskId = static_cast<int64_t>(fnv1a64("<mask>"));

// Map a 64-bit hash to a double in [0, 1).
double unit_double(uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double hash_logprob(uint64_t h) { return -(1.0 + 4.0 * unit_double(h)); }

}  // namespace

TokenizedStatement whitespace_tokenize(const std::string& text) {
  TokenizedStatement ts;
  int word_index = 0;
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    size_t j = i;
    while (j < n && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j == i) break;
    // Peel trailing punctuation (keep at least one leading char in the host
    // token so a bare "." stays a single token).
    size_t core_end = j;
    while (core_end > i + 1 && is_peelable_punct(text[core_end - 1])) {
      --core_end;
    }
    auto push = [&](size_t b, size_t e) {
      Token tok;
      tok.surface = text.substr(b, e - b);
      tok.id = surface_id(tok.surface);
      tok.word_index = word_index;
      tok.char_start = b;
      tok.char_end = e;
      ts.tokens.push_back(std::move(tok));
    };
    push(i, core_end);
    for (size_t p = core_end; p < j; ++p) push(p, p + 1);
    ++word_index;
    i = j;
  }
  return ts;
}

namespace {

class ReferenceScorer final : public Scorer {
 public:
  explicit ReferenceScorer(uint64_t seed) : seed_(seed) {
    identity_.name = "reference-hash";
    identity_.revision = "seed-" + std::to_string(seed);
    identity_.base = LogBase::Natural;
  }

  const BackendIdentity& identity() override { return identity_; }

  TokenizedStatement tokenize(const std::string& text) override {
    return whitespace_tokenize(text);
  }

  std::vector<std::optional<double>> causal_logprobs(
      const std::string& text) override {
    const TokenizedStatement ts = whitespace_tokenize(text);
    std::vector<std::optional<double>> out(ts.tokens.size());
    for (size_t i = 1; i < ts.tokens.size(); ++i) {
      Fnv1a64 h;
      h.update_u64(seed_);
      h.update("causal");
      for (size_t k = 0; k < i; ++k) {
        h.update_u64(static_cast<uint64_t>(ts.tokens[k].id));
      }
      h.update_u64(static_cast<uint64_t>(ts.tokens[i].id));
      out[i] = hash_logprob(h.digest());
    }
    return out;
  }

  double masked_logprob(const MaskedLogprobRequest& req) override {
    check_masked_request(req);
    Fnv1a64 h;
    h.update_u64(seed_);
    h.update("masked");
    size_t m = 0;
    for (size_t i = 0; i < req.token_ids.size(); ++i) {
      const bool masked = m < req.masked_positions.size() &&
                          req.masked_positions[m] == i;
      if (masked) ++m;
      h.update_u64(static_cast<uint64_t>(masked ? kMaskId : req.token_ids[i]));
    }
    h.update_u64(req.target_position);
    h.update_u64(static_cast<uint64_t>(req.token_ids[req.target_position]));
    return hash_logprob(h.digest());
  }

 private:
  uint64_t seed_;
  BackendIdentity identity_;
};

class OracleScorer final : public Scorer {
 public:
  OracleScorer(std::unordered_map<std::string, RankIntent> truth,
               std::string name)
      : truth_(std::move(truth)) {
    identity_.name = std::move(name);
    identity_.revision = "1";
    identity_.base = LogBase::Natural;
  }

  const BackendIdentity& identity() override { return identity_; }

  TokenizedStatement tokenize(const std::string& text) override {
    TokenizedStatement ts = whitespace_tokenize(text);
    std::string key = ids_key(ts);
    std::lock_guard<std::mutex> lock(mu_);
    seen_ids_.emplace(std::move(key), text);
    return ts;
  }

  std::vector<std::optional<double>> causal_logprobs(
      const std::string& text) override {
    const double total = total_for(text);
    const size_t n = whitespace_tokenize(text).tokens.size();
    if (n < 2) {
      throw BackendError("oracle needs at least 2 tokens, got '" + text + "'");
    }
    std::vector<std::optional<double>> out(n);
    for (size_t i = 1; i < n; ++i) out[i] = total / static_cast<double>(n - 1);
    return out;
  }

  double masked_logprob(const MaskedLogprobRequest& req) override {
    check_masked_request(req);
    std::string text;
    {
      Fnv1a64 h;
      for (int64_t id : req.token_ids) h.update_u64(static_cast<uint64_t>(id));
      std::lock_guard<std::mutex> lock(mu_);
      auto it = seen_ids_.find(std::to_string(h.digest()) + ":" +
                               std::to_string(req.token_ids.size()));
      if (it == seen_ids_.end()) {
        throw BackendError(
            "oracle masked query for an unseen token sequence (tokenize "
            "first)");
      }
      text = it->second;
    }
    return total_for(text) / static_cast<double>(req.token_ids.size());
  }

 private:
  static std::string ids_key(const TokenizedStatement& ts) {
    Fnv1a64 h;
    for (const Token& t : ts.tokens) h.update_u64(static_cast<uint64_t>(t.id));
    return std::to_string(h.digest()) + ":" + std::to_string(ts.tokens.size());
  }

  double total_for(const std::string& text) const {
    auto it = truth_.find(text);
    if (it == truth_.end()) {
      throw BackendError("oracle has no truth entry for statement '" + text +
                         "'");
    }
    return it->second == RankIntent::Preferred ? -1.0 : -10.0;
  }

  std::unordered_map<std::string, RankIntent> truth_;
  BackendIdentity identity_;
  std::mutex mu_;
  std::unordered_map<std::string, std::string> seen_ids_;  // ids key -> text
};

}  // namespace

std::unique_ptr<Scorer> make_reference_scorer(uint64_t seed) {
  return std::make_unique<ReferenceScorer>(seed);
}

std::unique_ptr<Scorer> make_oracle_scorer(
    std::unordered_map<std::string, RankIntent> truth, std::string name) {
  return std::make_unique<OracleScorer>(std::move(truth), std::move(name));
}

std::string to_string(OracleKind k) {
  switch (k) {
    case OracleKind::Perfect: return "oracle";
    case OracleKind::Anti: return "anti-oracle";
    case OracleKind::Half: return "half-oracle";
  }
  return "oracle";
}

std::unordered_map<std::string, RankIntent> make_oracle_truth(
    const Dataset& dataset, OracleKind kind) {
  std::unordered_map<std::string, RankIntent> truth;
  auto set_intent = [&](const std::string& text, RankIntent intent) {
    auto [it, inserted] = truth.emplace(text, intent);
    if (!inserted && it->second != intent) {
      throw DataError("oracle truth collision: statement '" + text +
                      "' would need both intents");
    }
  };

  size_t ordinal = 0;
  for (const Relation& rel : dataset.relations) {
    for (const Instance& ins : rel.instances) {
      // The answer the oracle should put on top for this instance.
      std::string preferred_id = ins.correct_answer_id;
      const bool invert =
          kind == OracleKind::Anti ||
          (kind == OracleKind::Half && ordinal % 2 == 1);
      if (invert) {
        for (const Answer& a : rel.answer_space) {
          if (a.answer_id != ins.correct_answer_id) {
            preferred_id = a.answer_id;
            break;
          }
        }
      }
      for (size_t t = 0; t < rel.templates.size(); ++t) {
        for (const Statement& st :
             enumerate_statements(ins, rel, static_cast<int>(t))) {
          set_intent(st.text, st.answer_id == preferred_id
                                  ? RankIntent::Preferred
                                  : RankIntent::Dispreferred);
        }
      }
      ++ordinal;
    }
  }
  return truth;
}

}  // namespace lmprobe
