#include "lmprobe/scoring.hpp"

#include <algorithm>
#include <numeric>

#include "lmprobe/error.hpp"

namespace lmprobe {

std::string to_string(ScoringMode m) {
  return m == ScoringMode::Causal ? "causal" : "masked";
}
std::string to_string(PllStrategy s) {
  return s == PllStrategy::Original ? "original" : "within-word-l2r";
}
std::string to_string(Reduction r) {
  return r == Reduction::Sum ? "sum" : "mean";
}
std::string to_string(Scope s) {
  return s == Scope::Full ? "full" : "answer-only";
}

ScoringMode scoring_mode_from_string(const std::string& s) {
  if (s == "causal") return ScoringMode::Causal;
  if (s == "masked") return ScoringMode::Masked;
  throw ConfigError("unknown scoring mode '" + s + "'");
}
PllStrategy pll_strategy_from_string(const std::string& s) {
  if (s == "original") return PllStrategy::Original;
  if (s == "within-word-l2r") return PllStrategy::WithinWordL2R;
  throw ConfigError("unknown pll strategy '" + s + "'");
}
Reduction reduction_from_string(const std::string& s) {
  if (s == "sum") return Reduction::Sum;
  if (s == "mean") return Reduction::Mean;
  throw ConfigError("unknown reduction '" + s + "'");
}
Scope scope_from_string(const std::string& s) {
  if (s == "full") return Scope::Full;
  if (s == "answer-only") return Scope::AnswerOnly;
  throw ConfigError("unknown scope '" + s + "'");
}

void ScoringConfig::validate() const {
  if (mode == ScoringMode::Masked && !pll_strategy) {
    throw ConfigError("masked mode requires a pll strategy");
  }
  if (mode == ScoringMode::Causal && pll_strategy) {
    throw ConfigError("pll strategy is only meaningful in masked mode");
  }
}

std::vector<MaskQuery> pll_schedule(const TokenizedStatement& ts,
                                    PllStrategy strategy) {
  const size_t n = ts.tokens.size();
  std::vector<MaskQuery> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    MaskQuery q;
    q.target_position = i;
    q.masked_positions.push_back(i);
    if (strategy == PllStrategy::WithinWordL2R) {
      for (size_t j = i + 1;
           j < n && ts.tokens[j].word_index == ts.tokens[i].word_index; ++j) {
        q.masked_positions.push_back(j);
      }
    }
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<size_t> answer_token_positions(const TokenizedStatement& ts,
                                           CharSpan span) {
  std::vector<size_t> out;
  for (size_t i = 0; i < ts.tokens.size(); ++i) {
    const Token& t = ts.tokens[i];
    if (t.char_start < span.end && t.char_end > span.begin) {
      out.push_back(i);
    }
  }
  return out;
}

double reduce(std::span<const double> values, Reduction reduction) {
  if (values.empty()) {
    throw ConfigError("cannot reduce an empty score set");
  }
  const double total = std::accumulate(values.begin(), values.end(), 0.0);
  return reduction == Reduction::Sum
             ? total
             : total / static_cast<double>(values.size());
}

namespace {

std::string statement_context(const Statement& st) {
  return "instance '" + st.instance_id + "' answer '" + st.answer_id +
         "' template " + std::to_string(st.template_index) + ": ";
}

// Re-raise backend/protocol failures with the statement identity attached so
// the operator can see which query failed.
template <typename Fn>
auto with_statement_context(const Statement& st, Fn&& fn) {
  try {
    return fn();
  } catch (const BackendError& e) {
    throw BackendError(statement_context(st) + e.what());
  } catch (const ProtocolError& e) {
    throw ProtocolError(statement_context(st) + e.what());
  }
}

std::vector<size_t> scoped_positions(const TokenizedStatement& ts,
                                     const Statement& st,
                                     const ScoringConfig& config) {
  if (config.scope == Scope::Full) {
    std::vector<size_t> all(ts.tokens.size());
    std::iota(all.begin(), all.end(), size_t{0});
    return all;
  }
  return answer_token_positions(ts, st.answer_span);
}

}  // namespace

ScoreRecord score_causal(const Statement& st, Scorer& scorer,
                         const ScoringConfig& config) {
  config.validate();
  if (config.mode != ScoringMode::Causal) {
    throw ConfigError("score_causal called with a non-causal config");
  }
  if (!scorer.identity().supports_causal) {
    throw ConfigError("backend '" + scorer.identity().name +
                      "' does not support causal scoring");
  }

  return with_statement_context(st, [&] {
    const TokenizedStatement ts = scorer.tokenize(st.text);
    validate_tokenization(st.text, ts);
    std::vector<std::optional<double>> logprobs =
        scorer.causal_logprobs(st.text);
    if (logprobs.size() != ts.tokens.size()) {
      throw ProtocolError("backend returned " +
                          std::to_string(logprobs.size()) + " logprobs for " +
                          std::to_string(ts.tokens.size()) + " tokens");
    }
    if (!logprobs.empty() && logprobs[0].has_value()) {
      throw ProtocolError(
          "causal logprob for the first token must be undefined (null)");
    }

    const std::vector<size_t> scoped = scoped_positions(ts, st, config);
    if (scoped.empty()) {
      throw DataError("no tokens in scope for statement '" + st.text + "'");
    }
    std::vector<double> values;
    values.reserve(scoped.size());
    for (size_t pos : scoped) {
      if (logprobs[pos]) values.push_back(*logprobs[pos]);
    }

    ScoreRecord rec;
    rec.statement = st;
    rec.config = config;
    rec.per_token_logprobs = std::move(logprobs);
    if (values.empty()) {
      // Every scoped position is undefined (e.g. a one-token answer at the
      // start of the statement).  An empty sum is 0; an empty mean is not
      // a number.
      if (config.reduction == Reduction::Mean) {
        throw DataError("no scored tokens for statement '" + st.text +
                        "' (all scoped logprobs are undefined)");
      }
      rec.score = 0.0;
    } else {
      rec.score = reduce(values, config.reduction);
    }
    return rec;
  });
}

ScoreRecord score_masked(const Statement& st, Scorer& scorer,
                         const ScoringConfig& config) {
  config.validate();
  if (config.mode != ScoringMode::Masked) {
    throw ConfigError("score_masked called with a non-masked config");
  }
  if (!scorer.identity().supports_masked) {
    throw ConfigError("backend '" + scorer.identity().name +
                      "' does not support masked scoring");
  }

  return with_statement_context(st, [&] {
    const TokenizedStatement ts = scorer.tokenize(st.text);
    validate_tokenization(st.text, ts);

    const std::vector<MaskQuery> schedule =
        pll_schedule(ts, *config.pll_strategy);
    std::vector<size_t> scoped = scoped_positions(ts, st, config);
    if (scoped.empty()) {
      throw DataError("no tokens in scope for statement '" + st.text + "'");
    }

    std::vector<int64_t> ids;
    ids.reserve(ts.tokens.size());
    for (const Token& t : ts.tokens) ids.push_back(t.id);

    std::vector<MaskedLogprobRequest> requests;
    requests.reserve(scoped.size());
    for (size_t pos : scoped) {
      MaskedLogprobRequest req;
      req.token_ids = ids;
      req.masked_positions = schedule[pos].masked_positions;
      req.target_position = schedule[pos].target_position;
      requests.push_back(std::move(req));
    }
    const std::vector<double> values = scorer.masked_logprob_batch(requests);
    if (values.size() != requests.size()) {
      throw ProtocolError("backend returned " + std::to_string(values.size()) +
                          " results for " + std::to_string(requests.size()) +
                          " masked queries");
    }

    ScoreRecord rec;
    rec.statement = st;
    rec.config = config;
    rec.per_token_logprobs.assign(ts.tokens.size(), std::nullopt);
    for (size_t i = 0; i < scoped.size(); ++i) {
      rec.per_token_logprobs[scoped[i]] = values[i];
    }
    rec.score = reduce(values, config.reduction);
    return rec;
  });
}

std::vector<ScoreRecord> score_instance(const Instance& instance,
                                        const Relation& relation,
                                        int template_index, Scorer& scorer,
                                        const ScoringConfig& config) {
  config.validate();
  std::vector<ScoreRecord> out;
  out.reserve(relation.answer_space.size());
  for (const Statement& st :
       enumerate_statements(instance, relation, template_index)) {
    out.push_back(config.mode == ScoringMode::Causal
                      ? score_causal(st, scorer, config)
                      : score_masked(st, scorer, config));
  }
  return out;
}

}  // namespace lmprobe
