#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lmprobe/scorer.hpp"
#include "lmprobe/statement.hpp"

namespace lmprobe {

enum class ScoringMode { Causal, Masked };
enum class PllStrategy { Original, WithinWordL2R };
enum class Reduction { Sum, Mean };
enum class Scope { Full, AnswerOnly };

std::string to_string(ScoringMode m);
std::string to_string(PllStrategy s);
std::string to_string(Reduction r);
std::string to_string(Scope s);
ScoringMode scoring_mode_from_string(const std::string& s);
PllStrategy pll_strategy_from_string(const std::string& s);
Reduction reduction_from_string(const std::string& s);
Scope scope_from_string(const std::string& s);

struct ScoringConfig {
  ScoringMode mode = ScoringMode::Causal;
  // Present exactly when mode == Masked (validate() enforces).
  std::optional<PllStrategy> pll_strategy;
  Reduction reduction = Reduction::Sum;
  Scope scope = Scope::Full;

  void validate() const;
  bool operator==(const ScoringConfig&) const = default;
};

// One pseudo-log-likelihood mask set with its scored (target) position.
struct MaskQuery {
  std::vector<size_t> masked_positions;  // strictly increasing
  size_t target_position = 0;

  bool operator==(const MaskQuery&) const = default;
};

// One query per token position, ordered by target position:
//  - Original: mask only the target token.
//  - WithinWordL2R: mask the target plus every later token of the same word,
//    so each word's mask sets are suffixes of its token span.
std::vector<MaskQuery> pll_schedule(const TokenizedStatement& ts,
                                    PllStrategy strategy);

// Token positions whose [char_start, char_end) overlaps the span.  A span
// boundary inside a token counts the whole token.
std::vector<size_t> answer_token_positions(const TokenizedStatement& ts,
                                           CharSpan span);

// SUM or MEAN of values; empty input is a ConfigError.
double reduce(std::span<const double> values, Reduction reduction);

struct ScoreRecord {
  Statement statement;
  double score = 0.0;
  // Aligned with the statement's tokens; entries are null where no logprob
  // is defined (the first causal token, or masked positions never queried
  // under the current scope).
  std::vector<std::optional<double>> per_token_logprobs;
  ScoringConfig config;
};

// Causal path: sum/mean of next-token logprobs over the scoped positions.
// Position 0 has no logprob: under SUM it contributes 0, under MEAN it is
// excluded from the denominator.  A statement whose scoped positions have no
// defined logprob at all is an error under MEAN ("no scored tokens") and
// scores 0 under SUM.
ScoreRecord score_causal(const Statement& st, Scorer& scorer,
                         const ScoringConfig& config);

// Masked path: one masked query per scoped position per the configured
// schedule, reduced to one score.
ScoreRecord score_masked(const Statement& st, Scorer& scorer,
                         const ScoringConfig& config);

// All answers of the relation for one instance and template, in answer-space
// order.  Any failure propagates; partial results are discarded.
std::vector<ScoreRecord> score_instance(const Instance& instance,
                                        const Relation& relation,
                                        int template_index, Scorer& scorer,
                                        const ScoringConfig& config);

}  // namespace lmprobe
