#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>

#include "lmprobe/dataset.hpp"
#include "lmprobe/scorer.hpp"

namespace lmprobe {

// Deterministic tokenizer shared by the built-in backends: words split on
// whitespace; trailing sentence punctuation (. , ! ? ; :) is peeled off into
// separate tokens that keep the host word's word_index.  Token ids are a
// 64-bit hash of the surface form.
TokenizedStatement whitespace_tokenize(const std::string& text);

// Stateless hash-based backend: logprobs are pseudo-random in [-5, -1],
// fully determined by (seed, query).  Same seed + same query -> identical
// value on every platform; no model weights involved.  Thread-safe.
std::unique_ptr<Scorer> make_reference_scorer(uint64_t seed);

// ---------------------------------------------------------------------------
// Oracle backends: rank statements by a known truth assignment, used to pin
// end-to-end expectations (a perfect oracle must score 1.0, an inverted one
// 0.0, an alternating one exactly 0.5 on even instance counts).

enum class RankIntent { Preferred, Dispreferred };

// truth maps exact statement text -> intent.  Preferred statements get total
// logprob -1, dispreferred -10, spread uniformly over the scored tokens, so
// the ranking is invariant to token counts under SUM reduction.
std::unique_ptr<Scorer> make_oracle_scorer(
    std::unordered_map<std::string, RankIntent> truth, std::string name);

enum class OracleKind { Perfect, Anti, Half };

std::string to_string(OracleKind k);

// Build a truth table covering every (instance, template, answer) statement
// in the dataset.  Perfect prefers the correct answer; Anti prefers a fixed
// wrong answer per instance; Half alternates Perfect/Anti by the instance's
// global ordinal, giving exactly 50% accuracy on even instance counts.
std::unordered_map<std::string, RankIntent> make_oracle_truth(
    const Dataset& dataset, OracleKind kind);

}  // namespace lmprobe
