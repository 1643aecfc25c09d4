#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lmprobe/dataset.hpp"
#include "lmprobe/scoring.hpp"

namespace lmprobe {

// Numerically stable softmax (max-subtracted); invariant under a constant
// shift of the scores.
std::vector<double> softmax_scores(std::span<const double> scores);

// Normalized entropy H(p) / H(uniform) in [0, 1]: 1 for the uniform
// distribution, 0 for a point mass, independent of the log base.  Undefined
// (nullopt) for a single candidate.  Probabilities must be >= 0 and sum to 1
// within 1e-6 (DataError otherwise); 0 * log 0 counts as 0.
std::optional<double> entropy_uncertainty(std::span<const double> probabilities);

struct RankedResult {
  std::string instance_id;
  std::vector<size_t> order;  // record indices, best score first
  size_t predicted_index = 0; // order.front()
  size_t correct_index = 0;   // index of the correct answer's record
  size_t rank_of_correct = 0; // 1-based position of correct_index in order
  bool tie_flag = false;      // top score shared by 2+ answers
  std::vector<double> probabilities;  // softmax, input order
  std::optional<double> uncertainty;
};

// Rank one instance's answer scores: descending score, ties broken by input
// index (ascending) so results are deterministic.  All records must belong
// to one instance and share one ScoringConfig; the correct answer must be
// present exactly once.
RankedResult rank_answers(const std::vector<ScoreRecord>& records,
                          const std::string& correct_answer_id);

// Fraction of ranks <= k.  k >= 1, ranks non-empty.
double precision_at_k(std::span<const size_t> ranks, size_t k);

struct InstanceOutcome {
  std::string relation_id;
  std::string instance_id;
  bool hit = false;  // correct answer ranked first
};

struct TemplateOutcomes {
  int template_index = 0;
  std::vector<InstanceOutcome> outcomes;
};

struct BearScore {
  double mean = 0.0;
  double std_error = 0.0;  // sample sd (n-1) / sqrt(T); 0 when T == 1
  std::vector<double> per_template;
  size_t instance_count = 0;  // instances per template
};

// Probe score: per-template accuracy over all instances, then mean and
// standard error across templates.  Every template group must cover the same
// (relation, instance) set (DataError otherwise).
BearScore bear_score(const std::vector<TemplateOutcomes>& groups);

struct RandomBaseline {
  std::optional<double> overall;
  std::optional<double> one_to_one;
  std::optional<double> n_to_one;
};

// Expected accuracy of uniform guessing: mean over instances of 1/k.
RandomBaseline random_baseline(const Dataset& dataset);

struct MonteCarloBaseline {
  double accuracy = 0.0;
  double std_error = 0.0;  // sqrt(p(1-p)/trials)
  size_t trials = 0;
  uint64_t seed = 0;
};

// Simulate uniform guessing: each trial samples one instance uniformly,
// draws k i.i.d. scores, and counts a hit when the correct answer has the
// maximum.  Deterministic for a given seed on every platform.  `subset`
// restricts sampling to relations of one cardinality.
MonteCarloBaseline monte_carlo_baseline(
    const Dataset& dataset, size_t trials, uint64_t seed,
    std::optional<Cardinality> subset = std::nullopt);

}  // namespace lmprobe
