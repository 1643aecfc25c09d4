#include "lmprobe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "lmprobe/error.hpp"

namespace lmprobe {

std::vector<double> softmax_scores(std::span<const double> scores) {
  if (scores.empty()) throw ConfigError("softmax of an empty score set");
  const double mx = *std::max_element(scores.begin(), scores.end());
  std::vector<double> out(scores.size());
  double total = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - mx);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

std::optional<double> entropy_uncertainty(
    std::span<const double> probabilities) {
  if (probabilities.empty()) {
    throw DataError("uncertainty of an empty distribution");
  }
  double total = 0.0;
  for (double p : probabilities) {
    if (p < -1e-9 || !std::isfinite(p)) {
      throw DataError("probabilities must be finite and non-negative");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw DataError("probabilities must sum to 1");
  }
  if (probabilities.size() == 1) return std::nullopt;

  double h = 0.0;
  for (double p : probabilities) {
    if (p > 0.0) h -= p * std::log(p);
  }
  const double h_uniform = std::log(static_cast<double>(probabilities.size()));
  return std::clamp(h / h_uniform, 0.0, 1.0);
}

RankedResult rank_answers(const std::vector<ScoreRecord>& records,
                          const std::string& correct_answer_id) {
  if (records.empty()) throw DataError("rank_answers needs at least 1 record");
  std::optional<size_t> correct;
  for (size_t i = 0; i < records.size(); ++i) {
    if (records[i].statement.instance_id != records[0].statement.instance_id) {
      throw DataError("rank_answers records span multiple instances");
    }
    if (!(records[i].config == records[0].config)) {
      throw ConfigError("rank_answers records mix scoring configurations");
    }
    if (records[i].statement.answer_id == correct_answer_id) {
      if (correct) {
        throw DataError("correct answer '" + correct_answer_id +
                        "' appears more than once");
      }
      correct = i;
    }
  }
  if (!correct) {
    throw DataError("correct answer '" + correct_answer_id +
                    "' is not among the scored answers");
  }

  std::vector<double> scores;
  scores.reserve(records.size());
  for (const ScoreRecord& r : records) scores.push_back(r.score);

  RankedResult res;
  res.instance_id = records[0].statement.instance_id;
  res.order.resize(records.size());
  std::iota(res.order.begin(), res.order.end(), size_t{0});
  std::stable_sort(res.order.begin(), res.order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  res.predicted_index = res.order.front();
  res.correct_index = *correct;
  res.rank_of_correct =
      1 + static_cast<size_t>(std::find(res.order.begin(), res.order.end(),
                                        *correct) -
                              res.order.begin());
  res.tie_flag = res.order.size() >= 2 &&
                 scores[res.order[0]] == scores[res.order[1]];
  res.probabilities = softmax_scores(scores);
  res.uncertainty = entropy_uncertainty(res.probabilities);
  return res;
}

double precision_at_k(std::span<const size_t> ranks, size_t k) {
  if (k < 1) throw ConfigError("precision@k needs k >= 1");
  if (ranks.empty()) throw DataError("precision@k over an empty rank list");
  size_t hits = 0;
  for (size_t r : ranks) {
    if (r <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

BearScore bear_score(const std::vector<TemplateOutcomes>& groups) {
  if (groups.empty()) throw DataError("probe score needs at least 1 template");

  std::set<std::pair<std::string, std::string>> reference;
  for (const InstanceOutcome& o : groups[0].outcomes) {
    reference.emplace(o.relation_id, o.instance_id);
  }
  if (reference.empty()) throw DataError("probe score over zero instances");

  BearScore score;
  score.instance_count = reference.size();
  for (const TemplateOutcomes& group : groups) {
    std::set<std::pair<std::string, std::string>> keys;
    size_t hits = 0;
    for (const InstanceOutcome& o : group.outcomes) {
      keys.emplace(o.relation_id, o.instance_id);
      if (o.hit) ++hits;
    }
    if (keys != reference || keys.size() != group.outcomes.size()) {
      throw DataError(
          "template groups cover different instance sets; scores are not "
          "comparable");
    }
    score.per_template.push_back(static_cast<double>(hits) /
                                 static_cast<double>(group.outcomes.size()));
  }

  const size_t t = score.per_template.size();
  double total = 0.0;
  for (double a : score.per_template) total += a;
  score.mean = total / static_cast<double>(t);
  if (t > 1) {
    double ss = 0.0;
    for (double a : score.per_template) {
      ss += (a - score.mean) * (a - score.mean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(t - 1));
    score.std_error = sd / std::sqrt(static_cast<double>(t));
  }
  return score;
}

RandomBaseline random_baseline(const Dataset& dataset) {
  double sum_all = 0.0, sum_oto = 0.0, sum_nto = 0.0;
  size_t n_all = 0, n_oto = 0, n_nto = 0;
  for (const Relation& rel : dataset.relations) {
    if (rel.answer_space.empty() || rel.instances.empty()) continue;
    const double p = 1.0 / static_cast<double>(rel.answer_space.size());
    const double contribution = p * static_cast<double>(rel.instances.size());
    sum_all += contribution;
    n_all += rel.instances.size();
    if (rel.cardinality == Cardinality::OneToOne) {
      sum_oto += contribution;
      n_oto += rel.instances.size();
    } else {
      sum_nto += contribution;
      n_nto += rel.instances.size();
    }
  }
  RandomBaseline out;
  if (n_all) out.overall = sum_all / static_cast<double>(n_all);
  if (n_oto) out.one_to_one = sum_oto / static_cast<double>(n_oto);
  if (n_nto) out.n_to_one = sum_nto / static_cast<double>(n_nto);
  return out;
}

namespace {

// Engine output mapped to [0, 1) without std::uniform_real_distribution,
// whose exact output is not pinned by the standard.
double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

size_t bounded_draw(std::mt19937_64& rng, size_t n) { return rng() % n; }

}  // namespace

MonteCarloBaseline monte_carlo_baseline(const Dataset& dataset, size_t trials,
                                        uint64_t seed,
                                        std::optional<Cardinality> subset) {
  if (trials < 1) throw ConfigError("monte-carlo baseline needs trials >= 1");

  // (answer count, correct answer index) per instance.
  std::vector<std::pair<size_t, size_t>> pool;
  for (const Relation& rel : dataset.relations) {
    if (subset && rel.cardinality != *subset) continue;
    for (const Instance& ins : rel.instances) {
      const auto idx = rel.answer_index(ins.correct_answer_id);
      if (!idx || rel.answer_space.empty()) continue;
      pool.emplace_back(rel.answer_space.size(), *idx);
    }
  }
  if (pool.empty()) {
    throw DataError("monte-carlo baseline over a dataset with no instances");
  }

  std::mt19937_64 rng(seed);
  size_t hits = 0;
  for (size_t t = 0; t < trials; ++t) {
    const auto [k, correct] = pool[bounded_draw(rng, pool.size())];
    size_t best = 0;
    double best_score = unit_draw(rng);
    for (size_t i = 1; i < k; ++i) {
      const double s = unit_draw(rng);
      if (s > best_score) {
        best_score = s;
        best = i;
      }
    }
    if (best == correct) ++hits;
  }

  MonteCarloBaseline out;
  out.trials = trials;
  out.seed = seed;
  out.accuracy = static_cast<double>(hits) / static_cast<double>(trials);
  out.std_error = std::sqrt(out.accuracy * (1.0 - out.accuracy) /
                            static_cast<double>(trials));
  return out;
}

}  // namespace lmprobe
