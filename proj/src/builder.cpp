#include "lmprobe/builder.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "lmprobe/error.hpp"
#include "lmprobe/text_util.hpp"

namespace lmprobe {

void BuilderConfig::validate() const {
  if (answer_cap < 1 || per_answer_target < 1 ||
      relation_instance_target < 1 || one_to_one_cap < 1 || min_answers < 1) {
    throw ConfigError("builder thresholds must be positive");
  }
  if (min_page_views < 0) {
    throw ConfigError("min_page_views must be non-negative");
  }
  if (leakage_threshold <= 0.0 || leakage_threshold > 1.0) {
    throw ConfigError("leakage_threshold must be in (0, 1]");
  }
}

double fuzzy_similarity(const std::string& a, const std::string& b) {
  const std::string na = normalize_label(a);
  const std::string nb = normalize_label(b);
  const size_t max_len = std::max(na.size(), nb.size());
  if (max_len == 0) return 1.0;
  return 1.0 - static_cast<double>(osa_distance(na, nb)) /
                   static_cast<double>(max_len);
}

namespace {

// All of `inner`'s tokens appear among `outer`'s tokens (case-insensitive).
bool tokens_contained(const std::string& inner, const std::string& outer) {
  const std::vector<std::string> inner_toks =
      whitespace_split(normalize_label(inner));
  if (inner_toks.empty()) return false;
  const std::vector<std::string> outer_toks =
      whitespace_split(normalize_label(outer));
  std::unordered_set<std::string> outer_set(outer_toks.begin(),
                                            outer_toks.end());
  for (const std::string& t : inner_toks) {
    if (!outer_set.count(t)) return false;
  }
  return true;
}

// Two labels are too close to coexist: containment either way, or fuzzy
// similarity at/above the threshold.
bool labels_confusable(const std::string& a, const std::string& b,
                       double threshold) {
  return tokens_contained(a, b) || tokens_contained(b, a) ||
         fuzzy_similarity(a, b) >= threshold;
}

int64_t popularity(const RawTriple& t, PopularitySource source) {
  if (source == PopularitySource::PageViews) {
    return t.page_views.value_or(0);
  }
  return t.sitelink_count;
}

double median_of(std::vector<int64_t> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  if (n % 2 == 1) return static_cast<double>(values[n / 2]);
  return (static_cast<double>(values[n / 2 - 1]) +
          static_cast<double>(values[n / 2])) /
         2.0;
}

}  // namespace

bool is_leaky(const std::string& subject_label,
              const std::string& answer_label, double threshold) {
  return tokens_contained(answer_label, subject_label) ||
         fuzzy_similarity(subject_label, answer_label) >= threshold;
}

std::vector<RawTriple> filter_unlabeled(std::vector<RawTriple> triples) {
  std::erase_if(triples, [](const RawTriple& t) {
    return trim(t.subject_label).empty() || trim(t.object_label).empty() ||
           t.subject_id.empty() || t.object_id.empty();
  });
  return triples;
}

AnswerSpaceSelection select_answer_space(std::vector<RawTriple> triples,
                                         Cardinality cardinality,
                                         const BuilderConfig& config) {
  config.validate();
  AnswerSpaceSelection sel;

  const size_t n_raw = triples.size();
  triples = filter_unlabeled(std::move(triples));
  sel.dropped_unlabeled = n_raw - triples.size();

  const size_t n_labeled = triples.size();
  std::erase_if(triples, [&](const RawTriple& t) {
    return popularity(t, config.popularity_source) < config.min_page_views;
  });
  sel.dropped_low_popularity = n_labeled - triples.size();
  if (triples.empty()) {
    sel.infeasible = "popularity filter removed all candidates";
    return sel;
  }

  const size_t n_popular = triples.size();
  std::erase_if(triples, [&](const RawTriple& t) {
    return is_leaky(t.subject_label, t.object_label,
                    config.leakage_threshold);
  });
  sel.dropped_leaky = n_popular - triples.size();
  if (triples.empty()) {
    sel.infeasible = "leakage filter emptied the candidate pools";
    return sel;
  }

  // Deterministic order, then one triple per (subject, object) keeping the
  // most popular duplicate.
  std::sort(triples.begin(), triples.end(),
            [&](const RawTriple& a, const RawTriple& b) {
              if (a.object_id != b.object_id) return a.object_id < b.object_id;
              if (a.subject_id != b.subject_id) {
                return a.subject_id < b.subject_id;
              }
              return popularity(a, config.popularity_source) >
                     popularity(b, config.popularity_source);
            });
  triples.erase(std::unique(triples.begin(), triples.end(),
                            [](const RawTriple& a, const RawTriple& b) {
                              return a.subject_id == b.subject_id &&
                                     a.object_id == b.object_id;
                            }),
                triples.end());

  // A subject asserting two different objects for this relation is
  // ambiguous evidence; drop it entirely.
  std::unordered_map<std::string, std::unordered_set<std::string>>
      subject_objects;
  for (const RawTriple& t : triples) {
    subject_objects[t.subject_id].insert(t.object_id);
  }
  const size_t n_deduped = triples.size();
  std::erase_if(triples, [&](const RawTriple& t) {
    return subject_objects.at(t.subject_id).size() > 1;
  });
  sel.dropped_conflicting_subjects = n_deduped - triples.size();
  if (triples.empty()) {
    sel.infeasible = "subject-conflict filter removed all candidates";
    return sel;
  }

  // Group into per-answer candidate pools (triples are object-ordered).
  std::vector<AnswerPool> pools;
  for (const RawTriple& t : triples) {
    if (pools.empty() || pools.back().answer.answer_id != t.object_id) {
      AnswerPool pool;
      pool.answer.answer_id = t.object_id;
      pool.answer.label = t.object_label;
      pools.push_back(std::move(pool));
    }
    pools.back().pool.push_back(t);
  }
  for (AnswerPool& pool : pools) {
    std::vector<int64_t> pops;
    pops.reserve(pool.pool.size());
    for (const RawTriple& t : pool.pool) {
      pops.push_back(popularity(t, config.popularity_source));
    }
    pool.median_popularity = median_of(std::move(pops));
    std::sort(pool.pool.begin(), pool.pool.end(),
              [&](const RawTriple& a, const RawTriple& b) {
                const int64_t pa = popularity(a, config.popularity_source);
                const int64_t pb = popularity(b, config.popularity_source);
                if (pa != pb) return pa > pb;
                return a.subject_id < b.subject_id;
              });
  }

  // Rank answers by median subject popularity, then greedily keep only
  // mutually distinct labels so near-duplicates never share a space.
  std::sort(pools.begin(), pools.end(),
            [](const AnswerPool& a, const AnswerPool& b) {
              if (a.median_popularity != b.median_popularity) {
                return a.median_popularity > b.median_popularity;
              }
              return a.answer.answer_id < b.answer.answer_id;
            });
  std::vector<AnswerPool> kept;
  for (AnswerPool& candidate : pools) {
    const bool confusable = std::any_of(
        kept.begin(), kept.end(), [&](const AnswerPool& other) {
          return labels_confusable(candidate.answer.label, other.answer.label,
                                   config.leakage_threshold);
        });
    if (!confusable) kept.push_back(std::move(candidate));
  }

  // Subjects must not leak *any* answer label in the space, and must be
  // pairwise distinct within their pool.
  for (AnswerPool& pool : kept) {
    std::erase_if(pool.pool, [&](const RawTriple& t) {
      return std::any_of(kept.begin(), kept.end(), [&](const AnswerPool& a) {
        return is_leaky(t.subject_label, a.answer.label,
                        config.leakage_threshold);
      });
    });
    std::vector<RawTriple> distinct;
    for (RawTriple& t : pool.pool) {
      const bool close = std::any_of(
          distinct.begin(), distinct.end(), [&](const RawTriple& other) {
            return labels_confusable(t.subject_label, other.subject_label,
                                     config.leakage_threshold);
          });
      if (!close) distinct.push_back(std::move(t));
    }
    pool.pool = std::move(distinct);
  }

  // Eligibility: enough distinct subjects to fill the balanced sample.
  const size_t required =
      cardinality == Cardinality::NToOne
          ? static_cast<size_t>(config.per_answer_target)
          : 1;
  std::erase_if(kept, [&](const AnswerPool& pool) {
    return pool.pool.size() < required;
  });

  const size_t cap = cardinality == Cardinality::NToOne
                         ? static_cast<size_t>(config.answer_cap)
                         : static_cast<size_t>(config.one_to_one_cap);
  if (kept.size() > cap) kept.resize(cap);

  if (kept.size() < static_cast<size_t>(config.min_answers)) {
    sel.infeasible = "answer space below minimum";
    return sel;
  }
  sel.pools = std::move(kept);
  return sel;
}

std::vector<Instance> balanced_sample(const std::vector<AnswerPool>& pools,
                                      Cardinality cardinality,
                                      const BuilderConfig& config,
                                      uint64_t seed) {
  config.validate();
  std::vector<Instance> out;
  if (cardinality == Cardinality::NToOne) {
    const size_t take = static_cast<size_t>(config.per_answer_target);
    for (const AnswerPool& pool : pools) {
      if (pool.pool.size() < take) {
        throw DataError("answer '" + pool.answer.answer_id +
                        "' has too few subjects for a balanced sample");
      }
      for (size_t i = 0; i < take; ++i) {
        out.push_back(Instance{pool.pool[i].subject_id,
                               pool.pool[i].subject_label,
                               pool.answer.answer_id});
      }
    }
  } else {
    std::mt19937_64 rng(seed);
    for (const AnswerPool& pool : pools) {
      if (pool.pool.empty()) {
        throw DataError("answer '" + pool.answer.answer_id +
                        "' has an empty subject pool");
      }
      const RawTriple& pick = pool.pool[rng() % pool.pool.size()];
      out.push_back(
          Instance{pick.subject_id, pick.subject_label, pool.answer.answer_id});
    }
  }
  return out;
}

std::vector<std::string> signature_outliers(
    const std::vector<Answer>& answers) {
  auto signature = [](const std::string& label) {
    std::string sig;
    for (char c : label) {
      char cls;
      if (c >= 'A' && c <= 'Z') {
        cls = 'A';
      } else if (c >= 'a' && c <= 'z') {
        cls = 'a';
      } else if (c >= '0' && c <= '9') {
        cls = '0';
      } else if (c == ' ') {
        cls = '_';
      } else {
        cls = '.';
      }
      if (sig.empty() || sig.back() != cls) sig.push_back(cls);
    }
    return sig;
  };

  std::map<std::string, size_t> counts;
  for (const Answer& a : answers) ++counts[signature(a.label)];
  std::string majority;
  size_t best = 0;
  for (const auto& [sig, count] : counts) {
    if (count > best) {  // map order breaks ties deterministically
      best = count;
      majority = sig;
    }
  }
  std::vector<std::string> outliers;
  for (const Answer& a : answers) {
    if (signature(a.label) != majority) outliers.push_back(a.answer_id);
  }
  return outliers;
}

BuildOutcome build_relation(std::vector<RawTriple> triples,
                            const RelationSpec& spec,
                            const BuilderConfig& config, uint64_t seed) {
  config.validate();
  if (spec.templates.empty()) {
    throw ConfigError("relation " + spec.id + " has no templates");
  }
  std::erase_if(triples, [&](const RawTriple& t) {
    return t.relation_id != spec.id;
  });

  BuildOutcome outcome;
  AnswerSpaceSelection sel =
      select_answer_space(std::move(triples), spec.cardinality, config);
  if (sel.infeasible) {
    outcome.infeasible_reason = *sel.infeasible;
    sel.pools.clear();
    outcome.selection_stats = std::move(sel);
    return outcome;
  }

  Relation rel;
  rel.id = spec.id;
  rel.cardinality = spec.cardinality;
  rel.templates = spec.templates;
  rel.answer_cap = spec.cardinality == Cardinality::NToOne
                       ? config.answer_cap
                       : config.one_to_one_cap;
  for (const AnswerPool& pool : sel.pools) {
    rel.answer_space.push_back(pool.answer);
  }
  rel.instances = balanced_sample(sel.pools, spec.cardinality, config, seed);

  outcome.achieved_instances = rel.instances.size();
  outcome.target_instances =
      spec.cardinality == Cardinality::NToOne
          ? sel.pools.size() * static_cast<size_t>(config.per_answer_target)
          : sel.pools.size();
  outcome.outlier_answers = signature_outliers(rel.answer_space);
  outcome.relation = std::move(rel);
  sel.pools.clear();
  outcome.selection_stats = std::move(sel);
  return outcome;
}

}  // namespace lmprobe
