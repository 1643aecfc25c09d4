#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lmprobe/dataset.hpp"

namespace lmprobe {

// One raw knowledge-graph assertion.  Popularity fields describe the
// *subject* entity; answers are ranked by their subjects' median popularity.
struct RawTriple {
  std::string subject_id;
  std::string subject_label;
  std::string relation_id;
  std::string object_id;
  std::string object_label;
  int64_t sitelink_count = 0;
  std::optional<int64_t> page_views;
};

enum class PopularitySource { PageViews, Sitelinks };

struct BuilderConfig {
  int answer_cap = 25;             // max answers per N:1 relation
  int per_answer_target = 6;       // instances per answer (N:1)
  int relation_instance_target = 150;  // answers * per-answer, for reporting
  int one_to_one_cap = 60;         // answers == instances for 1:1 relations
  int64_t min_page_views = 10000;  // popularity floor for subjects
  double leakage_threshold = 0.8;  // fuzzy-similarity cutoff
  int min_answers = 5;             // below this a relation is infeasible
  PopularitySource popularity_source = PopularitySource::PageViews;

  void validate() const;  // all thresholds must be positive
};

// Normalized-label similarity in [0, 1]: 1 - edit_distance / max(len).
// The edit distance counts insert/delete/substitute/adjacent-transpose, so
// ("Appel", "Apple") scores 0.8.
double fuzzy_similarity(const std::string& a, const std::string& b);

// A subject leaks the answer when the answer's tokens all appear among the
// subject's tokens (case-insensitive) or the labels' fuzzy similarity
// reaches the threshold.  Such pairs make statements guessable from surface
// overlap and are excluded.
bool is_leaky(const std::string& subject_label,
              const std::string& answer_label, double threshold);

std::vector<RawTriple> filter_unlabeled(std::vector<RawTriple> triples);

struct AnswerPool {
  Answer answer;
  std::vector<RawTriple> pool;    // candidate subjects, popularity-desc
  double median_popularity = 0.0; // median subject popularity
};

struct AnswerSpaceSelection {
  std::vector<AnswerPool> pools;          // final rank order
  std::optional<std::string> infeasible;  // set when the relation is dropped
  // How many triples each stage removed, for the build report.
  size_t dropped_unlabeled = 0;
  size_t dropped_low_popularity = 0;
  size_t dropped_leaky = 0;
  size_t dropped_conflicting_subjects = 0;
};

// Full selection pipeline: label/popularity/leakage filters, answer-label
// and subject-label distinctness, eligibility, popularity ranking, cap.
AnswerSpaceSelection select_answer_space(std::vector<RawTriple> triples,
                                         Cardinality cardinality,
                                         const BuilderConfig& config);

// Balanced instance sample: N:1 takes the per_answer_target most popular
// subjects per answer; 1:1 draws one subject per answer, seeded.  The
// resulting per-answer counts have spread 0 by construction.
std::vector<Instance> balanced_sample(const std::vector<AnswerPool>& pools,
                                      Cardinality cardinality,
                                      const BuilderConfig& config,
                                      uint64_t seed);

struct RelationSpec {
  std::string id;
  Cardinality cardinality = Cardinality::NToOne;
  std::vector<TemplateString> templates;
};

struct BuildOutcome {
  std::optional<Relation> relation;       // absent when infeasible
  std::string infeasible_reason;          // set when relation is absent
  std::vector<std::string> outlier_answers;  // odd character-class signatures
  size_t achieved_instances = 0;
  size_t target_instances = 0;
  AnswerSpaceSelection selection_stats;   // pools cleared, counters kept
};

BuildOutcome build_relation(std::vector<RawTriple> triples,
                            const RelationSpec& spec,
                            const BuilderConfig& config, uint64_t seed);

// Character-class signature ("Aa0_." categories) outlier scan: answers whose
// label signature differs from the relation's majority signature.
std::vector<std::string> signature_outliers(const std::vector<Answer>& answers);

}  // namespace lmprobe
