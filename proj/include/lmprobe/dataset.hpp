#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lmprobe {

enum class Cardinality { OneToOne, NToOne };

std::string to_string(Cardinality c);                 // "1:1" / "N:1"
Cardinality cardinality_from_string(const std::string& s);

// A cloze template with exactly one [X] (subject) and one [Y] (answer) slot.
struct TemplateString {
  std::string text;
};

struct Answer {
  std::string answer_id;
  std::string label;
};

struct Instance {
  std::string instance_id;
  std::string subject_label;
  std::string correct_answer_id;  // must name an Answer in the answer space
};

struct Relation {
  std::string id;
  Cardinality cardinality = Cardinality::NToOne;
  std::vector<TemplateString> templates;
  std::vector<Answer> answer_space;
  std::vector<Instance> instances;
  std::optional<int> answer_cap;  // manifest override; defaults by cardinality

  const Answer* find_answer(const std::string& answer_id) const;
  std::optional<size_t> answer_index(const std::string& answer_id) const;
  int effective_answer_cap() const;  // manifest cap or 25 (N:1) / 60 (1:1)
};

struct DatasetMetadata {
  std::string name;
  std::string version;
  std::string source_note;
};

struct Dataset {
  DatasetMetadata metadata;
  std::vector<Relation> relations;

  size_t total_instances() const;
  const Relation* find_relation(const std::string& relation_id) const;
};

// Directory layout: <dir>/manifest (one JSON object) + one JSONL file per
// relation, named by the manifest.  Loading is strict: a missing manifest,
// malformed record (reported as file:line), or an instance referencing an
// unknown answer id is fatal (DataError).
Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Validation

enum class Severity { Off, Warning, Error };

struct ValidationConfig {
  // Max allowed (max - min) instances-per-answer within a relation.
  int max_balance_spread = 1;
  Severity balance = Severity::Warning;
  Severity placeholders = Severity::Error;
  Severity duplicate_labels = Severity::Error;
  Severity answer_cap = Severity::Error;
};

enum class FindingStatus { Pass, Warn, Fail };

struct Finding {
  std::string relation_id;
  std::string rule;  // "placeholders" | "duplicate-labels" | "balance" | "answer-cap"
  FindingStatus status = FindingStatus::Pass;
  std::string message;  // empty on pass
};

struct RelationBalance {
  std::string relation_id;
  std::vector<int> per_answer_counts;  // answer_space order
  int spread = 0;                      // max - min
};

struct SizeStats {
  size_t relation_count = 0;
  size_t min = 0;
  size_t max = 0;
  double mean = 0.0;
};

struct AnswerSpaceStats {
  SizeStats overall;
  SizeStats one_to_one;
  SizeStats n_to_one;
  std::vector<std::pair<std::string, size_t>> per_relation;  // (id, k)
};

struct ValidationReport {
  std::vector<Finding> findings;  // one per (relation, enabled rule)
  std::vector<RelationBalance> balance;
  AnswerSpaceStats sizes;
  // N:1 subset: total instances / total answers (0 when no N:1 relations).
  double mean_instances_per_answer_n_to_one = 0.0;

  bool ok() const;  // no Fail findings
  std::string to_text() const;  // deterministic rendering
};

ValidationReport validate_dataset(const Dataset& dataset,
                                  const ValidationConfig& config = {});

AnswerSpaceStats answer_space_size_stats(const Dataset& dataset);

}  // namespace lmprobe
