#pragma once

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lmprobe/metrics.hpp"
#include "lmprobe/results.hpp"
#include "lmprobe/scorer.hpp"
#include "lmprobe/scoring.hpp"

namespace lmprobe {

// Everything a standalone report needs to interpret a result set; written
// into report.json so the `report` subcommand never re-reads the dataset.
struct RunMetadata {
  std::string model_name;
  std::optional<double> model_params;  // billions, for scaling plots
  std::string backend_name;
  std::string backend_revision;
  LogBase backend_base = LogBase::Natural;
  std::string dataset_name;
  std::string dataset_version;
  ScoringConfig config;
  std::optional<int> template_index;  // nullopt = all templates
  uint64_t seed = 0;
  std::map<std::string, Cardinality> relation_cardinality;
  std::vector<size_t> precision_ks{1, 5, 10};
};

struct TemplateAccuracy {
  int template_index = 0;
  size_t hits = 0;
  size_t count = 0;
  double accuracy = 0.0;
};

struct RelationTemplateAccuracy {
  std::string relation_id;
  int template_index = 0;
  size_t hits = 0;
  size_t count = 0;
  double accuracy = 0.0;
};

struct RelationAccuracy {
  std::string relation_id;
  double accuracy = 0.0;  // mean over templates
};

struct PrecisionAtK {
  size_t k = 0;
  double mean = 0.0;       // over templates
  double std_error = 0.0;
};

struct EvalReport {
  RunMetadata meta;
  BearScore overall;
  std::optional<BearScore> one_to_one;
  std::optional<BearScore> n_to_one;
  std::vector<TemplateAccuracy> per_template;
  std::vector<RelationAccuracy> per_relation;
  std::vector<RelationTemplateAccuracy> per_relation_template;
  std::vector<PrecisionAtK> precision;
  RandomBaseline baseline;  // derived from the records' answer counts
  size_t record_count = 0;
};

// Aggregate records into a report.  Pure function of (meta, records): the
// in-run report and a report re-derived later from results.jsonl agree
// byte-for-byte.
EvalReport build_eval_report(const RunMetadata& meta,
                             const std::vector<ResultRecord>& records);

nlohmann::ordered_json report_to_json(const EvalReport& report);
RunMetadata metadata_from_report_json(const nlohmann::json& j);
std::string report_to_text(const EvalReport& report);

// Multi-run comparison.  All runs must cover the same relation-id set
// (ConfigError "incomparable result sets" otherwise).
void require_comparable(const std::vector<EvalReport>& reports);
std::string comparison_table(const std::vector<EvalReport>& reports);

// Vega-Lite v5 specs (the pinned plot dialect; see docs/formats.md).
nlohmann::ordered_json accuracy_vs_size_plot(
    const std::vector<EvalReport>& reports);
nlohmann::ordered_json per_relation_plot(
    const std::vector<EvalReport>& reports);

}  // namespace lmprobe
