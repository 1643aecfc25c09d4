#pragma once

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lmprobe {

// One scored (instance, template) pair.  scores/probabilities follow the
// relation's answer-space order.  Deliberately timestamp-free: result files
// must be byte-identical across reruns.
struct ResultRecord {
  std::string relation_id;
  std::string instance_id;
  int template_index = 0;
  std::vector<double> scores;
  std::string predicted_answer_id;
  std::string correct_answer_id;
  size_t rank_of_correct = 0;  // 1-based
  bool tie_flag = false;
  std::vector<double> probabilities;
  std::optional<double> uncertainty;  // null when only one answer
};

nlohmann::ordered_json result_record_to_json(const ResultRecord& record);
ResultRecord result_record_from_json(const nlohmann::json& j);

// JSONL, one record per line; read raises DataError with file:line on any
// malformed record.
void write_result_records(const std::filesystem::path& file,
                          const std::vector<ResultRecord>& records);
std::vector<ResultRecord> read_result_records(
    const std::filesystem::path& file);

}  // namespace lmprobe
