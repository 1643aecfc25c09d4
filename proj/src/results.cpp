#include "lmprobe/results.hpp"

#include <fstream>

#include "lmprobe/error.hpp"
#include "lmprobe/text_util.hpp"

namespace lmprobe {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json result_record_to_json(const ResultRecord& record) {
  ordered_json j;
  j["relation_id"] = record.relation_id;
  j["instance_id"] = record.instance_id;
  j["template_index"] = record.template_index;
  j["scores"] = record.scores;
  j["predicted_answer_id"] = record.predicted_answer_id;
  j["correct_answer_id"] = record.correct_answer_id;
  j["rank_of_correct"] = record.rank_of_correct;
  j["tie_flag"] = record.tie_flag;
  j["probabilities"] = record.probabilities;
  if (record.uncertainty) {
    j["uncertainty"] = *record.uncertainty;
  } else {
    j["uncertainty"] = nullptr;
  }
  return j;
}

ResultRecord result_record_from_json(const json& j) {
  ResultRecord r;
  try {
    r.relation_id = j.at("relation_id").get<std::string>();
    r.instance_id = j.at("instance_id").get<std::string>();
    r.template_index = j.at("template_index").get<int>();
    r.scores = j.at("scores").get<std::vector<double>>();
    r.predicted_answer_id = j.at("predicted_answer_id").get<std::string>();
    r.correct_answer_id = j.at("correct_answer_id").get<std::string>();
    r.rank_of_correct = j.at("rank_of_correct").get<size_t>();
    r.tie_flag = j.at("tie_flag").get<bool>();
    r.probabilities = j.at("probabilities").get<std::vector<double>>();
    if (!j.at("uncertainty").is_null()) {
      r.uncertainty = j.at("uncertainty").get<double>();
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed result record: ") + e.what());
  }
  return r;
}

void write_result_records(const std::filesystem::path& file,
                          const std::vector<ResultRecord>& records) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw DataError("cannot write " + file.string());
  for (const ResultRecord& r : records) {
    out << result_record_to_json(r).dump() << "\n";
  }
}

std::vector<ResultRecord> read_result_records(
    const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open " + file.string());
  std::vector<ResultRecord> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw DataError(file.string() + ":" + std::to_string(line_no) +
                      ": malformed result record");
    }
    try {
      out.push_back(result_record_from_json(j));
    } catch (const DataError& e) {
      throw DataError(file.string() + ":" + std::to_string(line_no) + ": " +
                      e.what());
    }
  }
  return out;
}

}  // namespace lmprobe
