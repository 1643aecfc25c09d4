#include "lmprobe/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "lmprobe/error.hpp"
#include "lmprobe/text_util.hpp"

namespace lmprobe {

using nlohmann::ordered_json;

std::string to_string(Cardinality c) {
  return c == Cardinality::OneToOne ? "1:1" : "N:1";
}

Cardinality cardinality_from_string(const std::string& s) {
  if (s == "1:1") return Cardinality::OneToOne;
  if (s == "N:1") return Cardinality::NToOne;
  throw DataError("unknown cardinality '" + s + "' (expected '1:1' or 'N:1')");
}

const Answer* Relation::find_answer(const std::string& answer_id) const {
  for (const Answer& a : answer_space) {
    if (a.answer_id == answer_id) return &a;
  }
  return nullptr;
}

std::optional<size_t> Relation::answer_index(const std::string& answer_id) const {
  for (size_t i = 0; i < answer_space.size(); ++i) {
    if (answer_space[i].answer_id == answer_id) return i;
  }
  return std::nullopt;
}

int Relation::effective_answer_cap() const {
  if (answer_cap) return *answer_cap;
  return cardinality == Cardinality::OneToOne ? 60 : 25;
}

size_t Dataset::total_instances() const {
  size_t n = 0;
  for (const Relation& r : relations) n += r.instances.size();
  return n;
}

const Relation* Dataset::find_relation(const std::string& relation_id) const {
  for (const Relation& r : relations) {
    if (r.id == relation_id) return &r;
  }
  return nullptr;
}

namespace {

std::string locus(const std::filesystem::path& file, size_t line) {
  return file.string() + ":" + std::to_string(line);
}

ordered_json parse_line(const std::filesystem::path& file, size_t line_no,
                        const std::string& line) {
  try {
    return ordered_json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(locus(file, line_no) + ": malformed record: " + e.what());
  }
}

std::string require_string(const ordered_json& j, const char* key,
                           const std::filesystem::path& file, size_t line_no) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw DataError(locus(file, line_no) + ": missing or non-string field '" +
                    key + "'");
  }
  return j[key].get<std::string>();
}

Relation load_relation_file(const std::filesystem::path& file,
                            const std::string& relation_id,
                            Cardinality cardinality,
                            std::optional<int> answer_cap) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open relation file " + file.string());

  Relation rel;
  rel.id = relation_id;
  rel.cardinality = cardinality;
  rel.answer_cap = answer_cap;

  std::vector<std::pair<int, std::string>> templates;  // (index, text)
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ordered_json j = parse_line(file, line_no, line);
    const std::string kind = require_string(j, "kind", file, line_no);
    if (kind == "template") {
      if (!j.contains("index") || !j["index"].is_number_integer()) {
        throw DataError(locus(file, line_no) +
                        ": template record missing integer 'index'");
      }
      templates.emplace_back(j["index"].get<int>(),
                             require_string(j, "text", file, line_no));
    } else if (kind == "answer") {
      Answer a;
      a.answer_id = require_string(j, "answer_id", file, line_no);
      a.label = require_string(j, "label", file, line_no);
      rel.answer_space.push_back(std::move(a));
    } else if (kind == "instance") {
      Instance ins;
      ins.instance_id = require_string(j, "instance_id", file, line_no);
      ins.subject_label = require_string(j, "subject_label", file, line_no);
      ins.correct_answer_id =
          require_string(j, "correct_answer_id", file, line_no);
      rel.instances.push_back(std::move(ins));
    } else {
      throw DataError(locus(file, line_no) + ": unknown record kind '" + kind +
                      "'");
    }
  }

  std::sort(templates.begin(), templates.end());
  for (size_t i = 0; i < templates.size(); ++i) {
    if (templates[i].first != static_cast<int>(i)) {
      throw DataError(file.string() + ": template indices must be 0.." +
                      std::to_string(templates.size() - 1) +
                      " without gaps or duplicates");
    }
    rel.templates.push_back(TemplateString{templates[i].second});
  }

  std::unordered_set<std::string> answer_ids;
  for (const Answer& a : rel.answer_space) {
    if (!answer_ids.insert(a.answer_id).second) {
      throw DataError(file.string() + ": duplicate answer_id '" + a.answer_id +
                      "' in relation " + relation_id);
    }
  }
  std::unordered_set<std::string> instance_ids;
  for (const Instance& ins : rel.instances) {
    if (!instance_ids.insert(ins.instance_id).second) {
      throw DataError(file.string() + ": duplicate instance_id '" +
                      ins.instance_id + "' in relation " + relation_id);
    }
    if (!answer_ids.count(ins.correct_answer_id)) {
      throw DataError(file.string() + ": instance '" + ins.instance_id +
                      "' references unknown answer id '" +
                      ins.correct_answer_id + "'");
    }
  }
  return rel;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& dir) {
  const std::filesystem::path manifest_path = dir / "manifest";
  if (!std::filesystem::exists(manifest_path)) {
    throw DataError("no manifest found in " + dir.string());
  }
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open " + manifest_path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  ordered_json m;
  try {
    m = ordered_json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(manifest_path.string() + ": malformed manifest: " +
                    e.what());
  }

  Dataset ds;
  ds.metadata.name = m.value("name", std::string{});
  ds.metadata.version = m.value("version", std::string{});
  ds.metadata.source_note = m.value("source_note", std::string{});
  if (!m.contains("relations") || !m["relations"].is_array()) {
    throw DataError(manifest_path.string() +
                    ": manifest must contain a 'relations' array");
  }

  std::unordered_set<std::string> seen_ids;
  for (const auto& entry : m["relations"]) {
    if (!entry.is_object() || !entry.contains("id") || !entry.contains("file") ||
        !entry.contains("cardinality")) {
      throw DataError(manifest_path.string() +
                      ": relation entries need 'id', 'file', 'cardinality'");
    }
    const std::string id = entry["id"].get<std::string>();
    if (!seen_ids.insert(id).second) {
      throw DataError(manifest_path.string() + ": duplicate relation id '" +
                      id + "'");
    }
    std::optional<int> cap;
    if (entry.contains("answer_cap")) cap = entry["answer_cap"].get<int>();
    ds.relations.push_back(load_relation_file(
        dir / entry["file"].get<std::string>(), id,
        cardinality_from_string(entry["cardinality"].get<std::string>()), cap));
  }
  return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  ordered_json manifest;
  manifest["name"] = dataset.metadata.name;
  manifest["version"] = dataset.metadata.version;
  manifest["source_note"] = dataset.metadata.source_note;
  manifest["relations"] = ordered_json::array();
  for (const Relation& rel : dataset.relations) {
    const std::string file_name = rel.id + ".jsonl";
    ordered_json entry;
    entry["id"] = rel.id;
    entry["file"] = file_name;
    entry["cardinality"] = to_string(rel.cardinality);
    if (rel.answer_cap) entry["answer_cap"] = *rel.answer_cap;
    manifest["relations"].push_back(entry);

    std::ofstream out(dir / file_name, std::ios::trunc);
    if (!out) throw DataError("cannot write " + (dir / file_name).string());
    for (size_t i = 0; i < rel.templates.size(); ++i) {
      ordered_json j;
      j["kind"] = "template";
      j["index"] = static_cast<int>(i);
      j["text"] = rel.templates[i].text;
      out << j.dump() << "\n";
    }
    for (const Answer& a : rel.answer_space) {
      ordered_json j;
      j["kind"] = "answer";
      j["answer_id"] = a.answer_id;
      j["label"] = a.label;
      out << j.dump() << "\n";
    }
    for (const Instance& ins : rel.instances) {
      ordered_json j;
      j["kind"] = "instance";
      j["instance_id"] = ins.instance_id;
      j["subject_label"] = ins.subject_label;
      j["correct_answer_id"] = ins.correct_answer_id;
      out << j.dump() << "\n";
    }
  }
  std::ofstream mout(dir / "manifest", std::ios::trunc);
  if (!mout) throw DataError("cannot write " + (dir / "manifest").string());
  mout << manifest.dump() << "\n";
}

// ---------------------------------------------------------------------------
// Validation

namespace {

size_t count_occurrences(const std::string& text, const std::string& needle) {
  size_t n = 0, pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    ++n;
    pos += needle.size();
  }
  return n;
}

SizeStats size_stats(const std::vector<size_t>& sizes) {
  SizeStats s;
  s.relation_count = sizes.size();
  if (sizes.empty()) return s;
  s.min = *std::min_element(sizes.begin(), sizes.end());
  s.max = *std::max_element(sizes.begin(), sizes.end());
  double total = 0;
  for (size_t k : sizes) total += static_cast<double>(k);
  s.mean = total / static_cast<double>(sizes.size());
  return s;
}

FindingStatus fail_status(Severity sev) {
  return sev == Severity::Error ? FindingStatus::Fail : FindingStatus::Warn;
}

}  // namespace

AnswerSpaceStats answer_space_size_stats(const Dataset& dataset) {
  AnswerSpaceStats stats;
  std::vector<size_t> all, oto, nto;
  for (const Relation& rel : dataset.relations) {
    const size_t k = rel.answer_space.size();
    stats.per_relation.emplace_back(rel.id, k);
    all.push_back(k);
    (rel.cardinality == Cardinality::OneToOne ? oto : nto).push_back(k);
  }
  stats.overall = size_stats(all);
  stats.one_to_one = size_stats(oto);
  stats.n_to_one = size_stats(nto);
  return stats;
}

bool ValidationReport::ok() const {
  return std::none_of(findings.begin(), findings.end(), [](const Finding& f) {
    return f.status == FindingStatus::Fail;
  });
}

std::string ValidationReport::to_text() const {
  std::ostringstream out;
  for (const Finding& f : findings) {
    const char* tag = f.status == FindingStatus::Pass   ? "PASS"
                      : f.status == FindingStatus::Warn ? "WARN"
                                                        : "FAIL";
    out << tag << "  " << f.relation_id << "  " << f.rule;
    if (!f.message.empty()) out << "  " << f.message;
    out << "\n";
  }
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "answer-space size: overall mean %.2f (min %zu, max %zu) over "
                "%zu relations\n",
                sizes.overall.mean, sizes.overall.min, sizes.overall.max,
                sizes.overall.relation_count);
  out << buf;
  if (sizes.n_to_one.relation_count > 0) {
    std::snprintf(buf, sizeof(buf),
                  "N:1 subset: mean answer-space size %.2f, mean "
                  "instances-per-answer %.2f\n",
                  sizes.n_to_one.mean, mean_instances_per_answer_n_to_one);
    out << buf;
  }
  out << (ok() ? "validation: OK\n" : "validation: FAILED\n");
  return out.str();
}

ValidationReport validate_dataset(const Dataset& dataset,
                                  const ValidationConfig& config) {
  ValidationReport report;
  report.sizes = answer_space_size_stats(dataset);

  size_t n_to_one_instances = 0, n_to_one_answers = 0;
  for (const Relation& rel : dataset.relations) {
    if (rel.cardinality == Cardinality::NToOne) {
      n_to_one_instances += rel.instances.size();
      n_to_one_answers += rel.answer_space.size();
    }

    if (config.placeholders != Severity::Off) {
      Finding f{rel.id, "placeholders", FindingStatus::Pass, ""};
      for (size_t t = 0; t < rel.templates.size(); ++t) {
        const std::string& text = rel.templates[t].text;
        const size_t nx = count_occurrences(text, "[X]");
        const size_t ny = count_occurrences(text, "[Y]");
        if (nx != 1 || ny != 1) {
          f.status = fail_status(config.placeholders);
          f.message = "template " + std::to_string(t) + " has " +
                      std::to_string(nx) + "x [X] and " + std::to_string(ny) +
                      "x [Y] (need exactly one each)";
          break;
        }
      }
      report.findings.push_back(std::move(f));
    }

    if (config.duplicate_labels != Severity::Off) {
      Finding f{rel.id, "duplicate-labels", FindingStatus::Pass, ""};
      std::unordered_map<std::string, std::string> seen;  // normalized -> id
      for (const Answer& a : rel.answer_space) {
        const std::string norm = normalize_label(a.label);
        auto [it, inserted] = seen.emplace(norm, a.answer_id);
        if (!inserted) {
          f.status = fail_status(config.duplicate_labels);
          f.message = "answers '" + it->second + "' and '" + a.answer_id +
                      "' share normalized label '" + norm + "'";
          break;
        }
      }
      report.findings.push_back(std::move(f));
    }

    {
      RelationBalance bal;
      bal.relation_id = rel.id;
      bal.per_answer_counts.assign(rel.answer_space.size(), 0);
      for (const Instance& ins : rel.instances) {
        if (auto idx = rel.answer_index(ins.correct_answer_id)) {
          ++bal.per_answer_counts[*idx];
        }
      }
      if (!bal.per_answer_counts.empty()) {
        const auto [mn, mx] = std::minmax_element(bal.per_answer_counts.begin(),
                                                  bal.per_answer_counts.end());
        bal.spread = *mx - *mn;
      }
      if (config.balance != Severity::Off) {
        Finding f{rel.id, "balance", FindingStatus::Pass, ""};
        if (bal.spread > config.max_balance_spread) {
          f.status = fail_status(config.balance);
          f.message = "instances-per-answer spread " +
                      std::to_string(bal.spread) + " exceeds " +
                      std::to_string(config.max_balance_spread);
        }
        report.findings.push_back(std::move(f));
      }
      report.balance.push_back(std::move(bal));
    }

    if (config.answer_cap != Severity::Off) {
      Finding f{rel.id, "answer-cap", FindingStatus::Pass, ""};
      const size_t cap = static_cast<size_t>(rel.effective_answer_cap());
      if (rel.answer_space.size() > cap) {
        f.status = fail_status(config.answer_cap);
        f.message = "answer space size " +
                    std::to_string(rel.answer_space.size()) + " exceeds cap " +
                    std::to_string(cap);
      }
      report.findings.push_back(std::move(f));
    }
  }

  report.mean_instances_per_answer_n_to_one =
      n_to_one_answers == 0 ? 0.0
                            : static_cast<double>(n_to_one_instances) /
                                  static_cast<double>(n_to_one_answers);
  return report;
}

}  // namespace lmprobe
