#include "lmprobe/runner.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <unordered_map>

#include "lmprobe/cache.hpp"
#include "lmprobe/error.hpp"
#include "lmprobe/executor.hpp"
#include "lmprobe/metrics.hpp"
#include "lmprobe/results.hpp"

namespace lmprobe {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// The part of the configuration that must not change across a resume; the
// partial file is only meaningful under the exact same scoring setup.
ordered_json resume_guard_json(const RunConfig& config,
                               const BackendIdentity& identity,
                               const Dataset& dataset) {
  ordered_json j;
  j["dataset"]["name"] = dataset.metadata.name;
  j["dataset"]["version"] = dataset.metadata.version;
  j["backend"]["name"] = identity.name;
  j["backend"]["revision"] = identity.revision;
  j["config"]["mode"] = to_string(config.scoring.mode);
  if (config.scoring.pll_strategy) {
    j["config"]["pll_strategy"] = to_string(*config.scoring.pll_strategy);
  } else {
    j["config"]["pll_strategy"] = nullptr;
  }
  j["config"]["reduction"] = to_string(config.scoring.reduction);
  j["config"]["scope"] = to_string(config.scoring.scope);
  if (config.template_index) {
    j["config"]["templates"] = *config.template_index;
  } else {
    j["config"]["templates"] = "all";
  }
  j["config"]["seed"] = config.seed;
  return j;
}

struct WorkItem {
  size_t relation_index = 0;
  size_t instance_index = 0;
  int template_index = 0;
};

std::vector<int> selected_templates(const Dataset& dataset,
                                    const std::optional<int>& selection) {
  if (dataset.relations.empty()) {
    throw DataError("dataset has no relations");
  }
  if (selection) {
    for (const Relation& rel : dataset.relations) {
      if (*selection < 0 ||
          static_cast<size_t>(*selection) >= rel.templates.size()) {
        throw ConfigError("relation " + rel.id + " has no template " +
                          std::to_string(*selection));
      }
    }
    return {*selection};
  }
  const size_t count = dataset.relations.front().templates.size();
  for (const Relation& rel : dataset.relations) {
    if (rel.templates.size() != count) {
      throw ConfigError(
          "relations have differing template counts; per-template aggregation "
          "needs a uniform count (select a single template index instead)");
    }
  }
  if (count == 0) throw DataError("relations define no templates");
  std::vector<int> all(count);
  for (size_t i = 0; i < count; ++i) all[i] = static_cast<int>(i);
  return all;
}

}  // namespace

RunResult run_probe(const RunConfig& config) {
  config.scoring.validate();
  if (config.parallelism < 1) {
    throw ConfigError("parallelism must be >= 1");
  }
  for (size_t k : config.precision_ks) {
    if (k < 1) throw ConfigError("precision@k needs k >= 1");
  }

  const Dataset dataset = load_dataset(config.dataset_dir);
  const ValidationReport validation =
      validate_dataset(dataset, config.validation);
  for (const Finding& f : validation.findings) {
    if (f.status == FindingStatus::Warn) {
      std::cerr << "warning: " << f.relation_id << " " << f.rule << ": "
                << f.message << "\n";
    }
  }
  if (!validation.ok()) {
    throw ConfigError("dataset failed validation:\n" + validation.to_text());
  }

  // Assemble the scorer stack: base backend, a call counter on top of it,
  // and (optionally) the cache in front of both, so only cache misses reach
  // the counter and the backend.
  std::unique_ptr<Scorer> base;
  if (const auto* http = std::get_if<HttpBackendSpec>(&config.backend)) {
    base = make_http_scorer(http->url, http->options);
  } else if (const auto* ref =
                 std::get_if<ReferenceBackendSpec>(&config.backend)) {
    base = make_reference_scorer(ref->seed);
  } else {
    const auto& oracle = std::get<OracleBackendSpec>(config.backend);
    base = make_oracle_scorer(make_oracle_truth(dataset, oracle.kind),
                              to_string(oracle.kind));
  }
  CountingScorer counting(*base);
  std::unique_ptr<ScoreCache> cache;
  std::unique_ptr<CachedScorer> cached;
  if (config.cache_path) {
    cache = std::make_unique<ScoreCache>(*config.cache_path);
    cached = std::make_unique<CachedScorer>(counting, *cache);
  }
  Scorer& scorer = cached ? static_cast<Scorer&>(*cached)
                          : static_cast<Scorer&>(counting);

  const BackendIdentity identity = scorer.identity();  // may hit the network
  if (config.scoring.mode == ScoringMode::Causal && !identity.supports_causal) {
    throw ConfigError("backend '" + identity.name +
                      "' does not support causal scoring");
  }
  if (config.scoring.mode == ScoringMode::Masked && !identity.supports_masked) {
    throw ConfigError("backend '" + identity.name +
                      "' does not support masked scoring");
  }

  const std::vector<int> templates =
      selected_templates(dataset, config.template_index);

  std::filesystem::create_directories(config.out_dir);
  const std::filesystem::path partial_path =
      config.out_dir / "results.partial.jsonl";
  const std::filesystem::path guard_path = config.out_dir / "run_config.json";

  // Resume guard: an existing partial must come from this exact setup.
  const ordered_json guard = resume_guard_json(config, identity, dataset);
  if (std::filesystem::exists(guard_path)) {
    std::ifstream in(guard_path);
    std::stringstream buf;
    buf << in.rdbuf();
    const json existing = json::parse(buf.str(), nullptr, false);
    if (existing.is_discarded() || existing != json::parse(guard.dump())) {
      throw ConfigError(
          "out dir " + config.out_dir.string() +
          " holds partial results from a different configuration; use a "
          "fresh --out directory or delete it");
    }
  } else {
    std::ofstream out(guard_path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + guard_path.string());
    out << guard.dump(2) << "\n";
  }

  std::vector<ResultRecord> records;
  std::set<std::pair<std::string, int>> done;  // (instance_id, template)
  if (std::filesystem::exists(partial_path)) {
    records = read_result_records(partial_path);
    for (const ResultRecord& r : records) {
      const Relation* rel = dataset.find_relation(r.relation_id);
      const bool known =
          rel != nullptr &&
          std::any_of(rel->instances.begin(), rel->instances.end(),
                      [&](const Instance& ins) {
                        return ins.instance_id == r.instance_id;
                      });
      if (!known) {
        throw ConfigError("partial results in " + partial_path.string() +
                          " reference instance '" + r.instance_id +
                          "' that is not in the dataset; the dataset changed "
                          "since the run started");
      }
      done.emplace(r.instance_id, r.template_index);
    }
  }

  std::vector<WorkItem> work;
  for (size_t ri = 0; ri < dataset.relations.size(); ++ri) {
    const Relation& rel = dataset.relations[ri];
    for (size_t ii = 0; ii < rel.instances.size(); ++ii) {
      for (int t : templates) {
        if (done.count({rel.instances[ii].instance_id, t})) continue;
        work.push_back(WorkItem{ri, ii, t});
      }
    }
  }

  std::ofstream partial_out(partial_path, std::ios::app);
  if (!partial_out) {
    throw DataError("cannot write " + partial_path.string());
  }

  std::mutex write_mu;
  std::atomic<size_t> written{0};
  std::atomic<bool> limit_hit{false};

  auto run_item = [&](size_t index) {
    const WorkItem& item = work[index];
    const Relation& rel = dataset.relations[item.relation_index];
    const Instance& instance = rel.instances[item.instance_index];

    const std::vector<ScoreRecord> scored = score_instance(
        instance, rel, item.template_index, scorer, config.scoring);
    const RankedResult ranked =
        rank_answers(scored, instance.correct_answer_id);

    ResultRecord record;
    record.relation_id = rel.id;
    record.instance_id = instance.instance_id;
    record.template_index = item.template_index;
    record.scores.reserve(scored.size());
    for (const ScoreRecord& s : scored) record.scores.push_back(s.score);
    record.predicted_answer_id =
        scored[ranked.predicted_index].statement.answer_id;
    record.correct_answer_id = instance.correct_answer_id;
    record.rank_of_correct = ranked.rank_of_correct;
    record.tie_flag = ranked.tie_flag;
    record.probabilities = ranked.probabilities;
    record.uncertainty = ranked.uncertainty;

    std::lock_guard<std::mutex> lock(write_mu);
    partial_out << result_record_to_json(record).dump() << "\n";
    partial_out.flush();
    records.push_back(std::move(record));
    const size_t n = written.fetch_add(1, std::memory_order_relaxed) + 1;
    if (config.limit > 0 && n >= config.limit) {
      limit_hit.store(true, std::memory_order_relaxed);
    }
  };

  try {
    run_parallel(config.parallelism, work.size(), run_item,
                 [&] { return limit_hit.load(std::memory_order_relaxed); });
  } catch (const BackendError& e) {
    throw BackendError(std::string(e.what()) + "\npartial progress saved to " +
                       partial_path.string() +
                       "; rerun with the same flags to resume");
  } catch (const ProtocolError& e) {
    throw ProtocolError(std::string(e.what()) +
                        "\npartial progress saved to " +
                        partial_path.string() +
                        "; rerun with the same flags to resume");
  }

  RunResult result;
  result.records_new = written.load();
  result.records_total = records.size();
  const auto counts = counting.counts();
  result.backend_calls =
      BackendCallCounts{counts.tokenize, counts.causal, counts.masked};

  if (limit_hit.load() && records.size() < done.size() + work.size()) {
    result.exit_code = 3;  // deliberate partial completion, resumable
    return result;
  }

  // Deterministic final order: dataset relation/instance order, then
  // template index.
  std::unordered_map<std::string, size_t> relation_rank;
  std::unordered_map<std::string, size_t> instance_rank;
  for (size_t ri = 0; ri < dataset.relations.size(); ++ri) {
    relation_rank[dataset.relations[ri].id] = ri;
    for (size_t ii = 0; ii < dataset.relations[ri].instances.size(); ++ii) {
      instance_rank[dataset.relations[ri].instances[ii].instance_id] = ii;
    }
  }
  std::sort(records.begin(), records.end(),
            [&](const ResultRecord& a, const ResultRecord& b) {
              const size_t ra = relation_rank.at(a.relation_id);
              const size_t rb = relation_rank.at(b.relation_id);
              if (ra != rb) return ra < rb;
              const size_t ia = instance_rank.at(a.instance_id);
              const size_t ib = instance_rank.at(b.instance_id);
              if (ia != ib) return ia < ib;
              return a.template_index < b.template_index;
            });
  write_result_records(config.out_dir / "results.jsonl", records);

  RunMetadata meta;
  meta.model_name =
      config.model_name.empty() ? identity.name : config.model_name;
  meta.model_params = config.model_params;
  meta.backend_name = identity.name;
  meta.backend_revision = identity.revision;
  meta.backend_base = identity.base;
  meta.dataset_name = dataset.metadata.name;
  meta.dataset_version = dataset.metadata.version;
  meta.config = config.scoring;
  meta.template_index = config.template_index;
  meta.seed = config.seed;
  meta.precision_ks = config.precision_ks;
  for (const Relation& rel : dataset.relations) {
    meta.relation_cardinality[rel.id] = rel.cardinality;
  }

  EvalReport report = build_eval_report(meta, records);
  {
    std::ofstream out(config.out_dir / "report.json", std::ios::trunc);
    if (!out) {
      throw DataError("cannot write " +
                      (config.out_dir / "report.json").string());
    }
    out << report_to_json(report).dump(2) << "\n";
  }
  {
    std::ofstream out(config.out_dir / "report.txt", std::ios::trunc);
    out << report_to_text(report);
  }
  partial_out.close();
  std::filesystem::remove(partial_path);
  std::filesystem::remove(guard_path);

  result.report = std::move(report);
  return result;
}

}  // namespace lmprobe
