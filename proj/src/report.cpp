#include "lmprobe/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "lmprobe/error.hpp"

namespace lmprobe {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", v * 100.0);
  return buf;
}

BearScore subset_bear(
    const std::map<int, std::vector<InstanceOutcome>>& by_template) {
  std::vector<TemplateOutcomes> groups;
  for (const auto& [t, outcomes] : by_template) {
    groups.push_back(TemplateOutcomes{t, outcomes});
  }
  return bear_score(groups);
}

}  // namespace

EvalReport build_eval_report(const RunMetadata& meta,
                             const std::vector<ResultRecord>& records) {
  if (records.empty()) throw DataError("no result records to aggregate");

  EvalReport report;
  report.meta = meta;
  report.record_count = records.size();

  auto cardinality_of = [&](const std::string& relation_id) {
    auto it = meta.relation_cardinality.find(relation_id);
    if (it == meta.relation_cardinality.end()) {
      throw DataError("result record references relation '" + relation_id +
                      "' missing from the run metadata");
    }
    return it->second;
  };

  std::map<int, std::vector<InstanceOutcome>> all, oto, nto;
  std::map<int, std::vector<size_t>> ranks_by_template;
  std::map<std::pair<std::string, int>, std::pair<size_t, size_t>> rel_tmpl;
  for (const ResultRecord& r : records) {
    const bool hit = r.rank_of_correct == 1;
    InstanceOutcome outcome{r.relation_id, r.instance_id, hit};
    all[r.template_index].push_back(outcome);
    (cardinality_of(r.relation_id) == Cardinality::OneToOne ? oto : nto)
        [r.template_index].push_back(outcome);
    ranks_by_template[r.template_index].push_back(r.rank_of_correct);
    auto& cell = rel_tmpl[{r.relation_id, r.template_index}];
    cell.second += 1;
    if (hit) cell.first += 1;
  }

  report.overall = subset_bear(all);
  if (!oto.empty()) report.one_to_one = subset_bear(oto);
  if (!nto.empty()) report.n_to_one = subset_bear(nto);

  for (const auto& [t, outcomes] : all) {
    TemplateAccuracy acc;
    acc.template_index = t;
    acc.count = outcomes.size();
    for (const InstanceOutcome& o : outcomes) {
      if (o.hit) ++acc.hits;
    }
    acc.accuracy =
        static_cast<double>(acc.hits) / static_cast<double>(acc.count);
    report.per_template.push_back(acc);
  }

  std::map<std::string, std::pair<double, size_t>> rel_mean;
  for (const auto& [key, cell] : rel_tmpl) {
    RelationTemplateAccuracy acc;
    acc.relation_id = key.first;
    acc.template_index = key.second;
    acc.hits = cell.first;
    acc.count = cell.second;
    acc.accuracy =
        static_cast<double>(acc.hits) / static_cast<double>(acc.count);
    report.per_relation_template.push_back(acc);
    auto& m = rel_mean[key.first];
    m.first += acc.accuracy;
    m.second += 1;
  }
  for (const auto& [relation_id, m] : rel_mean) {
    report.per_relation.push_back(
        RelationAccuracy{relation_id, m.first / static_cast<double>(m.second)});
  }

  for (size_t k : meta.precision_ks) {
    std::vector<double> per_template;
    for (const auto& [t, ranks] : ranks_by_template) {
      per_template.push_back(precision_at_k(ranks, k));
    }
    PrecisionAtK entry;
    entry.k = k;
    double total = 0.0;
    for (double v : per_template) total += v;
    entry.mean = total / static_cast<double>(per_template.size());
    if (per_template.size() > 1) {
      double ss = 0.0;
      for (double v : per_template) ss += (v - entry.mean) * (v - entry.mean);
      entry.std_error =
          std::sqrt(ss / static_cast<double>(per_template.size() - 1)) /
          std::sqrt(static_cast<double>(per_template.size()));
    }
    report.precision.push_back(entry);
  }

  // Analytic uniform-guessing baseline from the records' answer counts.
  std::map<std::pair<std::string, std::string>, size_t> instance_k;
  for (const ResultRecord& r : records) {
    instance_k[{r.relation_id, r.instance_id}] = r.scores.size();
  }
  double sum_all = 0.0, sum_oto = 0.0, sum_nto = 0.0;
  size_t n_all = 0, n_oto = 0, n_nto = 0;
  for (const auto& [key, k] : instance_k) {
    if (k == 0) continue;
    const double p = 1.0 / static_cast<double>(k);
    sum_all += p;
    ++n_all;
    if (cardinality_of(key.first) == Cardinality::OneToOne) {
      sum_oto += p;
      ++n_oto;
    } else {
      sum_nto += p;
      ++n_nto;
    }
  }
  if (n_all) report.baseline.overall = sum_all / static_cast<double>(n_all);
  if (n_oto) report.baseline.one_to_one = sum_oto / static_cast<double>(n_oto);
  if (n_nto) report.baseline.n_to_one = sum_nto / static_cast<double>(n_nto);
  return report;
}

namespace {

ordered_json bear_to_json(const BearScore& s) {
  ordered_json j;
  j["mean"] = s.mean;
  j["std_error"] = s.std_error;
  j["per_template"] = s.per_template;
  j["instance_count"] = s.instance_count;
  return j;
}

ordered_json optional_to_json(const std::optional<double>& v) {
  if (v) return ordered_json(*v);
  return ordered_json(nullptr);
}

}  // namespace

ordered_json report_to_json(const EvalReport& report) {
  const RunMetadata& meta = report.meta;
  ordered_json j;
  j["model"]["name"] = meta.model_name;
  j["model"]["params"] = optional_to_json(meta.model_params);
  j["backend"]["name"] = meta.backend_name;
  j["backend"]["revision"] = meta.backend_revision;
  j["backend"]["base"] = to_string(meta.backend_base);
  j["dataset"]["name"] = meta.dataset_name;
  j["dataset"]["version"] = meta.dataset_version;

  ordered_json cfg;
  cfg["mode"] = to_string(meta.config.mode);
  if (meta.config.pll_strategy) {
    cfg["pll_strategy"] = to_string(*meta.config.pll_strategy);
  } else {
    cfg["pll_strategy"] = nullptr;
  }
  cfg["reduction"] = to_string(meta.config.reduction);
  cfg["scope"] = to_string(meta.config.scope);
  if (meta.template_index) {
    cfg["templates"] = *meta.template_index;
  } else {
    cfg["templates"] = "all";
  }
  cfg["seed"] = meta.seed;
  cfg["precision_ks"] = meta.precision_ks;
  j["config"] = std::move(cfg);

  ordered_json rels = ordered_json::object();
  for (const auto& [id, card] : meta.relation_cardinality) {
    rels[id] = to_string(card);
  }
  j["relations"] = std::move(rels);

  j["scores"]["overall"] = bear_to_json(report.overall);
  j["scores"]["one_to_one"] =
      report.one_to_one ? bear_to_json(*report.one_to_one)
                        : ordered_json(nullptr);
  j["scores"]["n_to_one"] = report.n_to_one ? bear_to_json(*report.n_to_one)
                                            : ordered_json(nullptr);

  j["per_template"] = ordered_json::array();
  for (const TemplateAccuracy& a : report.per_template) {
    ordered_json e;
    e["template_index"] = a.template_index;
    e["hits"] = a.hits;
    e["count"] = a.count;
    e["accuracy"] = a.accuracy;
    j["per_template"].push_back(std::move(e));
  }
  j["per_relation"] = ordered_json::array();
  for (const RelationAccuracy& a : report.per_relation) {
    ordered_json e;
    e["relation_id"] = a.relation_id;
    e["accuracy"] = a.accuracy;
    j["per_relation"].push_back(std::move(e));
  }
  j["per_relation_template"] = ordered_json::array();
  for (const RelationTemplateAccuracy& a : report.per_relation_template) {
    ordered_json e;
    e["relation_id"] = a.relation_id;
    e["template_index"] = a.template_index;
    e["hits"] = a.hits;
    e["count"] = a.count;
    e["accuracy"] = a.accuracy;
    j["per_relation_template"].push_back(std::move(e));
  }
  j["precision_at_k"] = ordered_json::array();
  for (const PrecisionAtK& p : report.precision) {
    ordered_json e;
    e["k"] = p.k;
    e["mean"] = p.mean;
    e["std_error"] = p.std_error;
    j["precision_at_k"].push_back(std::move(e));
  }
  j["random_baseline"]["overall"] = optional_to_json(report.baseline.overall);
  j["random_baseline"]["one_to_one"] =
      optional_to_json(report.baseline.one_to_one);
  j["random_baseline"]["n_to_one"] =
      optional_to_json(report.baseline.n_to_one);
  j["record_count"] = report.record_count;
  return j;
}

RunMetadata metadata_from_report_json(const json& j) {
  RunMetadata meta;
  try {
    meta.model_name = j.at("model").at("name").get<std::string>();
    if (!j.at("model").at("params").is_null()) {
      meta.model_params = j.at("model").at("params").get<double>();
    }
    meta.backend_name = j.at("backend").at("name").get<std::string>();
    meta.backend_revision = j.at("backend").at("revision").get<std::string>();
    meta.backend_base =
        log_base_from_string(j.at("backend").at("base").get<std::string>());
    meta.dataset_name = j.at("dataset").at("name").get<std::string>();
    meta.dataset_version = j.at("dataset").at("version").get<std::string>();
    const json& cfg = j.at("config");
    meta.config.mode =
        scoring_mode_from_string(cfg.at("mode").get<std::string>());
    if (!cfg.at("pll_strategy").is_null()) {
      meta.config.pll_strategy =
          pll_strategy_from_string(cfg.at("pll_strategy").get<std::string>());
    }
    meta.config.reduction =
        reduction_from_string(cfg.at("reduction").get<std::string>());
    meta.config.scope = scope_from_string(cfg.at("scope").get<std::string>());
    if (cfg.at("templates").is_number_integer()) {
      meta.template_index = cfg.at("templates").get<int>();
    }
    meta.seed = cfg.at("seed").get<uint64_t>();
    meta.precision_ks = cfg.at("precision_ks").get<std::vector<size_t>>();
    for (const auto& [id, card] : j.at("relations").items()) {
      meta.relation_cardinality[id] =
          cardinality_from_string(card.get<std::string>());
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report metadata: ") + e.what());
  }
  return meta;
}

std::string report_to_text(const EvalReport& report) {
  const RunMetadata& meta = report.meta;
  std::ostringstream out;
  out << "model: " << meta.model_name << " | backend: " << meta.backend_name
      << "@" << meta.backend_revision << " | dataset: " << meta.dataset_name
      << " v" << meta.dataset_version << "\n";
  out << "config: mode=" << to_string(meta.config.mode);
  if (meta.config.pll_strategy) {
    out << " pll=" << to_string(*meta.config.pll_strategy);
  }
  out << " reduction=" << to_string(meta.config.reduction)
      << " scope=" << to_string(meta.config.scope) << " templates=";
  if (meta.template_index) {
    out << *meta.template_index;
  } else {
    out << "all";
  }
  out << " seed=" << meta.seed << "\n";

  auto line = [&](const char* label, const BearScore& s) {
    out << label << ": " << pct(s.mean) << " +/- " << pct(s.std_error) << " ("
        << s.per_template.size() << " template"
        << (s.per_template.size() == 1 ? "" : "s") << ", " << s.instance_count
        << " instances)\n";
  };
  line("overall", report.overall);
  if (report.one_to_one) line("1:1 subset", *report.one_to_one);
  if (report.n_to_one) line("N:1 subset", *report.n_to_one);

  out << "random baseline: ";
  out << (report.baseline.overall ? pct(*report.baseline.overall)
                                  : std::string("n/a"));
  if (report.baseline.one_to_one) {
    out << " (1:1 " << pct(*report.baseline.one_to_one);
    if (report.baseline.n_to_one) {
      out << ", N:1 " << pct(*report.baseline.n_to_one);
    }
    out << ")";
  } else if (report.baseline.n_to_one) {
    out << " (N:1 " << pct(*report.baseline.n_to_one) << ")";
  }
  out << "\n";

  for (const PrecisionAtK& p : report.precision) {
    out << "P@" << p.k << ": " << pct(p.mean) << " +/- " << pct(p.std_error)
        << "  ";
  }
  if (!report.precision.empty()) out << "\n";
  return out.str();
}

void require_comparable(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw ConfigError("no runs to compare");
  std::set<std::string> reference;
  for (const auto& [id, card] : reports[0].meta.relation_cardinality) {
    reference.insert(id);
  }
  for (const EvalReport& r : reports) {
    std::set<std::string> ids;
    for (const auto& [id, card] : r.meta.relation_cardinality) {
      ids.insert(id);
    }
    if (ids != reference) {
      throw ConfigError(
          "incomparable result sets: runs cover different relations");
    }
  }
}

std::string comparison_table(const std::vector<EvalReport>& reports) {
  require_comparable(reports);
  std::ostringstream out;
  out << "run summary\n";
  for (const EvalReport& r : reports) {
    out << "  " << r.meta.model_name << ": overall " << pct(r.overall.mean)
        << " +/- " << pct(r.overall.std_error);
    if (r.one_to_one) out << ", 1:1 " << pct(r.one_to_one->mean);
    if (r.n_to_one) out << ", N:1 " << pct(r.n_to_one->mean);
    out << "\n";
  }
  out << "\nper-relation accuracy (mean over templates)\n";
  out << "relation";
  for (const EvalReport& r : reports) out << "\t" << r.meta.model_name;
  out << "\n";

  // per_relation is sorted by relation id in every report.
  for (size_t i = 0; i < reports[0].per_relation.size(); ++i) {
    out << reports[0].per_relation[i].relation_id;
    for (const EvalReport& r : reports) {
      out << "\t" << pct(r.per_relation[i].accuracy);
    }
    out << "\n";
  }
  return out.str();
}

ordered_json accuracy_vs_size_plot(const std::vector<EvalReport>& reports) {
  ordered_json values = ordered_json::array();
  for (const EvalReport& r : reports) {
    if (!r.meta.model_params) continue;  // size unknown: point not plottable
    ordered_json v;
    v["model"] = r.meta.model_name;
    v["params"] = *r.meta.model_params;
    v["accuracy"] = r.overall.mean;
    v["lo"] = r.overall.mean - r.overall.std_error;
    v["hi"] = r.overall.mean + r.overall.std_error;
    values.push_back(std::move(v));
  }
  ordered_json spec;
  spec["$schema"] = "https://vega.github.io/schema/vega-lite/v5.json";
  spec["description"] = "Probe score vs model size";
  spec["data"]["values"] = std::move(values);
  ordered_json x;
  x["field"] = "params";
  x["type"] = "quantitative";
  x["scale"]["type"] = "log";
  x["title"] = "parameters (billions)";

  ordered_json points;
  points["mark"]["type"] = "point";
  points["mark"]["filled"] = true;
  points["encoding"]["x"] = x;
  points["encoding"]["y"]["field"] = "accuracy";
  points["encoding"]["y"]["type"] = "quantitative";
  points["encoding"]["y"]["title"] = "probe score";
  points["encoding"]["tooltip"]["field"] = "model";

  ordered_json bars;
  bars["mark"]["type"] = "rule";
  bars["encoding"]["x"] = x;
  bars["encoding"]["y"]["field"] = "lo";
  bars["encoding"]["y"]["type"] = "quantitative";
  bars["encoding"]["y2"]["field"] = "hi";

  spec["layer"] = ordered_json::array({points, bars});
  return spec;
}

ordered_json per_relation_plot(const std::vector<EvalReport>& reports) {
  ordered_json values = ordered_json::array();
  for (const EvalReport& r : reports) {
    for (const RelationAccuracy& a : r.per_relation) {
      ordered_json v;
      v["relation"] = a.relation_id;
      v["model"] = r.meta.model_name;
      v["accuracy"] = a.accuracy;
      values.push_back(std::move(v));
    }
  }
  ordered_json spec;
  spec["$schema"] = "https://vega.github.io/schema/vega-lite/v5.json";
  spec["description"] = "Per-relation probe accuracy";
  spec["data"]["values"] = std::move(values);
  spec["mark"] = "bar";
  spec["encoding"]["x"]["field"] = "relation";
  spec["encoding"]["x"]["type"] = "nominal";
  spec["encoding"]["x"]["sort"] = nullptr;
  spec["encoding"]["y"]["field"] = "accuracy";
  spec["encoding"]["y"]["type"] = "quantitative";
  spec["encoding"]["xOffset"]["field"] = "model";
  spec["encoding"]["color"]["field"] = "model";
  return spec;
}

}  // namespace lmprobe
