#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lmprobe/builder.hpp"
#include "lmprobe/dataset.hpp"
#include "lmprobe/error.hpp"
#include "lmprobe/fixtures.hpp"
#include "lmprobe/metrics.hpp"
#include "lmprobe/reference_scorer.hpp"
#include "lmprobe/report.hpp"
#include "lmprobe/runner.hpp"
#include "lmprobe/server.hpp"
#include "lmprobe/text_util.hpp"

namespace {

using namespace lmprobe;
using nlohmann::json;
using nlohmann::ordered_json;

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", v * 100.0);
  return buf;
}

std::vector<size_t> parse_ks(const std::string& csv) {
  std::vector<size_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t{trim(item)};
    if (t.empty()) continue;
    const long v = std::stol(t);
    if (v < 1) throw ConfigError("precision@k needs k >= 1, got " + t);
    out.push_back(static_cast<size_t>(v));
  }
  if (out.empty()) throw ConfigError("--pk needs at least one k");
  return out;
}

int cmd_probe(const std::string& dataset_dir, const std::string& out_dir,
              const std::string& backend_url, const std::string& backend_name,
              const std::string& mode, const std::string& pll_strategy,
              const std::string& reduction, const std::string& scope,
              const std::string& templates, size_t parallelism,
              const std::string& cache_path, uint64_t seed,
              const std::string& model_name, double model_params,
              bool has_params, const std::string& pk_csv, size_t limit,
              size_t max_in_flight, bool no_batch, int balance_spread) {
  RunConfig config;
  config.dataset_dir = dataset_dir;
  config.out_dir = out_dir;
  if (!cache_path.empty()) config.cache_path = cache_path;
  config.parallelism = parallelism;
  config.seed = seed;
  config.model_name = model_name;
  if (has_params) config.model_params = model_params;
  config.precision_ks = parse_ks(pk_csv);
  config.limit = limit;
  config.validation.max_balance_spread = balance_spread;

  config.scoring.mode = scoring_mode_from_string(mode);
  if (config.scoring.mode == ScoringMode::Masked) {
    config.scoring.pll_strategy = pll_strategy_from_string(
        pll_strategy.empty() ? "within-word-l2r" : pll_strategy);
  } else if (!pll_strategy.empty()) {
    throw ConfigError("--pll-strategy only applies to --mode masked");
  }
  config.scoring.reduction = reduction_from_string(reduction);
  config.scoring.scope = scope_from_string(scope);

  if (templates != "all") {
    try {
      config.template_index = std::stoi(templates);
    } catch (const std::exception&) {
      throw ConfigError("--templates must be 'all' or a template index");
    }
  }

  if (!backend_url.empty()) {
    HttpBackendSpec http;
    http.url = backend_url;
    http.options.max_in_flight = max_in_flight;
    http.options.enable_batch = !no_batch;
    if (const char* token = std::getenv("LMPROBE_AUTH_TOKEN")) {
      http.options.auth_token = token;
    }
    config.backend = http;
  } else if (backend_name == "reference") {
    config.backend = ReferenceBackendSpec{seed};
  } else if (backend_name == "oracle") {
    config.backend = OracleBackendSpec{OracleKind::Perfect};
  } else if (backend_name == "anti-oracle") {
    config.backend = OracleBackendSpec{OracleKind::Anti};
  } else if (backend_name == "half-oracle") {
    config.backend = OracleBackendSpec{OracleKind::Half};
  } else {
    throw ConfigError("unknown backend '" + backend_name +
                      "' (expected reference, oracle, anti-oracle, "
                      "half-oracle, or --backend-url)");
  }

  const RunResult result = run_probe(config);
  if (result.exit_code == 3) {
    std::cout << "partial completion: " << result.records_total
              << " records persisted (" << result.records_new
              << " new); rerun with the same flags to resume\n";
    return 3;
  }
  std::cout << report_to_text(*result.report);
  std::cout << "backend calls: " << result.backend_calls.total()
            << " (tokenize " << result.backend_calls.tokenize << ", causal "
            << result.backend_calls.causal << ", masked "
            << result.backend_calls.masked << ")\n";
  std::cout << "results: " << (config.out_dir / "results.jsonl").string()
            << "\n";
  return 0;
}

int cmd_baseline(const std::string& dataset_dir, size_t trials, uint64_t seed,
                 const std::string& json_out) {
  const Dataset dataset = load_dataset(dataset_dir);
  const RandomBaseline analytic = random_baseline(dataset);
  const MonteCarloBaseline mc = monte_carlo_baseline(dataset, trials, seed);

  auto show = [&](const char* label, const std::optional<double>& v) {
    std::cout << label << ": " << (v ? pct(*v) : std::string("n/a")) << "\n";
  };
  std::cout << "analytic random baseline\n";
  show("  overall", analytic.overall);
  show("  1:1 subset", analytic.one_to_one);
  show("  N:1 subset", analytic.n_to_one);
  std::cout << "monte-carlo estimate (" << trials << " trials, seed " << seed
            << ")\n";
  std::cout << "  overall: " << pct(mc.accuracy) << " +/- "
            << pct(mc.std_error) << "\n";

  if (!json_out.empty()) {
    ordered_json j;
    auto opt = [](const std::optional<double>& v) {
      return v ? ordered_json(*v) : ordered_json(nullptr);
    };
    j["analytic"]["overall"] = opt(analytic.overall);
    j["analytic"]["one_to_one"] = opt(analytic.one_to_one);
    j["analytic"]["n_to_one"] = opt(analytic.n_to_one);
    j["monte_carlo"]["accuracy"] = mc.accuracy;
    j["monte_carlo"]["std_error"] = mc.std_error;
    j["monte_carlo"]["trials"] = mc.trials;
    j["monte_carlo"]["seed"] = mc.seed;
    std::ofstream out(json_out, std::ios::trunc);
    if (!out) throw DataError("cannot write " + json_out);
    out << j.dump(2) << "\n";
  }
  return 0;
}

int cmd_validate(const std::string& dataset_dir, int balance_spread,
                 bool strict) {
  const Dataset dataset = load_dataset(dataset_dir);
  ValidationConfig config;
  config.max_balance_spread = balance_spread;
  if (strict) config.balance = Severity::Error;
  const ValidationReport report = validate_dataset(dataset, config);
  std::cout << report.to_text();
  return report.ok() ? 0 : 1;
}

std::vector<RawTriple> load_triples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open triples file " + path);
  std::vector<RawTriple> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": malformed triple record");
    }
    RawTriple t;
    t.subject_id = j.value("subject_id", std::string{});
    t.subject_label = j.value("subject_label", std::string{});
    t.relation_id = j.value("relation_id", std::string{});
    t.object_id = j.value("object_id", std::string{});
    t.object_label = j.value("object_label", std::string{});
    t.sitelink_count = j.value("sitelink_count", int64_t{0});
    if (j.contains("page_views") && !j["page_views"].is_null()) {
      t.page_views = j["page_views"].get<int64_t>();
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<RelationSpec> load_relation_specs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open relations file " + path);
  std::vector<RelationSpec> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("id") || !j.contains("cardinality") ||
        !j.contains("templates") || !j["templates"].is_array()) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": relation spec needs id, cardinality, templates[]");
    }
    RelationSpec spec;
    spec.id = j["id"].get<std::string>();
    spec.cardinality =
        cardinality_from_string(j["cardinality"].get<std::string>());
    for (const json& t : j["templates"]) {
      spec.templates.push_back(TemplateString{t.get<std::string>()});
    }
    out.push_back(std::move(spec));
  }
  return out;
}

int cmd_build_dataset(const std::string& triples_path,
                      const std::string& relations_path,
                      const std::string& out_dir, const BuilderConfig& config,
                      uint64_t seed, const std::string& name) {
  const std::vector<RawTriple> triples = load_triples(triples_path);
  const std::vector<RelationSpec> specs = load_relation_specs(relations_path);
  if (specs.empty()) throw DataError("no relation specs given");

  Dataset dataset;
  dataset.metadata.name = name;
  dataset.metadata.version = "1";
  dataset.metadata.source_note =
      "built from " + triples_path + " (popularity source: " +
      (config.popularity_source == PopularitySource::PageViews ? "page views"
                                                               : "sitelinks") +
      ")";

  ordered_json build_report;
  build_report["relations"] = ordered_json::array();
  size_t feasible = 0;
  for (const RelationSpec& spec : specs) {
    BuildOutcome outcome = build_relation(triples, spec, config, seed);
    ordered_json entry;
    entry["id"] = spec.id;
    entry["cardinality"] = to_string(spec.cardinality);
    if (outcome.relation) {
      ++feasible;
      entry["status"] = "built";
      entry["answers"] = outcome.relation->answer_space.size();
      entry["instances"] = outcome.achieved_instances;
      entry["target_instances"] = outcome.target_instances;
      entry["outlier_answers"] = outcome.outlier_answers;
      dataset.relations.push_back(std::move(*outcome.relation));
    } else {
      entry["status"] = "infeasible";
      entry["reason"] = outcome.infeasible_reason;
    }
    entry["dropped"]["unlabeled"] = outcome.selection_stats.dropped_unlabeled;
    entry["dropped"]["low_popularity"] =
        outcome.selection_stats.dropped_low_popularity;
    entry["dropped"]["leaky"] = outcome.selection_stats.dropped_leaky;
    entry["dropped"]["conflicting_subjects"] =
        outcome.selection_stats.dropped_conflicting_subjects;
    build_report["relations"].push_back(std::move(entry));
    std::cout << spec.id << ": "
              << (dataset.relations.size() &&
                          dataset.relations.back().id == spec.id
                      ? "built"
                      : "infeasible (" + outcome.infeasible_reason + ")")
              << "\n";
  }
  if (dataset.relations.empty()) {
    throw DataError("no relation was feasible; nothing to write");
  }
  save_dataset(dataset, out_dir);
  std::ofstream out(std::filesystem::path(out_dir) / "build_report.json",
                    std::ios::trunc);
  out << build_report.dump(2) << "\n";
  std::cout << feasible << "/" << specs.size() << " relations built -> "
            << out_dir << "\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& run_dirs,
               const std::string& out_dir) {
  std::vector<EvalReport> reports;
  for (const std::string& dir : run_dirs) {
    const std::filesystem::path run(dir);
    std::ifstream in(run / "report.json");
    if (!in) throw DataError("cannot open " + (run / "report.json").string());
    std::stringstream buf;
    buf << in.rdbuf();
    const json j = json::parse(buf.str(), nullptr, false);
    if (j.is_discarded()) {
      throw DataError((run / "report.json").string() + " is not valid JSON");
    }
    const RunMetadata meta = metadata_from_report_json(j);
    reports.push_back(
        build_eval_report(meta, read_result_records(run / "results.jsonl")));
  }
  require_comparable(reports);

  const std::string table = comparison_table(reports);
  std::cout << table;

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path out(out_dir);
  {
    std::ofstream f(out / "summary.txt", std::ios::trunc);
    f << table;
  }
  {
    ordered_json all = ordered_json::array();
    for (const EvalReport& r : reports) all.push_back(report_to_json(r));
    std::ofstream f(out / "summary.json", std::ios::trunc);
    f << all.dump(2) << "\n";
  }
  {
    std::ofstream f(out / "accuracy_vs_size.vl.json", std::ios::trunc);
    f << accuracy_vs_size_plot(reports).dump(2) << "\n";
  }
  {
    std::ofstream f(out / "per_relation.vl.json", std::ios::trunc);
    f << per_relation_plot(reports).dump(2) << "\n";
  }
  std::cout << "wrote summary.txt, summary.json, accuracy_vs_size.vl.json, "
               "per_relation.vl.json to "
            << out_dir << "\n";
  return 0;
}

int cmd_serve(const std::string& host, int port, uint64_t seed) {
  auto scorer = make_reference_scorer(seed);
  WireServer server(*scorer);
  std::cout << "serving reference backend (seed " << seed << ") on " << host
            << ":" << port << "\n";
  server.serve_blocking(host, port);
  return 0;
}

int cmd_make_fixture(const std::string& profile, const std::string& out_dir) {
  Dataset ds;
  if (profile == "release-stats") {
    ds = make_release_stats_fixture();
  } else if (profile == "desk") {
    ds = make_desk_fixture();
  } else if (profile == "tiny") {
    ds = make_tiny_fixture();
  } else {
    throw ConfigError("unknown fixture profile '" + profile +
                      "' (expected release-stats, desk, or tiny)");
  }
  save_dataset(ds, out_dir);
  std::cout << "wrote " << ds.relations.size() << " relations, "
            << ds.total_instances() << " instances to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "lmprobe: rank per-answer statements by (pseudo) log-likelihood and "
      "score factual knowledge of language-model backends"};
  app.require_subcommand(1);

  // --- probe ---------------------------------------------------------------
  auto* probe = app.add_subcommand(
      "probe", "Score a dataset against a backend and write result records");
  std::string p_dataset, p_out, p_backend_url, p_backend = "reference";
  std::string p_mode = "causal", p_pll, p_reduction = "sum", p_scope = "full";
  std::string p_templates = "all", p_cache, p_model_name, p_pk = "1,5,10";
  size_t p_parallelism = 1, p_limit = 0, p_max_in_flight = 8;
  uint64_t p_seed = 0;
  double p_model_params = 0.0;
  bool p_no_batch = false;
  int p_balance_spread = 1;
  probe->add_option("--dataset", p_dataset, "Dataset directory")->required();
  probe->add_option("--out", p_out, "Output directory")->required();
  probe->add_option("--backend-url", p_backend_url,
                    "Wire-protocol backend base URL (http://host:port)");
  probe->add_option(
      "--backend", p_backend,
      "Built-in backend: reference, oracle, anti-oracle, half-oracle");
  probe->add_option("--mode", p_mode, "Scoring mode: causal or masked");
  probe->add_option("--pll-strategy", p_pll,
                    "Masked schedule: original or within-word-l2r");
  probe->add_option("--reduction", p_reduction, "Reduction: sum or mean");
  probe->add_option("--scope", p_scope, "Scope: full or answer-only");
  probe->add_option("--templates", p_templates,
                    "Template selection: all or an index");
  probe->add_option("--parallelism", p_parallelism, "Worker thread count");
  probe->add_option("--cache", p_cache, "Score cache file (JSONL)");
  probe->add_option("--seed", p_seed, "Run seed (reference backend, records)");
  probe->add_option("--model-name", p_model_name,
                    "Model name for reports (default: backend identity)");
  auto* params_opt = probe->add_option("--model-params", p_model_params,
                                       "Model size in billions, for plots");
  probe->add_option("--pk", p_pk, "Precision@k list, comma-separated");
  probe->add_option("--limit", p_limit,
                    "Stop after N new records (partial completion, exit 3)");
  probe->add_option("--max-in-flight", p_max_in_flight,
                    "Max concurrent backend requests");
  probe->add_flag("--no-batch", p_no_batch,
                  "Never use the batch masked endpoint");
  probe->add_option("--balance-spread", p_balance_spread,
                    "Max instances-per-answer spread tolerated by validation");

  // --- baseline ------------------------------------------------------------
  auto* baseline = app.add_subcommand(
      "baseline", "Analytic and Monte-Carlo random-guessing baselines");
  std::string b_dataset, b_json;
  size_t b_trials = 100000;
  uint64_t b_seed = 0;
  baseline->add_option("--dataset", b_dataset, "Dataset directory")
      ->required();
  baseline->add_option("--trials", b_trials, "Monte-Carlo trial count");
  baseline->add_option("--seed", b_seed, "Monte-Carlo seed");
  baseline->add_option("--json", b_json, "Also write the numbers as JSON");

  // --- validate ------------------------------------------------------------
  auto* validate = app.add_subcommand(
      "validate", "Check dataset invariants and print a findings report");
  std::string v_dataset;
  int v_spread = 1;
  bool v_strict = false;
  validate->add_option("--dataset", v_dataset, "Dataset directory")
      ->required();
  validate->add_option("--balance-spread", v_spread,
                       "Max instances-per-answer spread");
  validate->add_flag("--strict", v_strict,
                     "Treat balance violations as errors");

  // --- build-dataset ---------------------------------------------------------
  auto* build = app.add_subcommand(
      "build-dataset", "Build a balanced probing dataset from raw triples");
  std::string d_triples, d_relations, d_out, d_name = "built-dataset";
  std::string d_popularity = "page-views";
  BuilderConfig d_config;
  uint64_t d_seed = 0;
  build->add_option("--triples", d_triples, "Raw triples (JSONL)")
      ->required();
  build->add_option("--relations", d_relations, "Relation specs (JSONL)")
      ->required();
  build->add_option("--out", d_out, "Output dataset directory")->required();
  build->add_option("--answer-cap", d_config.answer_cap,
                    "Max answers per N:1 relation");
  build->add_option("--per-answer", d_config.per_answer_target,
                    "Instances per answer (N:1)");
  build->add_option("--one-to-one-cap", d_config.one_to_one_cap,
                    "Max answers for 1:1 relations");
  build->add_option("--min-page-views", d_config.min_page_views,
                    "Popularity floor for subjects");
  build->add_option("--leakage-threshold", d_config.leakage_threshold,
                    "Fuzzy-similarity cutoff for leak filtering");
  build->add_option("--min-answers", d_config.min_answers,
                    "Smallest feasible answer space");
  build->add_option("--popularity", d_popularity,
                    "Popularity source: page-views or sitelinks");
  build->add_option("--seed", d_seed, "Sampling seed for 1:1 relations");
  build->add_option("--name", d_name, "Dataset name for the manifest");

  // --- report ----------------------------------------------------------------
  auto* report = app.add_subcommand(
      "report", "Merge finished runs into tables and plot specs");
  std::vector<std::string> r_runs;
  std::string r_out;
  report->add_option("--run", r_runs, "Run output directory (repeatable)")
      ->required();
  report->add_option("--out", r_out, "Report output directory")->required();

  // --- serve -----------------------------------------------------------------
  auto* serve = app.add_subcommand(
      "serve", "Host the deterministic reference backend over HTTP");
  std::string s_host = "127.0.0.1";
  int s_port = 0;
  uint64_t s_seed = 0;
  serve->add_option("--host", s_host, "Bind host");
  serve->add_option("--port", s_port, "Bind port")->required();
  serve->add_option("--seed", s_seed, "Reference scorer seed");

  // --- make-fixture ------------------------------------------------------------
  auto* fixture = app.add_subcommand(
      "make-fixture", "Write a bundled synthetic dataset to disk");
  std::string f_profile = "tiny", f_out;
  fixture->add_option("--profile", f_profile,
                      "release-stats, desk, or tiny");
  fixture->add_option("--out", f_out, "Output dataset directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (probe->parsed()) {
      if (!p_backend_url.empty() && probe->count("--backend") > 0) {
        throw ConfigError("--backend and --backend-url are mutually exclusive");
      }
      return cmd_probe(p_dataset, p_out, p_backend_url, p_backend, p_mode,
                       p_pll, p_reduction, p_scope, p_templates, p_parallelism,
                       p_cache, p_seed, p_model_name, p_model_params,
                       params_opt->count() > 0, p_pk, p_limit, p_max_in_flight,
                       p_no_batch, p_balance_spread);
    }
    if (baseline->parsed()) {
      return cmd_baseline(b_dataset, b_trials, b_seed, b_json);
    }
    if (validate->parsed()) {
      return cmd_validate(v_dataset, v_spread, v_strict);
    }
    if (build->parsed()) {
      if (d_popularity == "page-views") {
        d_config.popularity_source = PopularitySource::PageViews;
      } else if (d_popularity == "sitelinks") {
        d_config.popularity_source = PopularitySource::Sitelinks;
      } else {
        throw ConfigError("--popularity must be page-views or sitelinks");
      }
      return cmd_build_dataset(d_triples, d_relations, d_out, d_config, d_seed,
                               d_name);
    }
    if (report->parsed()) {
      return cmd_report(r_runs, r_out);
    }
    if (serve->parsed()) {
      return cmd_serve(s_host, s_port, s_seed);
    }
    if (fixture->parsed()) {
      return cmd_make_fixture(f_profile, f_out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const BackendError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ProtocolError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
