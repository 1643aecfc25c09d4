#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <vector>

#include <json.hpp>

#include "helpers.hpp"
#include "lmprobe/error.hpp"
#include "lmprobe/executor.hpp"
#include "lmprobe/fixtures.hpp"
#include "lmprobe/report.hpp"
#include "lmprobe/results.hpp"
#include "lmprobe/runner.hpp"
#include "lmprobe/server.hpp"

using namespace lmprobe;
using nlohmann::json;
using testutil::TempDir;
using testutil::read_file;
using testutil::write_file;

namespace {

ResultRecord sample_record(int t) {
  ResultRecord r;
  r.relation_id = "R01";
  r.instance_id = "R01-i0";
  r.template_index = t;
  r.scores = {-1.5, -0.25, -3.0};
  r.predicted_answer_id = "R01-a1";
  r.correct_answer_id = "R01-a2";
  r.rank_of_correct = 3;
  r.tie_flag = false;
  r.probabilities = {0.2, 0.7, 0.1};
  r.uncertainty = 0.42;
  return r;
}

RunConfig reference_config(const std::filesystem::path& dataset_dir,
                           const std::filesystem::path& out_dir,
                           uint64_t seed = 7) {
  RunConfig config;
  config.dataset_dir = dataset_dir;
  config.out_dir = out_dir;
  config.backend = ReferenceBackendSpec{seed};
  config.scoring.mode = ScoringMode::Causal;
  config.scoring.reduction = Reduction::Sum;
  config.scoring.scope = Scope::Full;
  return config;
}

HttpScorerOptions fast_options() {
  HttpScorerOptions o;
  o.backoff_initial_ms = 1;
  o.connect_timeout_s = 2;
  o.read_timeout_s = 10;
  return o;
}

std::filesystem::path save_tiny(const TempDir& dir) {
  const std::filesystem::path p = dir.path / "dataset";
  save_dataset(make_tiny_fixture(), p);
  return p;
}

}  // namespace

TEST_CASE("result records round-trip through JSONL") {
  TempDir tmp;
  const auto file = tmp.path / "records.jsonl";

  ResultRecord a = sample_record(0);
  ResultRecord b = sample_record(1);
  b.instance_id = "R01-i1";
  b.tie_flag = true;
  b.uncertainty.reset();  // single-answer case serializes as null

  write_result_records(file, {a, b});
  const std::vector<ResultRecord> got = read_result_records(file);
  REQUIRE(got.size() == 2);

  CHECK(got[0].relation_id == a.relation_id);
  CHECK(got[0].instance_id == a.instance_id);
  CHECK(got[0].template_index == a.template_index);
  CHECK(got[0].scores == a.scores);
  CHECK(got[0].predicted_answer_id == a.predicted_answer_id);
  CHECK(got[0].correct_answer_id == a.correct_answer_id);
  CHECK(got[0].rank_of_correct == a.rank_of_correct);
  CHECK(got[0].tie_flag == a.tie_flag);
  CHECK(got[0].probabilities == a.probabilities);
  REQUIRE(got[0].uncertainty.has_value());
  CHECK(*got[0].uncertainty == *a.uncertainty);

  CHECK(got[1].instance_id == "R01-i1");
  CHECK(got[1].tie_flag);
  CHECK_FALSE(got[1].uncertainty.has_value());

  // Writing the parsed records again reproduces the file byte for byte.
  const auto file2 = tmp.path / "records2.jsonl";
  write_result_records(file2, got);
  CHECK(read_file(file) == read_file(file2));
}

TEST_CASE("malformed result lines are reported with file and line") {
  TempDir tmp;
  const auto file = tmp.path / "bad.jsonl";

  SUBCASE("unparseable JSON") {
    write_file(file, result_record_to_json(sample_record(0)).dump() +
                         "\n{this is not json\n");
    const std::string expected = file.string() + ":2";
    CHECK_THROWS_WITH_AS(read_result_records(file),
                         doctest::Contains(expected.c_str()), DataError);
  }
  SUBCASE("missing field") {
    json j = json::parse(result_record_to_json(sample_record(0)).dump());
    j.erase("rank_of_correct");
    write_file(file, j.dump() + "\n");
    try {
      read_result_records(file);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      const std::string msg = e.what();
      CHECK(msg.find(file.string() + ":1") != std::string::npos);
      CHECK(msg.find("malformed result record") != std::string::npos);
    }
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(read_result_records(tmp.path / "nope.jsonl"), DataError);
  }
}

TEST_CASE("probe run writes identical bytes at every parallelism width") {
  TempDir tmp;
  const auto ds = save_tiny(tmp);

  RunConfig c1 = reference_config(ds, tmp.path / "out1");
  c1.parallelism = 1;
  const RunResult r1 = run_probe(c1);

  RunConfig c4 = reference_config(ds, tmp.path / "out4");
  c4.parallelism = 4;
  const RunResult r4 = run_probe(c4);

  CHECK(r1.exit_code == 0);
  CHECK(r4.exit_code == 0);
  // 15 instances x 3 templates.
  CHECK(r1.records_new == 45);
  CHECK(r1.records_total == 45);
  CHECK(r4.records_total == 45);
  REQUIRE(r1.report.has_value());
  CHECK(r1.report->record_count == 45);

  for (const char* name : {"results.jsonl", "report.json", "report.txt"}) {
    CAPTURE(name);
    CHECK(read_file(tmp.path / "out1" / name) ==
          read_file(tmp.path / "out4" / name));
  }

  // Completion removes the progress artifacts.
  CHECK_FALSE(std::filesystem::exists(tmp.path / "out1" /
                                      "results.partial.jsonl"));
  CHECK_FALSE(std::filesystem::exists(tmp.path / "out1" / "run_config.json"));

  // Output never embeds timestamps: rerunning into a fresh directory later
  // gives the same bytes.
  RunConfig again = reference_config(ds, tmp.path / "out_again");
  run_probe(again);
  CHECK(read_file(tmp.path / "out1" / "results.jsonl") ==
        read_file(tmp.path / "out_again" / "results.jsonl"));
  CHECK(read_file(tmp.path / "out1" / "report.json") ==
        read_file(tmp.path / "out_again" / "report.json"));
}

TEST_CASE("interrupted run resumes to the same bytes as a single pass") {
  TempDir tmp;
  const auto ds = save_tiny(tmp);

  RunConfig full = reference_config(ds, tmp.path / "full");
  run_probe(full);

  RunConfig part = reference_config(ds, tmp.path / "resumed");
  part.limit = 7;
  const RunResult first = run_probe(part);
  CHECK(first.exit_code == 3);
  CHECK(first.records_new == 7);
  CHECK(first.records_total == 7);
  CHECK_FALSE(first.report.has_value());
  CHECK(std::filesystem::exists(tmp.path / "resumed" /
                                "results.partial.jsonl"));
  CHECK(std::filesystem::exists(tmp.path / "resumed" / "run_config.json"));
  CHECK_FALSE(std::filesystem::exists(tmp.path / "resumed" / "results.jsonl"));

  part.limit = 0;
  const RunResult second = run_probe(part);
  CHECK(second.exit_code == 0);
  CHECK(second.records_new == 38);
  CHECK(second.records_total == 45);

  for (const char* name : {"results.jsonl", "report.json", "report.txt"}) {
    CAPTURE(name);
    CHECK(read_file(tmp.path / "full" / name) ==
          read_file(tmp.path / "resumed" / name));
  }
  CHECK_FALSE(std::filesystem::exists(tmp.path / "resumed" /
                                      "results.partial.jsonl"));
  CHECK_FALSE(std::filesystem::exists(tmp.path / "resumed" /
                                      "run_config.json"));
}

TEST_CASE("resume rejects a drifted configuration") {
  TempDir tmp;
  const auto ds = save_tiny(tmp);

  RunConfig config = reference_config(ds, tmp.path / "out");
  config.limit = 5;
  CHECK(run_probe(config).exit_code == 3);

  SUBCASE("different reduction") {
    config.scoring.reduction = Reduction::Mean;
  }
  SUBCASE("different seed") { config.seed = 99; }
  SUBCASE("different template selection") { config.template_index = 0; }
  SUBCASE("different backend revision") {
    config.backend = ReferenceBackendSpec{8};
  }
  config.limit = 0;
  CHECK_THROWS_WITH_AS(
      run_probe(config),
      doctest::Contains("holds partial results from a different "
                        "configuration"),
      ConfigError);
}

TEST_CASE("resume rejects partial results for a changed dataset") {
  TempDir tmp;
  const auto ds_dir = tmp.path / "dataset";
  Dataset ds = make_tiny_fixture();
  save_dataset(ds, ds_dir);

  RunConfig config = reference_config(ds_dir, tmp.path / "out");
  config.limit = 5;
  CHECK(run_probe(config).exit_code == 3);

  // Same dataset name and version, but the instance the partial recorded is
  // gone: the guard cannot tell the difference, the record check can.
  ds.relations[0].instances[0].instance_id = "R01-i0-renamed";
  save_dataset(ds, ds_dir);

  config.limit = 0;
  CHECK_THROWS_WITH_AS(run_probe(config),
                       doctest::Contains("the dataset changed"), ConfigError);
}

TEST_CASE("backend failure persists progress and the run resumes over HTTP") {
  TempDir tmp;
  const auto ds = save_tiny(tmp);

  // Reference run for the expected bytes (same identity surfaces over HTTP).
  RunConfig expected = reference_config(ds, tmp.path / "expected", 21);
  run_probe(expected);

  // A server whose causal endpoint dies permanently after a few calls.
  const std::unique_ptr<Scorer> healthy = make_reference_scorer(21);
  std::atomic<int> causal_calls{0};
  testutil::ScriptedScorer flaky;
  flaky.id = healthy->identity();
  flaky.on_tokenize = [&](const std::string& text) {
    return healthy->tokenize(text);
  };
  flaky.on_causal = [&](const std::string& text) {
    if (causal_calls.fetch_add(1) >= 6) {
      throw BackendError("gpu fell over");
    }
    return healthy->causal_logprobs(text);
  };

  WireServer bad_server(flaky);
  const int bad_port = bad_server.start_on_any_port();

  RunConfig config = reference_config(ds, tmp.path / "resumed", 21);
  HttpScorerOptions options = fast_options();
  config.backend =
      HttpBackendSpec{"http://127.0.0.1:" + std::to_string(bad_port), options};
  // Sequential, so the first work item (4 answers = 4 causal calls) is
  // guaranteed to finish before the failure threshold trips mid-item 2.
  config.parallelism = 1;

  try {
    run_probe(config);
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("partial progress saved to") != std::string::npos);
    CHECK(msg.find((tmp.path / "resumed" / "results.partial.jsonl").string()) !=
          std::string::npos);
    CHECK(msg.find("rerun with the same flags to resume") != std::string::npos);
  }
  bad_server.stop();

  const std::vector<ResultRecord> partial =
      read_result_records(tmp.path / "resumed" / "results.partial.jsonl");
  CHECK(partial.size() >= 1);
  CHECK(partial.size() < 45);
  CHECK_FALSE(std::filesystem::exists(tmp.path / "resumed" / "results.jsonl"));

  // Resume against a healthy server on a fresh port; the guard keys on the
  // backend identity, not its address.
  WireServer good_server(*healthy);
  const int good_port = good_server.start_on_any_port();
  config.backend = HttpBackendSpec{
      "http://127.0.0.1:" + std::to_string(good_port), options};
  const RunResult resumed = run_probe(config);
  good_server.stop();

  CHECK(resumed.exit_code == 0);
  CHECK(resumed.records_total == 45);
  CHECK(resumed.records_new == 45 - partial.size());
  CHECK(read_file(tmp.path / "expected" / "results.jsonl") ==
        read_file(tmp.path / "resumed" / "results.jsonl"));
  CHECK(read_file(tmp.path / "expected" / "report.txt") ==
        read_file(tmp.path / "resumed" / "report.txt"));
}

TEST_CASE("a warm cache answers the whole second run") {
  TempDir tmp;
  const auto ds = save_tiny(tmp);
  const auto cache = tmp.path / "scores.cache.jsonl";

  RunConfig cold = reference_config(ds, tmp.path / "cold");
  cold.cache_path = cache;
  cold.scoring.mode = ScoringMode::Masked;
  cold.scoring.pll_strategy = PllStrategy::WithinWordL2R;
  const RunResult first = run_probe(cold);
  CHECK(first.backend_calls.total() > 0);

  RunConfig warm = cold;
  warm.out_dir = tmp.path / "warm";
  const RunResult second = run_probe(warm);
  CHECK(second.backend_calls.total() == 0);
  CHECK(second.backend_calls.tokenize == 0);
  CHECK(second.backend_calls.masked == 0);

  CHECK(read_file(tmp.path / "cold" / "results.jsonl") ==
        read_file(tmp.path / "warm" / "results.jsonl"));
  CHECK(read_file(tmp.path / "cold" / "report.json") ==
        read_file(tmp.path / "warm" / "report.json"));
}

TEST_CASE("template selection restricts the run") {
  TempDir tmp;
  const auto ds = save_tiny(tmp);

  RunConfig config = reference_config(ds, tmp.path / "out");
  config.template_index = 1;
  const RunResult result = run_probe(config);
  CHECK(result.records_total == 15);

  const std::vector<ResultRecord> records =
      read_result_records(tmp.path / "out" / "results.jsonl");
  REQUIRE(records.size() == 15);
  for (const ResultRecord& r : records) CHECK(r.template_index == 1);

  REQUIRE(result.report.has_value());
  REQUIRE(result.report->per_template.size() == 1);
  CHECK(result.report->per_template[0].template_index == 1);
  // One template: no spread across templates, so no standard error.
  CHECK(result.report->overall.std_error == 0.0);

  RunConfig bad = reference_config(ds, tmp.path / "out_bad");
  bad.template_index = 7;
  CHECK_THROWS_WITH_AS(run_probe(bad), doctest::Contains("has no template"),
                       ConfigError);
  RunConfig negative = reference_config(ds, tmp.path / "out_neg");
  negative.template_index = -1;
  CHECK_THROWS_AS(run_probe(negative), ConfigError);
}

TEST_CASE("run metadata defaults and overrides") {
  TempDir tmp;
  const auto ds = save_tiny(tmp);

  RunConfig config = reference_config(ds, tmp.path / "out");
  const RunResult result = run_probe(config);
  REQUIRE(result.report.has_value());
  CHECK(result.report->meta.model_name == "reference-hash");
  CHECK(result.report->meta.backend_name == "reference-hash");
  CHECK(result.report->meta.backend_revision == "seed-7");
  CHECK_FALSE(result.report->meta.model_params.has_value());

  RunConfig named = reference_config(ds, tmp.path / "out_named");
  named.model_name = "frost-3b";
  named.model_params = 3.0;
  const RunResult result2 = run_probe(named);
  REQUIRE(result2.report.has_value());
  CHECK(result2.report->meta.model_name == "frost-3b");
  CHECK(result2.report->meta.model_params == 3.0);
  CHECK(result2.report->meta.backend_name == "reference-hash");

  RunConfig bad_k = reference_config(ds, tmp.path / "out_k");
  bad_k.precision_ks = {1, 0};
  CHECK_THROWS_AS(run_probe(bad_k), ConfigError);
  RunConfig no_threads = reference_config(ds, tmp.path / "out_p");
  no_threads.parallelism = 0;
  CHECK_THROWS_AS(run_probe(no_threads), ConfigError);
}

TEST_CASE("report.json equals a report rebuilt from results.jsonl") {
  TempDir tmp;
  const auto ds = save_tiny(tmp);

  RunConfig config = reference_config(ds, tmp.path / "out");
  run_probe(config);

  const std::string in_run = read_file(tmp.path / "out" / "report.json");
  const RunMetadata meta = metadata_from_report_json(json::parse(in_run));
  const std::vector<ResultRecord> records =
      read_result_records(tmp.path / "out" / "results.jsonl");
  const EvalReport rebuilt = build_eval_report(meta, records);
  CHECK(report_to_json(rebuilt).dump(2) + "\n" == in_run);
  CHECK(report_to_text(rebuilt) == read_file(tmp.path / "out" / "report.txt"));
}

TEST_CASE("comparison rejects runs over different relation sets") {
  TempDir tmp;
  const auto ds = save_tiny(tmp);

  RunConfig config = reference_config(ds, tmp.path / "out");
  const RunResult result = run_probe(config);
  REQUIRE(result.report.has_value());
  const EvalReport& whole = *result.report;

  // Same records restricted to one relation: a valid report that covers a
  // different relation set.
  std::vector<ResultRecord> subset;
  for (const ResultRecord& r :
       read_result_records(tmp.path / "out" / "results.jsonl")) {
    if (r.relation_id == "R01") subset.push_back(r);
  }
  RunMetadata meta = whole.meta;
  meta.relation_cardinality.erase("R02");
  meta.relation_cardinality.erase("R03");
  const EvalReport partial = build_eval_report(meta, subset);

  CHECK_NOTHROW(require_comparable({whole, whole}));
  CHECK_THROWS_WITH_AS(require_comparable({whole, partial}),
                       doctest::Contains("incomparable result sets"),
                       ConfigError);
}

TEST_CASE("parallel executor runs every task exactly once") {
  const size_t n = 200;
  std::vector<std::atomic<int>> hits(n);
  for (auto& h : hits) h = 0;
  run_parallel(4, n, [&](size_t i) { hits[i].fetch_add(1); });
  for (size_t i = 0; i < n; ++i) CHECK(hits[i].load() == 1);

  // Width larger than the task count is clamped, not an error.
  std::atomic<int> once{0};
  run_parallel(16, 1, [&](size_t) { once.fetch_add(1); });
  CHECK(once.load() == 1);

  CHECK_NOTHROW(run_parallel(2, 0, [&](size_t) { FAIL("no tasks to run"); }));
  CHECK_THROWS_AS(run_parallel(0, 3, [](size_t) {}), ConfigError);
}

TEST_CASE("parallel executor propagates the first failure") {
  std::atomic<int> completed{0};
  auto task = [&](size_t i) {
    if (i == 10) throw BackendError("boom");
    completed.fetch_add(1);
  };
  CHECK_THROWS_WITH_AS(run_parallel(3, 50, task), "boom", BackendError);
  // Work finished before the failure stays finished; the abort flag stops
  // the rest.
  CHECK(completed.load() >= 1);
  CHECK(completed.load() < 50);
}

TEST_CASE("parallel executor honors cooperative stop") {
  std::atomic<int> completed{0};
  run_parallel(
      1, 100, [&](size_t) { completed.fetch_add(1); },
      [&] { return completed.load() >= 5; });
  CHECK(completed.load() == 5);
}
