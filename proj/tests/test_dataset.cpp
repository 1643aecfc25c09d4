#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "lmprobe/dataset.hpp"
#include "lmprobe/error.hpp"
#include "lmprobe/fixtures.hpp"

using namespace lmprobe;
using testutil::TempDir;

TEST_CASE("cardinality strings round-trip") {
  CHECK(to_string(Cardinality::OneToOne) == "1:1");
  CHECK(to_string(Cardinality::NToOne) == "N:1");
  CHECK(cardinality_from_string("1:1") == Cardinality::OneToOne);
  CHECK(cardinality_from_string("N:1") == Cardinality::NToOne);
  CHECK_THROWS_AS(cardinality_from_string("2:1"), DataError);
}

TEST_CASE("effective answer cap defaults by cardinality") {
  Relation rel;
  rel.cardinality = Cardinality::NToOne;
  CHECK(rel.effective_answer_cap() == 25);
  rel.cardinality = Cardinality::OneToOne;
  CHECK(rel.effective_answer_cap() == 60);
  rel.answer_cap = 7;
  CHECK(rel.effective_answer_cap() == 7);
}

TEST_CASE("answer lookup by id") {
  const Relation rel = testutil::mini_relation("R", 3, {0, 2});
  REQUIRE(rel.find_answer("R-a1") != nullptr);
  CHECK(rel.find_answer("R-a1")->label == "option 1");
  CHECK(rel.find_answer("missing") == nullptr);
  CHECK(rel.answer_index("R-a2") == size_t{2});
  CHECK(!rel.answer_index("missing").has_value());
}

TEST_CASE("save and load round-trip preserves everything") {
  const Dataset ds = make_tiny_fixture();
  TempDir dir;
  save_dataset(ds, dir.path);
  const Dataset back = load_dataset(dir.path);

  CHECK(back.metadata.name == ds.metadata.name);
  CHECK(back.metadata.version == ds.metadata.version);
  CHECK(back.metadata.source_note == ds.metadata.source_note);
  REQUIRE(back.relations.size() == ds.relations.size());
  for (size_t r = 0; r < ds.relations.size(); ++r) {
    const Relation& a = ds.relations[r];
    const Relation& b = back.relations[r];
    CHECK(b.id == a.id);
    CHECK(b.cardinality == a.cardinality);
    REQUIRE(b.templates.size() == a.templates.size());
    for (size_t i = 0; i < a.templates.size(); ++i) {
      CHECK(b.templates[i].text == a.templates[i].text);
    }
    REQUIRE(b.answer_space.size() == a.answer_space.size());
    for (size_t i = 0; i < a.answer_space.size(); ++i) {
      CHECK(b.answer_space[i].answer_id == a.answer_space[i].answer_id);
      CHECK(b.answer_space[i].label == a.answer_space[i].label);
    }
    REQUIRE(b.instances.size() == a.instances.size());
    for (size_t i = 0; i < a.instances.size(); ++i) {
      CHECK(b.instances[i].instance_id == a.instances[i].instance_id);
      CHECK(b.instances[i].subject_label == a.instances[i].subject_label);
      CHECK(b.instances[i].correct_answer_id ==
            a.instances[i].correct_answer_id);
    }
  }
}

TEST_CASE("loading an empty directory names the missing manifest") {
  TempDir dir;
  try {
    load_dataset(dir.path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("no manifest found in") !=
          std::string::npos);
  }
}

TEST_CASE("malformed relation line is reported as file:line") {
  const Dataset ds = make_tiny_fixture();
  TempDir dir;
  save_dataset(ds, dir.path);
  {
    std::ofstream out(dir.path / "R02.jsonl", std::ios::app);
    out << "{not json\n";
  }
  try {
    load_dataset(dir.path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("R02.jsonl:") != std::string::npos);
  }
}

TEST_CASE("instance pointing at an unknown answer id is fatal") {
  const Dataset ds = make_tiny_fixture();
  TempDir dir;
  save_dataset(ds, dir.path);
  {
    std::ofstream out(dir.path / "R01.jsonl", std::ios::app);
    out << R"({"kind":"instance","instance_id":"x","subject_label":"s",)"
        << R"("correct_answer_id":"nope"})" << "\n";
  }
  CHECK_THROWS_AS(load_dataset(dir.path), DataError);
}

TEST_CASE("validation passes a well-formed fixture") {
  const ValidationReport report = validate_dataset(make_tiny_fixture());
  CHECK(report.ok());
  for (const Finding& f : report.findings) {
    CHECK(f.status == FindingStatus::Pass);
  }
  // One finding per (relation, rule).
  CHECK(report.findings.size() == 3 * 4);
}

TEST_CASE("validation rejects a template without both placeholders") {
  Dataset ds;
  ds.relations.push_back(testutil::mini_relation("R", 2, {0}));
  ds.relations[0].templates[0].text = "No placeholders here.";
  const ValidationReport report = validate_dataset(ds);
  CHECK(!report.ok());
  bool found = false;
  for (const Finding& f : report.findings) {
    if (f.rule == "placeholders" && f.status == FindingStatus::Fail) {
      found = true;
      CHECK(!f.message.empty());
    }
  }
  CHECK(found);
}

TEST_CASE("validation rejects duplicated placeholders") {
  Dataset ds;
  ds.relations.push_back(testutil::mini_relation("R", 2, {0}));
  ds.relations[0].templates[0].text = "[X] and [X] like [Y].";
  CHECK(!validate_dataset(ds).ok());
}

TEST_CASE("duplicate answer labels are detected after normalization") {
  Dataset ds;
  ds.relations.push_back(testutil::mini_relation("R", 3, {0}));
  ds.relations[0].answer_space[1].label = "Apple";
  ds.relations[0].answer_space[2].label = "  apple ";
  const ValidationReport report = validate_dataset(ds);
  CHECK(!report.ok());
  bool found = false;
  for (const Finding& f : report.findings) {
    if (f.rule == "duplicate-labels" && f.status == FindingStatus::Fail) {
      found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("balance spread beyond tolerance warns by default, fails in strict") {
  Dataset ds;
  // Answer 0 used 3 times, answer 1 once: spread 2.
  ds.relations.push_back(testutil::mini_relation("R", 2, {0, 0, 0, 1}));

  ValidationConfig config;
  const ValidationReport warn_report = validate_dataset(ds, config);
  CHECK(warn_report.ok());  // warnings do not fail
  bool warned = false;
  for (const Finding& f : warn_report.findings) {
    if (f.rule == "balance") {
      CHECK(f.status == FindingStatus::Warn);
      warned = true;
    }
  }
  CHECK(warned);
  REQUIRE(warn_report.balance.size() == 1);
  CHECK(warn_report.balance[0].spread == 2);
  CHECK(warn_report.balance[0].per_answer_counts == std::vector<int>{3, 1});

  config.balance = Severity::Error;
  CHECK(!validate_dataset(ds, config).ok());

  config.balance = Severity::Warning;
  config.max_balance_spread = 2;
  bool any_balance_complaint = false;
  for (const Finding& f : validate_dataset(ds, config).findings) {
    if (f.rule == "balance" && f.status != FindingStatus::Pass) {
      any_balance_complaint = true;
    }
  }
  CHECK(!any_balance_complaint);
}

TEST_CASE("answer-space caps are enforced per cardinality") {
  Dataset ds;
  ds.relations.push_back(
      testutil::mini_relation("R", 26, {0}, Cardinality::NToOne));
  CHECK(!validate_dataset(ds).ok());

  Dataset ok;
  ok.relations.push_back(
      testutil::mini_relation("R", 26, {0}, Cardinality::OneToOne));
  CHECK(validate_dataset(ok).ok());

  Dataset overridden;
  overridden.relations.push_back(
      testutil::mini_relation("R", 26, {0}, Cardinality::NToOne));
  overridden.relations[0].answer_cap = 30;
  CHECK(validate_dataset(overridden).ok());
}

TEST_CASE("answer-space stats split by cardinality") {
  const Dataset ds = make_release_stats_fixture();
  const AnswerSpaceStats stats = answer_space_size_stats(ds);
  CHECK(stats.overall.relation_count == 60);
  CHECK(stats.one_to_one.relation_count == 14);
  CHECK(stats.n_to_one.relation_count == 46);
  CHECK(stats.one_to_one.mean == doctest::Approx(60.0).epsilon(1e-12));
  // (2*5 + 2*10 + 2*15 + 40*25) / 46
  CHECK(stats.n_to_one.mean == doctest::Approx(1060.0 / 46.0).epsilon(1e-12));
  CHECK(stats.n_to_one.min == 5);
  CHECK(stats.n_to_one.max == 25);
  CHECK(stats.overall.mean == doctest::Approx(1900.0 / 60.0).epsilon(1e-12));
}

TEST_CASE("mean instances per answer covers the N:1 subset") {
  const Dataset ds = make_release_stats_fixture();
  const ValidationReport report = validate_dataset(ds);
  // 6,900 N:1 instances over 1,060 N:1 answers.
  CHECK(report.mean_instances_per_answer_n_to_one ==
        doctest::Approx(6900.0 / 1060.0).epsilon(1e-12));
}

TEST_CASE("validation text rendering is deterministic") {
  const Dataset ds = make_tiny_fixture();
  const std::string a = validate_dataset(ds).to_text();
  const std::string b = validate_dataset(ds).to_text();
  CHECK(a == b);
  CHECK(!a.empty());
}

TEST_CASE("fixture shapes match their documented sizes") {
  const Dataset release = make_release_stats_fixture();
  CHECK(release.relations.size() == 60);
  CHECK(release.total_instances() == 7740);

  const Dataset desk = make_desk_fixture();
  CHECK(desk.relations.size() == 60);
  CHECK(desk.total_instances() == 2120);

  const Dataset tiny = make_tiny_fixture();
  CHECK(tiny.relations.size() == 3);
  CHECK(validate_dataset(release).ok());
  CHECK(validate_dataset(desk).ok());
  CHECK(validate_dataset(tiny).ok());
}
