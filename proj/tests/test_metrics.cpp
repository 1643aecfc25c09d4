#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "lmprobe/error.hpp"
#include "lmprobe/fixtures.hpp"
#include "lmprobe/metrics.hpp"

using namespace lmprobe;

namespace {

std::vector<ScoreRecord> records_for_scores(const std::vector<double>& scores,
                                            const ScoringConfig& config = {}) {
  std::vector<ScoreRecord> recs;
  for (size_t i = 0; i < scores.size(); ++i) {
    ScoreRecord rec;
    rec.statement.instance_id = "i0";
    rec.statement.answer_id = "a" + std::to_string(i);
    rec.score = scores[i];
    rec.config = config;
    recs.push_back(std::move(rec));
  }
  return recs;
}

}  // namespace

TEST_CASE("softmax of [ln 2, 0] is [2/3, 1/3]") {
  const std::vector<double> p = softmax_scores(
      std::vector<double>{std::log(2.0), 0.0});
  REQUIRE(p.size() == 2);
  CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("softmax is shift-invariant and overflow-safe") {
  const std::vector<double> base{-3.0, -1.5, -0.25, -7.0};
  const std::vector<double> a = softmax_scores(base);
  std::vector<double> shifted = base;
  for (double& v : shifted) v += 1234.5;
  const std::vector<double> b = softmax_scores(shifted);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  }
  const std::vector<double> big = softmax_scores(
      std::vector<double>{1000.0, 999.0});
  CHECK(std::isfinite(big[0]));
  CHECK(big[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
}

TEST_CASE("uncertainty identities") {
  CHECK(*entropy_uncertainty(std::vector<double>{0.25, 0.25, 0.25, 0.25}) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(*entropy_uncertainty(std::vector<double>{1.0, 0.0, 0.0}) ==
        doctest::Approx(0.0).epsilon(1e-12));
  CHECK(*entropy_uncertainty(std::vector<double>{0.5, 0.25, 0.125, 0.125}) ==
        doctest::Approx(0.875).epsilon(1e-12));
  CHECK(!entropy_uncertainty(std::vector<double>{1.0}).has_value());
}

TEST_CASE("uncertainty rejects non-distributions") {
  CHECK_THROWS_AS(entropy_uncertainty(std::vector<double>{0.5, 0.4}),
                  DataError);
  CHECK_THROWS_AS(entropy_uncertainty(std::vector<double>{0.5, 0.6}),
                  DataError);
  CHECK_THROWS_AS(entropy_uncertainty(std::vector<double>{1.5, -0.5}),
                  DataError);
}

TEST_CASE("uncertainty is clamped to [0, 1] under rounding noise") {
  std::mt19937_64 rng(7);
  for (int round = 0; round < 500; ++round) {
    const size_t k = 2 + rng() % 10;
    std::vector<double> p(k);
    double total = 0;
    for (double& v : p) {
      v = static_cast<double>(rng() % 1000 + 1);
      total += v;
    }
    for (double& v : p) v /= total;
    const auto u = entropy_uncertainty(p);
    REQUIRE(u.has_value());
    CHECK(*u >= 0.0);
    CHECK(*u <= 1.0);
  }
}

TEST_CASE("ranking orders by score with index tie-breaks") {
  const std::vector<ScoreRecord> recs =
      records_for_scores({-3.0, -1.0, -2.0, -1.0});
  const RankedResult r = rank_answers(recs, "a2");
  CHECK(r.order == std::vector<size_t>{1, 3, 2, 0});
  CHECK(r.predicted_index == 1);
  CHECK(r.correct_index == 2);
  CHECK(r.rank_of_correct == 3);
  CHECK(r.tie_flag);  // two answers share the top score
  REQUIRE(r.probabilities.size() == 4);
  CHECK(r.uncertainty.has_value());
}

TEST_CASE("ranking without ties clears the tie flag") {
  const RankedResult r =
      rank_answers(records_for_scores({-3.0, -1.0, -2.0}), "a1");
  CHECK(!r.tie_flag);
  CHECK(r.rank_of_correct == 1);
}

TEST_CASE("single-answer instances have undefined uncertainty") {
  const RankedResult r = rank_answers(records_for_scores({-1.0}), "a0");
  CHECK(!r.uncertainty.has_value());
  CHECK(r.rank_of_correct == 1);
}

TEST_CASE("ranking demands consistent inputs") {
  CHECK_THROWS_AS(rank_answers({}, "a0"), DataError);
  CHECK_THROWS_AS(rank_answers(records_for_scores({-1.0, -2.0}), "missing"),
                  DataError);

  std::vector<ScoreRecord> mixed = records_for_scores({-1.0, -2.0});
  mixed[1].config.reduction = Reduction::Mean;
  CHECK_THROWS_AS(rank_answers(mixed, "a0"), ConfigError);

  std::vector<ScoreRecord> split = records_for_scores({-1.0, -2.0});
  split[1].statement.instance_id = "other";
  CHECK_THROWS_AS(rank_answers(split, "a0"), DataError);

  std::vector<ScoreRecord> dup = records_for_scores({-1.0, -2.0});
  dup[1].statement.answer_id = "a0";
  CHECK_THROWS_AS(rank_answers(dup, "a0"), DataError);
}

TEST_CASE("precision at k") {
  const std::vector<size_t> ranks{1, 2, 3, 5};
  CHECK(precision_at_k(ranks, 1) == doctest::Approx(0.25));
  CHECK(precision_at_k(ranks, 3) == doctest::Approx(0.75));
  CHECK(precision_at_k(ranks, 10) == doctest::Approx(1.0));
  CHECK_THROWS_AS(precision_at_k(ranks, 0), ConfigError);
  CHECK_THROWS_AS(precision_at_k(std::vector<size_t>{}, 1), DataError);
}

namespace {

TemplateOutcomes outcomes_with_hits(int template_index, size_t hits,
                                    size_t total) {
  TemplateOutcomes group;
  group.template_index = template_index;
  for (size_t i = 0; i < total; ++i) {
    group.outcomes.push_back(
        {"R", "i" + std::to_string(i), i < hits});
  }
  return group;
}

}  // namespace

TEST_CASE("probe score means over templates with a sample standard error") {
  const std::vector<TemplateOutcomes> groups{
      outcomes_with_hits(0, 12, 50),   // 0.24
      outcomes_with_hits(1, 13, 50),   // 0.26
      outcomes_with_hits(2, 14, 50)};  // 0.28
  const BearScore score = bear_score(groups);
  CHECK(score.mean == doctest::Approx(0.26).epsilon(1e-12));
  // sample sd = 0.02, over sqrt(3) templates
  CHECK(score.std_error ==
        doctest::Approx(0.02 / std::sqrt(3.0)).epsilon(1e-12));
  CHECK(score.per_template == std::vector<double>{0.24, 0.26, 0.28});
  CHECK(score.instance_count == 50);
}

TEST_CASE("single-template probe score has zero standard error") {
  const BearScore score = bear_score({outcomes_with_hits(0, 30, 40)});
  CHECK(score.mean == doctest::Approx(0.75));
  CHECK(score.std_error == 0.0);
}

TEST_CASE("probe score rejects mismatched instance sets across templates") {
  TemplateOutcomes a = outcomes_with_hits(0, 1, 3);
  TemplateOutcomes b = outcomes_with_hits(1, 1, 3);
  b.outcomes[2].instance_id = "different";
  CHECK_THROWS_AS(bear_score({a, b}), DataError);
  CHECK_THROWS_AS(bear_score({}), DataError);
}

TEST_CASE("analytic baseline is the mean of 1/k") {
  Dataset ds;
  ds.relations.push_back(
      testutil::mini_relation("R4", 4, {0, 1}, Cardinality::OneToOne));
  ds.relations.push_back(
      testutil::mini_relation("R5", 5, {0, 1}, Cardinality::NToOne));
  const RandomBaseline base = random_baseline(ds);
  REQUIRE(base.overall.has_value());
  CHECK(*base.overall == doctest::Approx(0.225).epsilon(1e-12));
  CHECK(*base.one_to_one == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(*base.n_to_one == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("baseline subsets are absent when a cardinality is missing") {
  Dataset ds;
  ds.relations.push_back(
      testutil::mini_relation("R4", 4, {0}, Cardinality::NToOne));
  const RandomBaseline base = random_baseline(ds);
  CHECK(base.overall.has_value());
  CHECK(!base.one_to_one.has_value());
  CHECK(base.n_to_one.has_value());

  const RandomBaseline empty = random_baseline(Dataset{});
  CHECK(!empty.overall.has_value());
}

TEST_CASE("monte-carlo baseline is deterministic and near the analytic value") {
  Dataset ds;
  ds.relations.push_back(
      testutil::mini_relation("R4", 4, {0, 1, 2}, Cardinality::NToOne));
  const MonteCarloBaseline a = monte_carlo_baseline(ds, 50000, 99);
  const MonteCarloBaseline b = monte_carlo_baseline(ds, 50000, 99);
  CHECK(a.accuracy == b.accuracy);  // bitwise repeatable
  CHECK(a.trials == 50000);
  CHECK(a.seed == 99);
  // 1/4 within 4 sigma.
  CHECK(std::abs(a.accuracy - 0.25) < 4.0 * a.std_error);
  CHECK(a.std_error ==
        doctest::Approx(std::sqrt(a.accuracy * (1 - a.accuracy) / 50000)));

  const MonteCarloBaseline c = monte_carlo_baseline(ds, 50000, 100);
  CHECK(c.accuracy != a.accuracy);  // different seed, different draw
}

TEST_CASE("monte-carlo subset restriction") {
  Dataset ds;
  ds.relations.push_back(
      testutil::mini_relation("R2", 2, {0}, Cardinality::OneToOne));
  ds.relations.push_back(
      testutil::mini_relation("R10", 10, {0}, Cardinality::NToOne));
  const MonteCarloBaseline one =
      monte_carlo_baseline(ds, 20000, 1, Cardinality::OneToOne);
  const MonteCarloBaseline n =
      monte_carlo_baseline(ds, 20000, 1, Cardinality::NToOne);
  CHECK(std::abs(one.accuracy - 0.5) < 4.0 * one.std_error);
  CHECK(std::abs(n.accuracy - 0.1) < 4.0 * n.std_error);
  CHECK_THROWS_AS(
      monte_carlo_baseline(Dataset{}, 100, 1), DataError);
}

TEST_CASE("release-shape fixture baselines match hand arithmetic") {
  const Dataset ds = make_release_stats_fixture();
  const RandomBaseline base = random_baseline(ds);
  // 14 * 60 * (1/60) + (2*150/5 + 2*150/10 + 2*150/15 + 40*150/25) ... the
  // closed forms: every instance of a k-answer relation contributes 1/k.
  CHECK(*base.one_to_one == doctest::Approx(1.0 / 60.0).epsilon(1e-12));
  CHECK(*base.n_to_one == doctest::Approx(350.0 / 6900.0).epsilon(1e-12));
  CHECK(*base.overall == doctest::Approx(364.0 / 7740.0).epsilon(1e-12));
}
