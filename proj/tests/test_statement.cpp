#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "lmprobe/error.hpp"
#include "lmprobe/statement.hpp"

using namespace lmprobe;

TEST_CASE("substitution fills both slots and tracks the answer span") {
  const Statement st = instantiate(
      TemplateString{"The capital of [X] is [Y]."}, "France", "Beijing");
  CHECK(st.text == "The capital of France is Beijing.");
  CHECK(st.answer_span == CharSpan{25, 32});
  CHECK(st.text.substr(st.answer_span.begin,
                       st.answer_span.end - st.answer_span.begin) ==
        "Beijing");
}

TEST_CASE("answer-first templates place the span at the front") {
  const Statement st = instantiate(
      TemplateString{"[Y] keeps close ties with [X]."}, "Norway", "Sweden");
  CHECK(st.text == "Sweden keeps close ties with Norway.");
  CHECK(st.answer_span == CharSpan{0, 6});
}

TEST_CASE("sentence-initial lowercase answers are uppercased") {
  const Statement st = instantiate(
      TemplateString{"[Y] keeps close ties with [X]."}, "Norway", "sweden");
  CHECK(st.text == "Sweden keeps close ties with Norway.");
  CHECK(st.answer_span == CharSpan{0, 6});
}

TEST_CASE("sentence-initial lowercase subjects are uppercased") {
  const Statement st = instantiate(
      TemplateString{"[X] borders [Y]."}, "france", "Spain");
  CHECK(st.text == "France borders Spain.");
}

TEST_CASE("mid-sentence labels keep their case") {
  const Statement st = instantiate(
      TemplateString{"[Y] is the capital of [X]."}, "france", "Paris");
  CHECK(st.text == "Paris is the capital of france.");
}

TEST_CASE("uppercasing is ASCII-only") {
  const Statement st = instantiate(
      TemplateString{"[Y] lies north of [X]."}, "Italy",
      "\xc3\xa9tretat");  // e-acute: multi-byte first char stays untouched
  CHECK(st.text == "\xc3\xa9tretat lies north of Italy.");
  CHECK(st.answer_span.begin == 0);
  CHECK(st.answer_span.end == 8);  // 7 letters, 2 bytes for the first
}

TEST_CASE("answer span is positional, not text-searched") {
  // The answer text also occurs inside the subject, before the [Y] slot.
  const Statement st = instantiate(
      TemplateString{"[X] was named after [Y]."}, "Paris Hilton", "Paris");
  CHECK(st.text == "Paris Hilton was named after Paris.");
  CHECK(st.answer_span == CharSpan{29, 34});
  CHECK(st.text.substr(st.answer_span.begin, 5) == "Paris");
  CHECK(st.answer_span.begin > 0);
}

TEST_CASE("spans count UTF-8 bytes, not code points") {
  const Statement st = instantiate(
      TemplateString{"Caff\xc3\xa8 of [X] is [Y]."}, "Roma", "Italy");
  CHECK(st.text == "Caff\xc3\xa8 of Roma is Italy.");
  // "Caff<e-grave> of Roma is " spans 18 bytes.
  CHECK(st.answer_span == CharSpan{18, 23});
}

TEST_CASE("templates must contain exactly one of each placeholder") {
  CHECK_THROWS_AS(instantiate(TemplateString{"[X] likes things."}, "a", "b"),
                  DataError);
  CHECK_THROWS_AS(instantiate(TemplateString{"[Y] only here."}, "a", "b"),
                  DataError);
  CHECK_THROWS_AS(
      instantiate(TemplateString{"[X] and [X] like [Y]."}, "a", "b"),
      DataError);
  CHECK_THROWS_AS(
      instantiate(TemplateString{"[X] likes [Y] and [Y]."}, "a", "b"),
      DataError);
}

TEST_CASE("enumeration yields one statement per answer in order") {
  const Relation rel = testutil::mini_relation("R", 4, {2});
  const std::vector<Statement> sts =
      enumerate_statements(rel.instances[0], rel, 0);
  REQUIRE(sts.size() == 4);
  for (size_t a = 0; a < sts.size(); ++a) {
    CHECK(sts[a].answer_id == rel.answer_space[a].answer_id);
    CHECK(sts[a].instance_id == "R-i0");
    CHECK(sts[a].template_index == 0);
    CHECK(sts[a].text == "The marker for entry 0 is option " +
                             std::to_string(a) + ".");
    CHECK(sts[a].text.substr(sts[a].answer_span.begin,
                             sts[a].answer_span.end - sts[a].answer_span.begin)
          == rel.answer_space[a].label);
  }
}

TEST_CASE("enumeration validates the template index") {
  const Relation rel = testutil::mini_relation("R", 2, {0});
  CHECK_THROWS_AS(enumerate_statements(rel.instances[0], rel, 1), DataError);
  CHECK_THROWS_AS(enumerate_statements(rel.instances[0], rel, -1), DataError);
}
