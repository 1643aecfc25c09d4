#include "lmprobe/fixtures.hpp"

#include <cstdio>

#include "lmprobe/error.hpp"

namespace lmprobe {

namespace {

std::string pad3(size_t n) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03zu", n);
  return buf;
}

}  // namespace

Dataset make_fixture_dataset(const std::string& name,
                             const std::vector<FixtureRelationSpec>& specs,
                             size_t templates_per_relation) {
  if (templates_per_relation < 1 || templates_per_relation > 3) {
    throw ConfigError("fixture supports 1 to 3 templates per relation");
  }
  const std::vector<std::string> template_texts = {
      "The partner of [X] is [Y].",
      "[Y] keeps close ties with [X].",
      "Records about [X] list [Y] first.",
  };

  Dataset ds;
  ds.metadata.name = name;
  ds.metadata.version = "1";
  ds.metadata.source_note = "synthetic fixture, deterministic construction";

  for (const FixtureRelationSpec& spec : specs) {
    Relation rel;
    rel.id = spec.id;
    rel.cardinality = spec.cardinality;
    for (size_t t = 0; t < templates_per_relation; ++t) {
      rel.templates.push_back(TemplateString{template_texts[t]});
    }
    for (size_t a = 0; a < spec.answers; ++a) {
      Answer ans;
      ans.answer_id = spec.id + "-a" + pad3(a);
      ans.label = "candidate " + spec.id + " " + pad3(a);
      rel.answer_space.push_back(std::move(ans));
    }
    const size_t per_answer = spec.cardinality == Cardinality::OneToOne
                                  ? 1
                                  : spec.instances_per_answer;
    size_t serial = 0;
    for (size_t a = 0; a < spec.answers; ++a) {
      for (size_t c = 0; c < per_answer; ++c) {
        Instance ins;
        ins.instance_id = spec.id + "-i" + pad3(serial);
        ins.subject_label = "holder " + spec.id + " " + pad3(serial);
        ins.correct_answer_id = rel.answer_space[a].answer_id;
        rel.instances.push_back(std::move(ins));
        ++serial;
      }
    }
    ds.relations.push_back(std::move(rel));
  }
  return ds;
}

Dataset make_release_stats_fixture() {
  std::vector<FixtureRelationSpec> specs;
  size_t serial = 1;
  auto next_id = [&serial] { return "R" + pad3(serial++).substr(1); };
  for (int i = 0; i < 14; ++i) {
    specs.push_back({next_id(), Cardinality::OneToOne, 60, 1});
  }
  for (int i = 0; i < 2; ++i) {
    specs.push_back({next_id(), Cardinality::NToOne, 5, 30});
  }
  for (int i = 0; i < 2; ++i) {
    specs.push_back({next_id(), Cardinality::NToOne, 10, 15});
  }
  for (int i = 0; i < 2; ++i) {
    specs.push_back({next_id(), Cardinality::NToOne, 15, 10});
  }
  for (int i = 0; i < 40; ++i) {
    specs.push_back({next_id(), Cardinality::NToOne, 25, 6});
  }
  return make_fixture_dataset("release-stats-fixture", specs);
}

Dataset make_desk_fixture() {
  std::vector<FixtureRelationSpec> specs;
  size_t serial = 1;
  auto next_id = [&serial] { return "R" + pad3(serial++).substr(1); };
  for (int i = 0; i < 14; ++i) {
    specs.push_back({next_id(), Cardinality::OneToOne, 20, 1});
  }
  for (int i = 0; i < 46; ++i) {
    specs.push_back({next_id(), Cardinality::NToOne, 20, 2});
  }
  return make_fixture_dataset("desk-fixture", specs);
}

Dataset make_tiny_fixture() {
  std::vector<FixtureRelationSpec> specs = {
      {"R01", Cardinality::OneToOne, 4, 1},
      {"R02", Cardinality::NToOne, 4, 2},
      {"R03", Cardinality::NToOne, 4, 1},  // odd relation: 4 instances
  };
  Dataset ds = make_fixture_dataset("tiny-fixture", specs);
  // Trim the last relation to 3 instances: spread 1, inside the default
  // balance tolerance, so consumers see a non-uniform but valid relation.
  ds.relations[2].instances.pop_back();
  return ds;
}

}  // namespace lmprobe
