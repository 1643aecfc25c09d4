#pragma once

#include <string>
#include <vector>

#include "lmprobe/dataset.hpp"

namespace lmprobe {

struct FixtureRelationSpec {
  std::string id;
  Cardinality cardinality = Cardinality::NToOne;
  size_t answers = 0;
  size_t instances_per_answer = 1;  // 1:1 relations always use 1
};

// Deterministic synthetic dataset: balanced (spread 0), leak-free labels,
// the standard 3-template set, unique subjects.  No RNG involved.
Dataset make_fixture_dataset(const std::string& name,
                             const std::vector<FixtureRelationSpec>& specs,
                             size_t templates_per_relation = 3);

// Mirrors the released probe's shape: 14 1:1 relations with 60 answers each
// plus 46 N:1 relations (40x k=25/c=6, 2x k=5/c=30, 2x k=10/c=15,
// 2x k=15/c=10) -> 60 relations, 7,740 instances, analytic random baseline
// 4.70% overall / 1.67% 1:1 / 5.07% N:1, mean N:1 answer-space size 23.04,
// about 6.51 instances per answer.
Dataset make_release_stats_fixture();

// Desk-scale benchmark: 60 relations, 20 answers each, 2,120 instances
// (14 1:1 with 20 answers + 46 N:1 with 20 answers x 2 instances), about
// 42k statements per template.
Dataset make_desk_fixture();

// Smoke-test scale: 3 relations, 4 answers each, 15 instances.
Dataset make_tiny_fixture();

}  // namespace lmprobe
