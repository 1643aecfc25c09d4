#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lmprobe/dataset.hpp"
#include "lmprobe/http_scorer.hpp"
#include "lmprobe/reference_scorer.hpp"
#include "lmprobe/report.hpp"
#include "lmprobe/scoring.hpp"

namespace lmprobe {

struct HttpBackendSpec {
  std::string url;
  HttpScorerOptions options;
};

struct ReferenceBackendSpec {
  uint64_t seed = 0;
};

struct OracleBackendSpec {
  OracleKind kind = OracleKind::Perfect;
};

using BackendSpec =
    std::variant<HttpBackendSpec, ReferenceBackendSpec, OracleBackendSpec>;

struct RunConfig {
  std::filesystem::path dataset_dir;
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> cache_path;
  BackendSpec backend = ReferenceBackendSpec{};
  ScoringConfig scoring;
  std::optional<int> template_index;  // nullopt = all templates
  size_t parallelism = 1;
  uint64_t seed = 0;
  std::string model_name;             // defaults to the backend identity name
  std::optional<double> model_params;
  std::vector<size_t> precision_ks{1, 5, 10};
  size_t limit = 0;  // stop after this many new records (0 = no limit)
  ValidationConfig validation;
};

struct BackendCallCounts {
  uint64_t tokenize = 0;
  uint64_t causal = 0;
  uint64_t masked = 0;
  uint64_t total() const { return tokenize + causal + masked; }
};

struct RunResult {
  int exit_code = 0;         // 0 complete, 3 partial (limit reached)
  size_t records_new = 0;    // scored in this invocation
  size_t records_total = 0;  // including resumed records
  std::optional<EvalReport> report;  // present when complete
  BackendCallCounts backend_calls;   // calls that reached the backend
};

// Score every (relation, instance, template) work item, rank the answers,
// and write result artifacts to out_dir:
//   results.partial.jsonl  append-only progress, one record per completed
//                          item (removed once the run completes)
//   run_config.json        guards resumes against configuration drift
//   results.jsonl          final records, sorted by (relation, instance,
//                          template) in dataset order
//   report.json, report.txt
// Output bytes are identical for any parallelism width and for interrupted
// then resumed runs.  Backend failures propagate after persisting progress
// (the message names the partial file); DataError/ConfigError mean nothing
// was started.
RunResult run_probe(const RunConfig& config);

}  // namespace lmprobe
