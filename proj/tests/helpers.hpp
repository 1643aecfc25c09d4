#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmprobe/dataset.hpp"
#include "lmprobe/reference_scorer.hpp"
#include "lmprobe/scorer.hpp"
#include "lmprobe/text_util.hpp"

namespace testutil {

struct TempDir {
  std::filesystem::path path;

  TempDir() {
    std::string tmpl =
        (std::filesystem::temp_directory_path() / "lmprobe-test-XXXXXX")
            .string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed");
    path = buf.data();
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

// Token id under the built-in whitespace tokenizer.
inline int64_t sid(const std::string& surface) {
  return static_cast<int64_t>(lmprobe::fnv1a64(surface));
}

// Deterministic 10-letter label, pairwise far in edit distance from every
// other index (uniform random letters collide in fewer than 3 positions with
// negligible probability), so fuzzy-similarity filters never conflate two of
// them.
inline std::string distinct_label(size_t index) {
  uint64_t state = lmprobe::fnv1a64(0x51ab'17e5, std::string_view(
      reinterpret_cast<const char*>(&index), sizeof(index)));
  std::string out;
  for (int i = 0; i < 10; ++i) {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    out.push_back(static_cast<char>('a' + ((state >> 33) % 26)));
  }
  out[0] = static_cast<char>(out[0] - 'a' + 'A');
  return out;
}

// Fully scriptable backend for unit tests.  Defaults: whitespace tokens,
// every causal logprob -1 (first null), every masked logprob -1.
struct ScriptedScorer : lmprobe::Scorer {
  lmprobe::BackendIdentity id;
  std::function<lmprobe::TokenizedStatement(const std::string&)> on_tokenize;
  std::function<std::vector<std::optional<double>>(const std::string&)>
      on_causal;
  std::function<double(const lmprobe::MaskedLogprobRequest&)> on_masked;

  ScriptedScorer() {
    id.name = "scripted";
    id.revision = "1";
    on_tokenize = [](const std::string& text) {
      return lmprobe::whitespace_tokenize(text);
    };
    on_causal = [this](const std::string& text) {
      std::vector<std::optional<double>> out(
          on_tokenize(text).tokens.size(), -1.0);
      if (!out.empty()) out[0] = std::nullopt;
      return out;
    };
    on_masked = [](const lmprobe::MaskedLogprobRequest&) { return -1.0; };
  }

  const lmprobe::BackendIdentity& identity() override { return id; }
  lmprobe::TokenizedStatement tokenize(const std::string& text) override {
    return on_tokenize(text);
  }
  std::vector<std::optional<double>> causal_logprobs(
      const std::string& text) override {
    return on_causal(text);
  }
  double masked_logprob(const lmprobe::MaskedLogprobRequest& req) override {
    return on_masked(req);
  }
};

// Masked scorer keyed by target-token id: each answer token carries a fixed
// logprob regardless of context, so reductions can be checked against hand
// arithmetic.
struct PerTokenMaskedScorer : ScriptedScorer {
  std::unordered_map<int64_t, double> by_id;

  explicit PerTokenMaskedScorer(std::unordered_map<int64_t, double> table)
      : by_id(std::move(table)) {
    on_masked = [this](const lmprobe::MaskedLogprobRequest& req) {
      auto it = by_id.find(req.token_ids.at(req.target_position));
      if (it == by_id.end()) return -9.0;
      return it->second;
    };
  }
};

// Minimal hand-built relation: k answers "A0".."Ak-1", instances with given
// correct answers, one template.
inline lmprobe::Relation mini_relation(const std::string& id, size_t k,
                                       const std::vector<size_t>& correct,
                                       lmprobe::Cardinality card =
                                           lmprobe::Cardinality::NToOne) {
  lmprobe::Relation rel;
  rel.id = id;
  rel.cardinality = card;
  rel.templates.push_back(
      lmprobe::TemplateString{"The marker for [X] is [Y]."});
  for (size_t a = 0; a < k; ++a) {
    rel.answer_space.push_back(
        {id + "-a" + std::to_string(a), "option " + std::to_string(a)});
  }
  for (size_t i = 0; i < correct.size(); ++i) {
    lmprobe::Instance inst;
    inst.instance_id = id + "-i" + std::to_string(i);
    inst.subject_label = "entry " + std::to_string(i);
    inst.correct_answer_id = rel.answer_space.at(correct[i]).answer_id;
    rel.instances.push_back(std::move(inst));
  }
  return rel;
}

}  // namespace testutil
