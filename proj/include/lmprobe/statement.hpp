#pragma once

#include <string>
#include <vector>

#include "lmprobe/dataset.hpp"

namespace lmprobe {

// Half-open byte range [begin, end) into Statement::text (UTF-8 bytes).
struct CharSpan {
  size_t begin = 0;
  size_t end = 0;
  bool operator==(const CharSpan&) const = default;
};

struct Statement {
  std::string text;
  CharSpan answer_span;     // the substituted [Y] occurrence, positionally
  std::string answer_id;    // filled by enumerate_statements
  std::string instance_id;  // filled by enumerate_statements
  int template_index = 0;   // filled by enumerate_statements
};

// Substitute [X] <- subject_label and [Y] <- answer_label.  The template must
// contain exactly one of each placeholder (DataError otherwise).  If a
// placeholder sits at position 0 and its label starts with an ASCII lowercase
// letter, the first letter is uppercased.  The answer span is computed from
// the placeholder position, so answer text occurring elsewhere in the
// statement never confuses it.
Statement instantiate(const TemplateString& tmpl,
                      const std::string& subject_label,
                      const std::string& answer_label);

// One statement per answer in the relation's answer space, in answer-space
// order, for the given template index (DataError if out of range).
std::vector<Statement> enumerate_statements(const Instance& instance,
                                            const Relation& relation,
                                            int template_index);

}  // namespace lmprobe
