#include "lmprobe/statement.hpp"

#include "lmprobe/error.hpp"

namespace lmprobe {

namespace {

constexpr std::string_view kSubjectSlot = "[X]";
constexpr std::string_view kAnswerSlot = "[Y]";

size_t find_single(const std::string& text, std::string_view slot) {
  const size_t pos = text.find(slot);
  if (pos == std::string::npos) {
    throw DataError("template '" + text + "' is missing placeholder " +
                    std::string(slot));
  }
  if (text.find(slot, pos + slot.size()) != std::string::npos) {
    throw DataError("template '" + text + "' contains placeholder " +
                    std::string(slot) + " more than once");
  }
  return pos;
}

// Uppercase the first byte when the substitution lands at sentence start.
std::string adjust_case(const std::string& label, size_t slot_pos) {
  if (slot_pos == 0 && !label.empty() && label[0] >= 'a' && label[0] <= 'z') {
    std::string out = label;
    out[0] = static_cast<char>(out[0] - 'a' + 'A');
    return out;
  }
  return label;
}

}  // namespace

Statement instantiate(const TemplateString& tmpl,
                      const std::string& subject_label,
                      const std::string& answer_label) {
  const std::string& t = tmpl.text;
  const size_t x_pos = find_single(t, kSubjectSlot);
  const size_t y_pos = find_single(t, kAnswerSlot);

  const std::string subject = adjust_case(subject_label, x_pos);
  const std::string answer = adjust_case(answer_label, y_pos);

  Statement st;
  if (x_pos < y_pos) {
    st.text = t.substr(0, x_pos) + subject +
              t.substr(x_pos + kSubjectSlot.size(),
                       y_pos - (x_pos + kSubjectSlot.size())) +
              answer + t.substr(y_pos + kAnswerSlot.size());
    const size_t begin = y_pos - kSubjectSlot.size() + subject.size();
    st.answer_span = {begin, begin + answer.size()};
  } else {
    st.text = t.substr(0, y_pos) + answer +
              t.substr(y_pos + kAnswerSlot.size(),
                       x_pos - (y_pos + kAnswerSlot.size())) +
              subject + t.substr(x_pos + kSubjectSlot.size());
    st.answer_span = {y_pos, y_pos + answer.size()};
  }
  return st;
}

std::vector<Statement> enumerate_statements(const Instance& instance,
                                            const Relation& relation,
                                            int template_index) {
  if (template_index < 0 ||
      static_cast<size_t>(template_index) >= relation.templates.size()) {
    throw DataError("relation " + relation.id + " has no template " +
                    std::to_string(template_index));
  }
  std::vector<Statement> out;
  out.reserve(relation.answer_space.size());
  for (const Answer& answer : relation.answer_space) {
    Statement st = instantiate(relation.templates[template_index],
                               instance.subject_label, answer.label);
    st.answer_id = answer.answer_id;
    st.instance_id = instance.instance_id;
    st.template_index = template_index;
    out.push_back(std::move(st));
  }
  return out;
}

}  // namespace lmprobe
