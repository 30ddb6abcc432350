#include "qgen/question_types.hpp"

#include <array>
#include <unordered_set>

#include "qgen/text_util.hpp"

namespace qgen {

namespace {

constexpr std::array<std::string_view, kNumQuestionTypes> kNames = {
    "what", "who", "how", "where", "when", "yesno", "others"};
constexpr std::array<std::string_view, kNumQuestionTypes> kDisplayNames = {
    "what", "who", "how", "where", "when", "yes/no", "others"};

const std::unordered_set<std::string>& auxiliaries() {
  static const std::unordered_set<std::string> set = {
      "is",  "are",  "was",   "were", "do",  "does", "did",  "can",  "could", "will",
      "would", "shall", "should", "has", "have", "had", "may", "might", "must"};
  return set;
}

}  // namespace

std::string_view type_name(QuestionType t) { return kNames[size_t(t)]; }
std::string_view type_display_name(QuestionType t) { return kDisplayNames[size_t(t)]; }

std::optional<QuestionType> type_from_name(std::string_view name) {
  for (int i = 0; i < kNumQuestionTypes; ++i)
    if (kNames[size_t(i)] == name) return QuestionType(i);
  if (name == "yes/no") return QuestionType::YesNo;
  return std::nullopt;
}

QuestionType label_question_type(const std::vector<std::string>& tokens) {
  for (const auto& raw : tokens) {
    const std::string tok = to_lower(raw);
    if (tok == "what" || tok == "which") return QuestionType::What;
    if (tok == "who" || tok == "whom" || tok == "whose") return QuestionType::Who;
    if (tok == "how") return QuestionType::How;
    if (tok == "where") return QuestionType::Where;
    if (tok == "when") return QuestionType::When;
  }
  if (!tokens.empty() && auxiliaries().count(to_lower(tokens.front()))) return QuestionType::YesNo;
  return QuestionType::Others;
}

QuestionType label_question_type(std::string_view question_text) {
  return label_question_type(word_tokenize(question_text));
}

}  // namespace qgen
