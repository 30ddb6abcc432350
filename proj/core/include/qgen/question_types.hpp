#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qgen {

// The seven question categories, in the fixed id order used everywhere
// (model outputs, reports, file formats).
enum class QuestionType : int { What = 0, Who, How, Where, When, YesNo, Others };

inline constexpr int kNumQuestionTypes = 7;

// Lowercase identifier used in file formats ("yes/no" serializes as "yesno").
std::string_view type_name(QuestionType t);
// Human-readable name used in report tables.
std::string_view type_display_name(QuestionType t);
std::optional<QuestionType> type_from_name(std::string_view name);

// Rule-based labeling: the leftmost interrogative wins ("which" folds into
// what, whom/whose into who); with no interrogative, a leading auxiliary or
// copular verb makes it yes/no; anything else is others. Total and
// deterministic over arbitrary token lists.
QuestionType label_question_type(const std::vector<std::string>& tokens);
QuestionType label_question_type(std::string_view question_text);

}  // namespace qgen
