#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qgen {

std::string to_lower(std::string_view s);

// Collapses whitespace runs to single spaces and trims the ends.
std::string normalize_ws(std::string_view s);

std::vector<std::string> split_ws(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Splits a string into UTF-8 codepoints; malformed bytes become single-byte
// pieces so no input is ever rejected.
std::vector<std::string> utf8_codepoints(std::string_view s);

// Word tokenizer used for all corpus text: alphanumeric runs stay together
// (apostrophes and hyphens survive between word characters), every other
// non-space codepoint becomes its own token.
std::vector<std::string> word_tokenize(std::string_view s);

// Rule-based sentence splitter. Returns half-open [begin, end) spans that
// partition the paragraph; a sentence ends at . ! ? followed by whitespace and
// an uppercase letter, digit or opening quote, unless the preceding word is a
// known abbreviation or a single-letter initial.
std::vector<std::pair<size_t, size_t>> split_sentence_spans(std::string_view paragraph);

uint64_t fnv1a64(std::string_view s);

}  // namespace qgen
