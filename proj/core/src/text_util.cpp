#include "qgen/text_util.hpp"

#include <cctype>
#include <unordered_set>

namespace qgen {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

size_t cp_len(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xe) return 3;
  if ((lead >> 3) == 0x1e) return 4;
  return 1;  // invalid lead byte, keep it as a single piece
}

// ASCII alnum plus any non-ASCII codepoint counts as a word character.
bool is_word_cp(std::string_view cp) {
  if (cp.size() > 1) return true;
  unsigned char c = cp[0];
  return std::isalnum(c) != 0;
}

const std::unordered_set<std::string>& abbreviations() {
  static const std::unordered_set<std::string> set = {
      "mr",     "mrs", "ms",  "dr",   "prof", "st",   "jr",   "sr",  "vs",  "etc", "eg",  "ie",
      "no",     "dept", "univ", "inc", "ltd",  "co",   "corp", "mt",  "ft",  "gen", "col",
      "lt",     "sgt", "capt", "cmdr", "adm",  "maj",  "gov",  "sen", "rep", "rev", "hon",
      "jan",    "feb", "mar",  "apr",  "jun",  "jul",  "aug",  "sep", "sept", "oct", "nov", "dec",
      "approx", "est", "min",  "max",  "fig",  "al",   "ca",   "cf",  "ed",  "eds", "vol", "pp"};
  return set;
}

}  // namespace

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = char(c - 'A' + 'a');
  return out;
}

std::string normalize_ws(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_space = true;
  for (char c : s) {
    if (is_space(c)) {
      if (!in_space) out.push_back(' ');
      in_space = true;
    } else {
      out.push_back(c);
      in_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> utf8_codepoints(std::string_view s) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < s.size()) {
    size_t n = cp_len(static_cast<unsigned char>(s[i]));
    if (i + n > s.size()) n = 1;
    out.emplace_back(s.substr(i, n));
    i += n;
  }
  return out;
}

std::vector<std::string> word_tokenize(std::string_view s) {
  auto cps = utf8_codepoints(s);
  std::vector<std::string> tokens;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      tokens.push_back(word);
      word.clear();
    }
  };
  for (size_t i = 0; i < cps.size(); ++i) {
    const std::string& cp = cps[i];
    if (cp.size() == 1 && is_space(cp[0])) {
      flush();
      continue;
    }
    if (is_word_cp(cp)) {
      word += cp;
      continue;
    }
    // apostrophe or hyphen stays inside a word when flanked by word chars
    if ((cp == "'" || cp == "-") && !word.empty() && i + 1 < cps.size() && is_word_cp(cps[i + 1])) {
      word += cp;
      continue;
    }
    flush();
    tokens.push_back(cp);
  }
  flush();
  return tokens;
}

std::vector<std::pair<size_t, size_t>> split_sentence_spans(std::string_view p) {
  std::vector<std::pair<size_t, size_t>> spans;
  if (p.empty()) return spans;
  size_t start = 0;
  size_t i = 0;
  while (i < p.size()) {
    char c = p[i];
    if (c == '.' || c == '!' || c == '?') {
      size_t punct = i;
      // closing quotes/brackets ride along with the terminator
      size_t j = i + 1;
      while (j < p.size() && (p[j] == '"' || p[j] == '\'' || p[j] == ')' || p[j] == ']')) ++j;
      size_t ws = j;
      while (ws < p.size() && is_space(p[ws])) ++ws;
      const bool has_gap = ws > j;
      const bool next_ok = ws < p.size() && (std::isupper(static_cast<unsigned char>(p[ws])) != 0 ||
                                             std::isdigit(static_cast<unsigned char>(p[ws])) != 0 ||
                                             p[ws] == '"' || p[ws] == '\'' || p[ws] == '(');
      bool split = has_gap && next_ok;
      if (split && c == '.') {
        // back off for abbreviations and single-letter initials
        size_t we = punct;
        size_t wb = we;
        while (wb > 0 && std::isalpha(static_cast<unsigned char>(p[wb - 1])) != 0) --wb;
        const size_t wlen = we - wb;
        if (wlen == 1) {
          split = false;
        } else if (wlen > 1 && abbreviations().count(to_lower(p.substr(wb, wlen)))) {
          split = false;
        }
      }
      if (split) {
        spans.emplace_back(start, ws);
        start = ws;
        i = ws;
        continue;
      }
    }
    ++i;
  }
  if (start < p.size()) spans.emplace_back(start, p.size());
  return spans;
}

uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace qgen
