#include "qgen/stopwords.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "qgen/text_util.hpp"

namespace qgen {

namespace {

// Must stay in sync with core/data/stopwords.txt (checked by unit test).
constexpr std::string_view kBuiltinWords = R"(a about above across after again against all almost also
am among an and another any are as at be
because been before being below between both but by can
cannot could did do does doing done down during each
either enough even ever every few for from further get
go had has have having he her here hers herself
him himself his how however i if in into is
it its itself just let many may me might more
most much must my myself neither never no nor not
now of off often on once one only onto or
other our ours ourselves out over own per rather same
several shall she should since so some still such than
that the their theirs them themselves then there these they
this those through thus to too toward towards under until
up upon us very via was we well went were
what when where whether which while who whom whose why
will with within without would yet you your yours yourself
yourselves)";

}  // namespace

const StopWordList& StopWordList::builtin() {
  static const StopWordList list = [] {
    std::vector<std::string> words;
    for (const auto& w : split_ws(kBuiltinWords)) words.push_back(w);
    return from_words(std::move(words));
  }();
  return list;
}

StopWordList StopWordList::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open stop-word file: " + path);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    line = normalize_ws(line);
    if (!line.empty()) words.push_back(to_lower(line));
  }
  return from_words(std::move(words));
}

StopWordList StopWordList::from_words(std::vector<std::string> words) {
  StopWordList list;
  list.words_ = std::move(words);
  for (auto& w : list.words_) w = to_lower(w);
  list.set_.insert(list.words_.begin(), list.words_.end());
  return list;
}

bool StopWordList::contains(std::string_view word) const { return set_.count(to_lower(word)) != 0; }

void StopWordList::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write stop-word file: " + path);
  for (const auto& w : words_) out << w << "\n";
}

}  // namespace qgen
