#pragma once

#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace qgen {

// Fixed English stop-word list. The canonical copy ships as a resource file
// (core/data/stopwords.txt); the same entries are compiled in so the library
// works without a data path. Immutable once constructed; membership tests are
// case-insensitive.
class StopWordList {
 public:
  static const StopWordList& builtin();
  static StopWordList from_file(const std::string& path);
  static StopWordList from_words(std::vector<std::string> words);

  bool contains(std::string_view word) const;
  const std::vector<std::string>& words() const { return words_; }
  size_t size() const { return words_.size(); }

  void save(const std::string& path) const;

 private:
  StopWordList() = default;
  std::vector<std::string> words_;
  std::unordered_set<std::string> set_;
};

}  // namespace qgen
