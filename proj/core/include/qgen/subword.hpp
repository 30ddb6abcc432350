#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace qgen {

// Byte-pair-encoding subword model: an ordered merge list (highest training
// frequency first) plus the token<->id maps. Words carry a trailing "</w>"
// marker on their final symbol so decoding restores word boundaries exactly.
//
// Reserved ids 0..3 are the special tokens; they are never produced by a
// merge and never emitted for corpus text.
struct SubwordModel {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kSos = 2;
  static constexpr int kEos = 3;
  static constexpr std::string_view kEndOfWord = "</w>";

  std::vector<std::pair<std::string, std::string>> merges;
  std::vector<std::string> id_to_token;
  std::unordered_map<std::string, int> token_to_id;
  std::unordered_map<std::string, std::unordered_map<std::string, int>> merge_rank;

  int vocab_size() const { return int(id_to_token.size()); }

  // Splits on whitespace and encodes word by word; unknown symbols map to
  // [UNK]. Never rejects input.
  std::vector<int> encode(std::string_view text) const;
  std::vector<int> encode_word(const std::string& word) const;

  // Inverse of encode up to whitespace normalization. Specials are dropped,
  // [UNK] renders as "[unk]". Out-of-range ids are rejected.
  std::string decode(const std::vector<int>& ids) const;

  std::string to_text() const;
  static SubwordModel from_text(std::string_view text);
  void save(const std::string& path) const;
  static SubwordModel load(const std::string& path);
  void save_merges(const std::string& path) const;  // one merge per line

  void rebuild_index();
};

// Greedy highest-frequency pair merging over the corpus until the vocabulary
// (specials included) reaches target_size or no pair occurs twice. Ties break
// by lexicographic pair order, so learning is deterministic.
SubwordModel learn_bpe(const std::vector<std::string>& corpus_lines, int target_size);

}  // namespace qgen
