#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qgen/question_types.hpp"
#include "qgen/squad.hpp"
#include "qgen/stopwords.hpp"
#include "qgen/subword.hpp"

namespace qgen {

// One encoded training sample. target_ids always ends with [EOS];
// copy_labels is aligned position-by-position to source_ids.
struct TrainingExample {
  std::vector<int> source_ids;
  std::vector<int> target_ids;
  int type_id = 0;
  std::vector<uint8_t> copy_labels;
  int group = -1;
  std::string source_text;
  std::string question_text;
};

// Examples sharing one source sentence form a reference group; evaluation
// scores one candidate per group against all of its questions.
struct RefGroup {
  std::string source_text;
  std::vector<std::string> questions;
  std::vector<size_t> example_indices;
};

struct Caps {
  int max_source = 256;
  int max_target = 50;
};

struct BuiltExamples {
  std::vector<TrainingExample> examples;
  std::vector<RefGroup> groups;
  long dropped = 0;
};

// Eq.-style copy label: 1 iff the source word occurs verbatim in the question
// and is not a stop word. Word-level, case handled by the caller's
// lowercasing convention.
std::vector<uint8_t> compute_copy_labels(const std::vector<std::string>& source_words,
                                         const std::vector<std::string>& question_words,
                                         const StopWordList& stops);

// Encodes pairs with the subword model, truncates to the caps, attaches the
// question type and subword-projected copy labels, and groups pairs that
// share an identical source string.
BuiltExamples build_examples(const std::vector<SquadPair>& pairs, const SubwordModel& bpe,
                             const StopWordList& stops, const Caps& caps);

// One example per line: source ids TAB target ids TAB type name TAB copy
// bitstring. Reference groups go to a sibling .refs.tsv file, one group per
// line: source text TAB question...
void save_examples(const std::string& path_prefix, const BuiltExamples& built);
BuiltExamples load_examples(const std::string& path_prefix);

}  // namespace qgen
