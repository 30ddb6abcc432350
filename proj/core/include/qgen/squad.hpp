#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace qgen {

// One (sentence, question) pair extracted from a SQuAD v1.1 file. Both sides
// are lowercased, word-tokenized and space-joined. `article` indexes the
// originating article so splits can partition by article.
struct SquadPair {
  std::string sentence;
  std::string question;
  int article = 0;
};

struct IngestStats {
  long total_qas = 0;
  long emitted = 0;
  long skipped = 0;  // offset out of range or empty answer list
};

struct IngestResult {
  std::vector<SquadPair> pairs;
  IngestStats stats;
};

// Raised when the input does not follow the SQuAD v1.1 schema; the message
// carries the JSON path of the offending node.
struct SquadSchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// For each QA, emits the single context sentence whose half-open span
// contains the answer start offset, paired with the question. QAs whose
// offset falls outside the context are skipped and counted.
IngestResult ingest_squad(const std::string& json_text);
IngestResult ingest_squad_file(const std::string& path);

}  // namespace qgen
