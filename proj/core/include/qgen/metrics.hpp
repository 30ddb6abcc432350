#pragma once

#include <array>
#include <string>
#include <vector>

#include "qgen/question_types.hpp"
#include "qgen/stopwords.hpp"

namespace qgen {

using Tokens = std::vector<std::string>;

struct BleuDetail {
  std::array<double, 5> precisions{};  // modified n-gram precision, index 1..4
  std::array<double, 5> cumulative{};  // BLEU-n, index 1..4
  double brevity_penalty = 1.0;
  long candidate_length = 0;
  long reference_length = 0;
};

// Corpus-level multi-reference BLEU: n-gram counts are clipped against the
// maximum reference count within the group, precisions pool over the corpus,
// and the brevity penalty uses the per-group closest reference length (ties
// to the shorter). No smoothing; any empty n-gram order zeroes the score.
double bleu(const std::vector<Tokens>& candidates,
            const std::vector<std::vector<Tokens>>& reference_groups, int max_order = 4,
            BleuDetail* detail = nullptr);

// Debug-level sentence BLEU with add-epsilon smoothing.
double sentence_bleu(const Tokens& candidate, const std::vector<Tokens>& references,
                     int max_order = 4);

long lcs_length(const Tokens& a, const Tokens& b);

// Mean over groups of the best-reference LCS F-measure with beta = 1.2.
double rouge_l(const std::vector<Tokens>& candidates,
               const std::vector<std::vector<Tokens>>& reference_groups, double beta = 1.2);

// Distinct non-stop words shared between a question and its source sentence.
int count_keywords(const Tokens& question, const Tokens& source, const StopWordList& stops);

struct KeywordStats {
  double mean_candidate = 0.0;
  double mean_gold = 0.0;
  double percentage = 0.0;  // mean_candidate / mean_gold * 100
};

KeywordStats keyword_stats(const std::vector<Tokens>& candidates, const std::vector<Tokens>& sources,
                           const std::vector<std::vector<Tokens>>& gold_reference_groups,
                           const StopWordList& stops);

struct TypePrfRow {
  long total = 0;      // gold count
  long predicted = 0;  // predicted count
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct TypePrfReport {
  std::array<TypePrfRow, kNumQuestionTypes> rows{};
  double accuracy = 0.0;
  long count = 0;
};

TypePrfReport type_prf(const std::vector<int>& predicted, const std::vector<int>& gold);

struct EvalReport {
  std::array<double, 5> bleu{};  // index 1..4
  double rouge_l = 0.0;
  TypePrfReport types;
  KeywordStats keywords;
  long groups = 0;
  long pairs = 0;

  std::string table() const;     // aligned human-readable report
  std::string kv_block() const;  // machine-readable key=value lines
};

}  // namespace qgen
