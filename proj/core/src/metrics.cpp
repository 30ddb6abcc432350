#include "qgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace qgen {

namespace {

// n-grams keyed by tokens joined with an unprintable separator
std::unordered_map<std::string, int> ngram_counts(const Tokens& toks, int n) {
  std::unordered_map<std::string, int> counts;
  if (int(toks.size()) < n) return counts;
  for (size_t i = 0; i + n <= toks.size(); ++i) {
    std::string key = toks[i];
    for (int j = 1; j < n; ++j) {
      key += '\x1f';
      key += toks[i + j];
    }
    ++counts[key];
  }
  return counts;
}

long closest_ref_length(long clen, const std::vector<Tokens>& refs) {
  long best = long(refs[0].size());
  for (const auto& r : refs) {
    long rl = long(r.size());
    long d = std::labs(rl - clen), bd = std::labs(best - clen);
    if (d < bd || (d == bd && rl < best)) best = rl;
  }
  return best;
}

std::string fmt2(double score100) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", score100);
  return buf;
}

}  // namespace

double bleu(const std::vector<Tokens>& candidates,
            const std::vector<std::vector<Tokens>>& reference_groups, int max_order,
            BleuDetail* detail) {
  if (candidates.empty()) throw std::invalid_argument("bleu: empty corpus");
  if (candidates.size() != reference_groups.size())
    throw std::invalid_argument("bleu: candidate/reference-group count mismatch");
  if (max_order < 1 || max_order > 4) throw std::invalid_argument("bleu: order must be 1..4");

  std::array<long, 5> matched{}, total{};
  long c = 0, r = 0;
  for (size_t gi = 0; gi < candidates.size(); ++gi) {
    const auto& cand = candidates[gi];
    const auto& refs = reference_groups[gi];
    if (refs.empty()) throw std::invalid_argument("bleu: group without references");
    c += long(cand.size());
    r += closest_ref_length(long(cand.size()), refs);
    for (int n = 1; n <= max_order; ++n) {
      auto cand_ngrams = ngram_counts(cand, n);
      std::unordered_map<std::string, int> max_ref;
      for (const auto& ref : refs)
        for (const auto& [k, v] : ngram_counts(ref, n)) max_ref[k] = std::max(max_ref[k], v);
      for (const auto& [k, v] : cand_ngrams) {
        auto it = max_ref.find(k);
        matched[n] += std::min(v, it == max_ref.end() ? 0 : it->second);
      }
      total[n] += std::max<long>(0, long(cand.size()) - n + 1);
    }
  }

  const double bp = (c < r && c > 0) ? std::exp(1.0 - double(r) / double(c)) : (c == 0 ? 0.0 : 1.0);
  BleuDetail local;
  BleuDetail& d = detail ? *detail : local;
  d.brevity_penalty = bp;
  d.candidate_length = c;
  d.reference_length = r;
  double result = 0.0;
  for (int n = 1; n <= max_order; ++n) {
    d.precisions[n] = total[n] > 0 ? double(matched[n]) / double(total[n]) : 0.0;
    double log_sum = 0.0;
    bool zero = false;
    for (int k = 1; k <= n; ++k) {
      if (d.precisions[k] <= 0.0) {
        zero = true;
        break;
      }
      log_sum += std::log(d.precisions[k]) / n;
    }
    d.cumulative[n] = zero ? 0.0 : bp * std::exp(log_sum);
    if (n == max_order) result = d.cumulative[n];
  }
  return result;
}

double sentence_bleu(const Tokens& candidate, const std::vector<Tokens>& references, int max_order) {
  constexpr double kEps = 1e-9;
  long c = long(candidate.size());
  long r = closest_ref_length(c, references);
  double log_sum = 0.0;
  for (int n = 1; n <= max_order; ++n) {
    auto cand_ngrams = ngram_counts(candidate, n);
    std::unordered_map<std::string, int> max_ref;
    for (const auto& ref : references)
      for (const auto& [k, v] : ngram_counts(ref, n)) max_ref[k] = std::max(max_ref[k], v);
    long matched = 0;
    for (const auto& [k, v] : cand_ngrams) {
      auto it = max_ref.find(k);
      matched += std::min(v, it == max_ref.end() ? 0 : it->second);
    }
    long total = std::max<long>(0, c - n + 1);
    double p = total > 0 ? (double(matched) + kEps) / (double(total) + kEps) : kEps;
    log_sum += std::log(p) / max_order;
  }
  const double bp = (c < r && c > 0) ? std::exp(1.0 - double(r) / double(c)) : (c == 0 ? 0.0 : 1.0);
  return bp * std::exp(log_sum);
}

long lcs_length(const Tokens& a, const Tokens& b) {
  const size_t n = a.size(), m = b.size();
  if (n == 0 || m == 0) return 0;
  std::vector<long> prev(m + 1, 0), cur(m + 1, 0);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[m];
}

double rouge_l(const std::vector<Tokens>& candidates,
               const std::vector<std::vector<Tokens>>& reference_groups, double beta) {
  if (candidates.size() != reference_groups.size())
    throw std::invalid_argument("rouge_l: candidate/reference-group count mismatch");
  if (candidates.empty()) return 0.0;
  double sum = 0.0;
  const double b2 = beta * beta;
  for (size_t gi = 0; gi < candidates.size(); ++gi) {
    double best = 0.0;
    for (const auto& ref : reference_groups[gi]) {
      const long lcs = lcs_length(candidates[gi], ref);
      if (lcs == 0 || candidates[gi].empty() || ref.empty()) continue;
      const double p = double(lcs) / double(candidates[gi].size());
      const double r = double(lcs) / double(ref.size());
      const double f = (1.0 + b2) * r * p / (r + b2 * p);
      best = std::max(best, f);
    }
    sum += best;
  }
  return sum / double(candidates.size());
}

int count_keywords(const Tokens& question, const Tokens& source, const StopWordList& stops) {
  std::unordered_set<std::string> source_set(source.begin(), source.end());
  std::unordered_set<std::string> counted;
  for (const auto& w : question)
    if (source_set.count(w) && !stops.contains(w)) counted.insert(w);
  return int(counted.size());
}

KeywordStats keyword_stats(const std::vector<Tokens>& candidates, const std::vector<Tokens>& sources,
                           const std::vector<std::vector<Tokens>>& gold_reference_groups,
                           const StopWordList& stops) {
  if (candidates.size() != sources.size() || sources.size() != gold_reference_groups.size())
    throw std::invalid_argument("keyword_stats: aligned inputs required");
  KeywordStats stats;
  if (candidates.empty()) return stats;
  long cand_total = 0, gold_total = 0, gold_count = 0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    cand_total += count_keywords(candidates[i], sources[i], stops);
    for (const auto& ref : gold_reference_groups[i]) {
      gold_total += count_keywords(ref, sources[i], stops);
      ++gold_count;
    }
  }
  stats.mean_candidate = double(cand_total) / double(candidates.size());
  stats.mean_gold = gold_count ? double(gold_total) / double(gold_count) : 0.0;
  stats.percentage = stats.mean_gold > 0 ? 100.0 * stats.mean_candidate / stats.mean_gold : 0.0;
  return stats;
}

TypePrfReport type_prf(const std::vector<int>& predicted, const std::vector<int>& gold) {
  if (predicted.size() != gold.size())
    throw std::invalid_argument("type_prf: predicted/gold length mismatch (" +
                                std::to_string(predicted.size()) + " vs " + std::to_string(gold.size()) + ")");
  TypePrfReport report;
  report.count = long(predicted.size());
  std::array<std::array<long, kNumQuestionTypes>, kNumQuestionTypes> confusion{};
  for (size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] < 0 || predicted[i] >= kNumQuestionTypes || gold[i] < 0 || gold[i] >= kNumQuestionTypes)
      throw std::invalid_argument("type_prf: type id out of range");
    ++confusion[size_t(gold[i])][size_t(predicted[i])];
  }
  long trace = 0;
  for (int t = 0; t < kNumQuestionTypes; ++t) {
    auto& row = report.rows[size_t(t)];
    long tp = confusion[size_t(t)][size_t(t)];
    trace += tp;
    for (int u = 0; u < kNumQuestionTypes; ++u) {
      row.total += confusion[size_t(t)][size_t(u)];
      row.predicted += confusion[size_t(u)][size_t(t)];
    }
    row.precision = row.predicted > 0 ? double(tp) / double(row.predicted) : 0.0;
    row.recall = row.total > 0 ? double(tp) / double(row.total) : 0.0;
    row.f1 = (row.precision + row.recall) > 0
                 ? 2.0 * row.precision * row.recall / (row.precision + row.recall)
                 : 0.0;
  }
  report.accuracy = report.count > 0 ? double(trace) / double(report.count) : 0.0;
  return report;
}

std::string EvalReport::table() const {
  std::ostringstream os;
  os << "== generation ==\n";
  for (int n = 1; n <= 4; ++n) os << "BLEU-" << n << "   " << fmt2(bleu[size_t(n)] * 100) << "\n";
  os << "ROUGE-L  " << fmt2(rouge_l * 100) << "\n";
  os << "\n== keyword copying ==\n";
  os << "keywords/question  " << fmt2(keywords.mean_candidate) << "\n";
  os << "gold mean          " << fmt2(keywords.mean_gold) << "\n";
  os << "percentage         " << fmt2(keywords.percentage) << "%\n";
  os << "\n== question types ==\n";
  char line[128];
  std::snprintf(line, sizeof line, "%-8s %8s %8s %10s %8s %8s\n", "type", "total", "predict",
                "precision", "recall", "fscore");
  os << line;
  for (int t = 0; t < kNumQuestionTypes; ++t) {
    const auto& row = types.rows[size_t(t)];
    std::snprintf(line, sizeof line, "%-8s %8ld %8ld %10.2f %8.2f %8.2f\n",
                  std::string(type_display_name(QuestionType(t))).c_str(), row.total, row.predicted,
                  row.precision, row.recall, row.f1);
    os << line;
  }
  os << "accuracy " << fmt2(types.accuracy * 100) << "%\n";
  os << "\ngroups " << groups << "  pairs " << pairs << "\n";
  return os.str();
}

std::string EvalReport::kv_block() const {
  std::ostringstream os;
  for (int n = 1; n <= 4; ++n) os << "bleu" << n << "=" << fmt2(bleu[size_t(n)] * 100) << "\n";
  os << "rouge_l=" << fmt2(rouge_l * 100) << "\n";
  os << "keywords_mean=" << fmt2(keywords.mean_candidate) << "\n";
  os << "keywords_gold_mean=" << fmt2(keywords.mean_gold) << "\n";
  os << "keywords_pct=" << fmt2(keywords.percentage) << "\n";
  os << "type_accuracy=" << fmt2(types.accuracy * 100) << "\n";
  for (int t = 0; t < kNumQuestionTypes; ++t) {
    const auto& row = types.rows[size_t(t)];
    os << "type_" << type_name(QuestionType(t)) << "=" << row.total << "," << row.predicted << ","
       << fmt2(row.precision * 100) << "," << fmt2(row.recall * 100) << "," << fmt2(row.f1 * 100) << "\n";
  }
  os << "groups=" << groups << "\n";
  os << "pairs=" << pairs << "\n";
  return os.str();
}

}  // namespace qgen
