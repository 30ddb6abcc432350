#include "qgen/subword.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "qgen/text_util.hpp"

namespace qgen {

namespace {

constexpr std::string_view kSpecials[4] = {"[PAD]", "[UNK]", "[SOS]", "[EOS]"};

using SymPair = std::pair<std::string, std::string>;

std::vector<std::string> word_symbols(const std::string& word) {
  auto syms = utf8_codepoints(word);
  if (!syms.empty()) syms.back() += SubwordModel::kEndOfWord;
  return syms;
}

// One left-to-right replacement pass of (a,b) -> ab, the same order used both
// while learning and while encoding.
void merge_in_place(std::vector<std::string>& syms, const SymPair& pair) {
  std::vector<std::string> out;
  out.reserve(syms.size());
  size_t i = 0;
  while (i < syms.size()) {
    if (i + 1 < syms.size() && syms[i] == pair.first && syms[i + 1] == pair.second) {
      out.push_back(pair.first + pair.second);
      i += 2;
    } else {
      out.push_back(std::move(syms[i]));
      ++i;
    }
  }
  syms = std::move(out);
}

}  // namespace

void SubwordModel::rebuild_index() {
  token_to_id.clear();
  for (size_t i = 0; i < id_to_token.size(); ++i) token_to_id[id_to_token[i]] = int(i);
  merge_rank.clear();
  for (size_t r = 0; r < merges.size(); ++r) {
    auto& inner = merge_rank[merges[r].first];
    inner.emplace(merges[r].second, int(r));
  }
}

std::vector<int> SubwordModel::encode_word(const std::string& word) const {
  auto syms = word_symbols(word);
  if (syms.empty()) return {};
  while (syms.size() > 1) {
    int best_rank = -1;
    size_t best_pos = 0;
    for (size_t i = 0; i + 1 < syms.size(); ++i) {
      auto it = merge_rank.find(syms[i]);
      if (it == merge_rank.end()) continue;
      auto jt = it->second.find(syms[i + 1]);
      if (jt == it->second.end()) continue;
      if (best_rank < 0 || jt->second < best_rank) {
        best_rank = jt->second;
        best_pos = i;
      }
    }
    if (best_rank < 0) break;
    (void)best_pos;
    merge_in_place(syms, merges[size_t(best_rank)]);
  }
  std::vector<int> ids;
  ids.reserve(syms.size());
  for (const auto& s : syms) {
    auto it = token_to_id.find(s);
    ids.push_back(it == token_to_id.end() ? kUnk : it->second);
  }
  return ids;
}

std::vector<int> SubwordModel::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& word : split_ws(text)) {
    auto w = encode_word(word);
    ids.insert(ids.end(), w.begin(), w.end());
  }
  return ids;
}

std::string SubwordModel::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    if (id < 0 || id >= vocab_size())
      throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of size " +
                              std::to_string(vocab_size()));
    if (id == kPad || id == kSos || id == kEos) continue;
    if (id == kUnk) {
      out += "[unk] ";
      continue;
    }
    const std::string& tok = id_to_token[size_t(id)];
    if (tok.size() >= kEndOfWord.size() &&
        std::string_view(tok).substr(tok.size() - kEndOfWord.size()) == kEndOfWord) {
      out += tok.substr(0, tok.size() - kEndOfWord.size());
      out += ' ';
    } else {
      out += tok;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

SubwordModel learn_bpe(const std::vector<std::string>& corpus_lines, int target_size) {
  // distinct words with counts
  std::map<std::string, long> word_counts;
  for (const auto& line : corpus_lines)
    for (const auto& w : split_ws(line)) ++word_counts[w];
  if (word_counts.empty()) throw std::invalid_argument("learn_bpe: empty corpus");

  std::vector<std::vector<std::string>> words;
  std::vector<long> counts;
  words.reserve(word_counts.size());
  for (const auto& [w, c] : word_counts) {
    words.push_back(word_symbols(w));
    counts.push_back(c);
  }

  // initial alphabet
  std::set<std::string> alphabet;
  for (const auto& syms : words) alphabet.insert(syms.begin(), syms.end());

  const int base = 4 + int(alphabet.size());
  if (target_size < base)
    throw std::invalid_argument("learn_bpe: target_size " + std::to_string(target_size) +
                                " smaller than alphabet plus specials (" + std::to_string(base) + ")");

  // pair -> total count, pair -> words containing it
  std::map<SymPair, long> pair_counts;
  std::map<SymPair, std::set<size_t>> pair_words;
  auto add_pairs_of = [&](size_t wi, long sign) {
    const auto& syms = words[wi];
    for (size_t i = 0; i + 1 < syms.size(); ++i) {
      SymPair p{syms[i], syms[i + 1]};
      pair_counts[p] += sign * counts[wi];
      if (sign > 0) {
        pair_words[p].insert(wi);
      }
    }
  };
  for (size_t wi = 0; wi < words.size(); ++wi) add_pairs_of(wi, +1);

  SubwordModel model;
  int vocab = base;
  std::set<std::string> produced;  // merge outputs seen so far

  while (vocab < target_size) {
    // highest count, ties by lexicographically smallest pair
    const SymPair* best = nullptr;
    long best_count = 0;
    for (const auto& [p, c] : pair_counts) {
      if (c > best_count || (c == best_count && best && p < *best)) {
        best = &p;
        best_count = c;
      }
    }
    if (!best || best_count < 2) break;
    const SymPair pair = *best;
    model.merges.push_back(pair);
    const std::string merged = pair.first + pair.second;
    if (!alphabet.count(merged) && !produced.count(merged)) {
      produced.insert(merged);
      ++vocab;
    }

    auto affected = pair_words[pair];
    for (size_t wi : affected) {
      add_pairs_of(wi, -1);
      merge_in_place(words[wi], pair);
      add_pairs_of(wi, +1);
    }
    // drop exhausted entries so the scan stays small
    for (auto it = pair_counts.begin(); it != pair_counts.end();) {
      if (it->second <= 0) {
        pair_words.erase(it->first);
        it = pair_counts.erase(it);
      } else {
        ++it;
      }
    }
    // stale word sets: prune words that no longer contain their pair lazily
    for (auto it = pair_words.begin(); it != pair_words.end();) {
      if (!pair_counts.count(it->first)) it = pair_words.erase(it);
      else ++it;
    }
  }

  model.id_to_token.assign(std::begin(kSpecials), std::end(kSpecials));
  for (const auto& s : alphabet) model.id_to_token.push_back(s);
  std::set<std::string> seen(alphabet.begin(), alphabet.end());
  for (const auto& m : model.merges) {
    std::string merged = m.first + m.second;
    if (seen.insert(merged).second) model.id_to_token.push_back(std::move(merged));
  }
  model.rebuild_index();
  return model;
}

std::string SubwordModel::to_text() const {
  std::ostringstream os;
  os << "bpe v1\n";
  os << "merges " << merges.size() << "\n";
  for (const auto& m : merges) os << m.first << " " << m.second << "\n";
  os << "vocab " << id_to_token.size() << "\n";
  for (const auto& t : id_to_token) os << t << "\n";
  return os.str();
}

SubwordModel SubwordModel::from_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  auto fail = [](const std::string& what) -> SubwordModel {
    throw std::runtime_error("malformed subword model: " + what);
  };
  if (!std::getline(in, line) || line != "bpe v1") return fail("bad magic");
  SubwordModel model;
  size_t n = 0;
  if (!(in >> line >> n) || line != "merges") return fail("missing merges header");
  std::getline(in, line);
  for (size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) return fail("truncated merges");
    auto sp = line.find(' ');
    if (sp == std::string::npos) return fail("merge line without separator");
    model.merges.emplace_back(line.substr(0, sp), line.substr(sp + 1));
  }
  if (!(in >> line >> n) || line != "vocab") return fail("missing vocab header");
  std::getline(in, line);
  for (size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) return fail("truncated vocab");
    model.id_to_token.push_back(line);
  }
  for (int i = 0; i < 4; ++i)
    if (model.id_to_token.size() <= size_t(i) || model.id_to_token[size_t(i)] != kSpecials[i])
      return fail("special tokens out of place");
  model.rebuild_index();
  return model;
}

void SubwordModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write subword model: " + path);
  out << to_text();
}

SubwordModel SubwordModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open subword model: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

void SubwordModel::save_merges(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write merges file: " + path);
  for (const auto& m : merges) out << m.first << " " << m.second << "\n";
}

}  // namespace qgen
