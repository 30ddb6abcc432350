#include "qgen/examples.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "qgen/text_util.hpp"

namespace qgen {

std::vector<uint8_t> compute_copy_labels(const std::vector<std::string>& source_words,
                                         const std::vector<std::string>& question_words,
                                         const StopWordList& stops) {
  std::unordered_set<std::string> question_set(question_words.begin(), question_words.end());
  std::vector<uint8_t> labels(source_words.size(), 0);
  for (size_t i = 0; i < source_words.size(); ++i)
    if (question_set.count(source_words[i]) && !stops.contains(source_words[i])) labels[i] = 1;
  return labels;
}

BuiltExamples build_examples(const std::vector<SquadPair>& pairs, const SubwordModel& bpe,
                             const StopWordList& stops, const Caps& caps) {
  BuiltExamples built;
  std::unordered_map<std::string, size_t> group_of_source;

  for (const auto& pair : pairs) {
    const auto source_words = split_ws(pair.sentence);
    const auto question_words = split_ws(pair.question);
    const auto word_labels = compute_copy_labels(source_words, question_words, stops);

    TrainingExample ex;
    ex.source_text = pair.sentence;
    ex.question_text = pair.question;
    ex.type_id = int(label_question_type(question_words));

    // encode word-by-word so copy labels project onto every subword of a
    // labeled word
    for (size_t wi = 0; wi < source_words.size(); ++wi) {
      const auto ids = bpe.encode_word(source_words[wi]);
      for (int id : ids) {
        if (int(ex.source_ids.size()) >= caps.max_source) break;
        ex.source_ids.push_back(id);
        ex.copy_labels.push_back(word_labels[wi]);
      }
      if (int(ex.source_ids.size()) >= caps.max_source) break;
    }
    ex.target_ids = bpe.encode(pair.question);
    if (int(ex.target_ids.size()) > caps.max_target) ex.target_ids.resize(size_t(caps.max_target));
    ex.target_ids.push_back(SubwordModel::kEos);

    if (ex.source_ids.empty() || ex.target_ids.size() <= 1) {
      ++built.dropped;
      continue;
    }

    auto [it, fresh] = group_of_source.try_emplace(pair.sentence, built.groups.size());
    if (fresh) {
      RefGroup g;
      g.source_text = pair.sentence;
      built.groups.push_back(std::move(g));
    }
    ex.group = int(it->second);
    built.groups[it->second].questions.push_back(pair.question);
    built.groups[it->second].example_indices.push_back(built.examples.size());
    built.examples.push_back(std::move(ex));
  }
  return built;
}

namespace {

std::string ids_to_str(const std::vector<int>& ids) {
  std::string out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(ids[i]);
  }
  return out;
}

std::vector<int> str_to_ids(const std::string& s) {
  std::vector<int> out;
  std::istringstream in(s);
  int v;
  while (in >> v) out.push_back(v);
  return out;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return out;
}

}  // namespace

void save_examples(const std::string& path_prefix, const BuiltExamples& built) {
  std::ofstream ex_out(path_prefix + ".examples.tsv", std::ios::binary);
  std::ofstream ref_out(path_prefix + ".refs.tsv", std::ios::binary);
  if (!ex_out || !ref_out) throw std::runtime_error("cannot write dataset files at " + path_prefix);
  // examples are written group by group so the group structure is recoverable
  // from the refs file alone
  for (const auto& group : built.groups) {
    ref_out << group.source_text;
    for (const auto& q : group.questions) ref_out << '\t' << q;
    ref_out << '\n';
    for (size_t idx : group.example_indices) {
      const auto& ex = built.examples[idx];
      ex_out << ids_to_str(ex.source_ids) << '\t' << ids_to_str(ex.target_ids) << '\t'
             << type_name(QuestionType(ex.type_id)) << '\t';
      for (uint8_t l : ex.copy_labels) ex_out << (l ? '1' : '0');
      ex_out << '\n';
    }
  }
}

BuiltExamples load_examples(const std::string& path_prefix) {
  std::ifstream ex_in(path_prefix + ".examples.tsv", std::ios::binary);
  std::ifstream ref_in(path_prefix + ".refs.tsv", std::ios::binary);
  if (!ex_in || !ref_in) throw std::runtime_error("cannot open dataset files at " + path_prefix);

  BuiltExamples built;
  std::string line;
  while (std::getline(ref_in, line)) {
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() < 2) throw std::runtime_error("refs line without questions: " + line);
    RefGroup g;
    g.source_text = fields[0];
    g.questions.assign(fields.begin() + 1, fields.end());
    built.groups.push_back(std::move(g));
  }
  size_t group_idx = 0, within = 0;
  while (std::getline(ex_in, line)) {
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 4) throw std::runtime_error("examples line must have 4 tab-separated fields");
    while (group_idx < built.groups.size() && within >= built.groups[group_idx].questions.size()) {
      ++group_idx;
      within = 0;
    }
    if (group_idx >= built.groups.size())
      throw std::runtime_error("more examples than reference-group slots");
    TrainingExample ex;
    ex.source_ids = str_to_ids(fields[0]);
    ex.target_ids = str_to_ids(fields[1]);
    auto type = type_from_name(fields[2]);
    if (!type) throw std::runtime_error("unknown question type: " + fields[2]);
    ex.type_id = int(*type);
    ex.copy_labels.reserve(fields[3].size());
    for (char c : fields[3]) {
      if (c != '0' && c != '1') throw std::runtime_error("copy-label bitstring must be 0/1");
      ex.copy_labels.push_back(c == '1');
    }
    if (ex.copy_labels.size() != ex.source_ids.size())
      throw std::runtime_error("copy-label bitstring length does not match source length");
    ex.group = int(group_idx);
    ex.source_text = built.groups[group_idx].source_text;
    ex.question_text = built.groups[group_idx].questions[within];
    built.groups[group_idx].example_indices.push_back(built.examples.size());
    built.examples.push_back(std::move(ex));
    ++within;
  }
  return built;
}

}  // namespace qgen
