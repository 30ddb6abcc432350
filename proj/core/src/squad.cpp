#include "qgen/squad.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "qgen/text_util.hpp"

namespace qgen {

namespace {

using nlohmann::json;

const json& need(const json& node, const char* key, const std::string& path) {
  if (!node.is_object() || !node.contains(key))
    throw SquadSchemaError("missing field '" + std::string(key) + "' at " + path);
  return node.at(key);
}

std::string tokenized(const std::string& raw) {
  return join(word_tokenize(to_lower(normalize_ws(raw))), " ");
}

}  // namespace

IngestResult ingest_squad(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SquadSchemaError(std::string("not valid JSON: ") + e.what());
  }

  IngestResult result;
  const json& data = need(root, "data", "$");
  if (!data.is_array()) throw SquadSchemaError("'data' is not an array at $");

  for (size_t ai = 0; ai < data.size(); ++ai) {
    const std::string apath = "data[" + std::to_string(ai) + "]";
    const json& paragraphs = need(data[ai], "paragraphs", apath);
    if (!paragraphs.is_array()) throw SquadSchemaError("'paragraphs' is not an array at " + apath);
    for (size_t pi = 0; pi < paragraphs.size(); ++pi) {
      const std::string ppath = apath + ".paragraphs[" + std::to_string(pi) + "]";
      const json& para = paragraphs[pi];
      const json& context_node = need(para, "context", ppath);
      if (!context_node.is_string()) throw SquadSchemaError("'context' is not a string at " + ppath);
      const std::string context = context_node.get<std::string>();
      const auto spans = split_sentence_spans(context);
      const json& qas = need(para, "qas", ppath);
      if (!qas.is_array()) throw SquadSchemaError("'qas' is not an array at " + ppath);
      for (size_t qi = 0; qi < qas.size(); ++qi) {
        const std::string qpath = ppath + ".qas[" + std::to_string(qi) + "]";
        const json& qa = qas[qi];
        ++result.stats.total_qas;
        const json& question_node = need(qa, "question", qpath);
        if (!question_node.is_string()) throw SquadSchemaError("'question' is not a string at " + qpath);
        const json& answers = need(qa, "answers", qpath);
        if (!answers.is_array()) throw SquadSchemaError("'answers' is not an array at " + qpath);
        if (answers.empty()) {
          ++result.stats.skipped;
          continue;
        }
        const json& ans = answers[0];
        const json& start_node = need(ans, "answer_start", qpath + ".answers[0]");
        if (!start_node.is_number_integer())
          throw SquadSchemaError("'answer_start' is not an integer at " + qpath + ".answers[0]");
        const long offset = start_node.get<long>();
        if (offset < 0 || size_t(offset) >= context.size()) {
          ++result.stats.skipped;
          continue;
        }
        const std::string* sentence = nullptr;
        std::string sentence_buf;
        for (const auto& [b, e] : spans) {
          if (size_t(offset) >= b && size_t(offset) < e) {
            sentence_buf = context.substr(b, e - b);
            sentence = &sentence_buf;
            break;
          }
        }
        if (!sentence) {  // offset inside trailing whitespace not covered by any span
          ++result.stats.skipped;
          continue;
        }
        SquadPair pair;
        pair.sentence = tokenized(sentence_buf);
        pair.question = tokenized(question_node.get<std::string>());
        pair.article = int(ai);
        if (pair.sentence.empty() || pair.question.empty()) {
          ++result.stats.skipped;
          continue;
        }
        result.pairs.push_back(std::move(pair));
        ++result.stats.emitted;
      }
    }
  }
  return result;
}

IngestResult ingest_squad_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open SQuAD file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ingest_squad(ss.str());
}

}  // namespace qgen
